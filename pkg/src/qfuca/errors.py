"""Exception types shared across the simulator."""


class DimensionError(ValueError):
    """Matrix or vector dimensions are empty, non-conformable, or mismatched."""


class GeometryError(ValueError):
    """Physically invalid antenna geometry (ratio out of range, colocated elements)."""


class DomainError(ValueError):
    """Argument outside the supported numerical domain."""


class DegenerateChannelError(ValueError):
    """Operation undefined on an identically-zero or degenerate channel."""


class ConfigError(ValueError):
    """Malformed scenario configuration text."""
