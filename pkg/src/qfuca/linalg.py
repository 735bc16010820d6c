"""Complex dense-matrix kernel.

Unitary DFT/IDFT matrices, circulant construction and diagonalization,
block-matrix algebra for matrices whose entries are equally-shaped matrices,
and integer-order Bessel functions of the first kind.

All operations are pure and deterministic and never mutate their inputs, so
values can be shared freely between concurrent callers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError

MAX_BESSEL_ORDER = 64
MAX_BESSEL_ARG = 1.0e4

# Bessel evaluation: ascending power series below this argument, trapezoid
# quadrature of the periodic integral form above it.
_SERIES_CUTOFF = 12.0
_MIN_QUAD_NODES = 2048


def idft_matrix(n: int) -> np.ndarray:
    """Unitary n-point IDFT matrix, entry (a, b) = e^{j 2 pi a b / n} / sqrt(n).

    Its conjugate transpose is the (unitary) DFT matrix.
    """
    if n < 1:
        raise DimensionError(f"IDFT matrix needs n >= 1, got {n}")
    a = np.arange(n)
    return np.exp(2j * np.pi / n * np.outer(a, a)) / np.sqrt(n)


def dft_matrix(n: int) -> np.ndarray:
    """Unitary n-point DFT matrix (conjugate transpose of idft_matrix)."""
    return idft_matrix(n).conj().T


def circulant_from_first_row(row) -> np.ndarray:
    """Square circulant matrix whose row r is the first row right-rotated r slots.

    C[r, c] = row[(c - r) mod n].
    """
    row = np.asarray(row, dtype=complex)
    if row.ndim != 1 or row.size == 0:
        raise DimensionError("first row must be a non-empty 1-D sequence")
    n = row.size
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return row[idx]


def diagonalize_circulant(c: np.ndarray) -> np.ndarray:
    """Eigenvalues of a circulant matrix, i.e. the diagonal of W^H C W.

    Uses the closed form: sqrt(n) times the DFT of the column-reversed first
    row [c0, c_{n-1}, ..., c1].  The caller asserts that C is circulant; only
    squareness is checked.
    """
    c = np.asarray(c, dtype=complex)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DimensionError(f"circulant diagonalization needs a square matrix, got {c.shape}")
    first = c[0]
    reversed_row = np.concatenate([first[:1], first[:0:-1]])
    n = first.size
    return np.sqrt(n) * (dft_matrix(n) @ reversed_row)


@dataclass(frozen=True)
class BlockMatrix:
    """Rectangular grid of equally-shaped complex blocks.

    Stored as a 4-D array (block_rows, block_cols, inner_rows, inner_cols).
    """

    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=complex)
        if b.ndim != 4:
            raise DimensionError(f"block grid must be 4-D, got shape {b.shape}")
        object.__setattr__(self, "blocks", b)

    @classmethod
    def from_grid(cls, grid) -> "BlockMatrix":
        """Build from a nested sequence of 2-D arrays; the grid must be
        rectangular and all blocks equally shaped."""
        rows = [list(r) for r in grid]
        if not rows or not rows[0]:
            raise DimensionError("block grid must be non-empty")
        ncols = len(rows[0])
        inner = np.asarray(rows[0][0]).shape
        arr = np.empty((len(rows), ncols) + inner, dtype=complex)
        for i, r in enumerate(rows):
            if len(r) != ncols:
                raise DimensionError("block grid must be rectangular")
            for j, blk in enumerate(r):
                blk = np.asarray(blk, dtype=complex)
                if blk.shape != inner:
                    raise DimensionError(
                        f"block ({i},{j}) has shape {blk.shape}, expected {inner}")
                arr[i, j] = blk
        return cls(arr)

    @property
    def block_shape(self):
        return self.blocks.shape[:2]

    @property
    def inner_shape(self):
        return self.blocks.shape[2:]

    def block(self, i: int, j: int) -> np.ndarray:
        return self.blocks[i, j]

    def flatten(self) -> np.ndarray:
        """The ordinary 2-D matrix this block matrix represents."""
        br, bc, ir, ic = self.blocks.shape
        return self.blocks.transpose(0, 2, 1, 3).reshape(br * ir, bc * ic)


def block_matmul(a: BlockMatrix, b: BlockMatrix) -> BlockMatrix:
    """Block-matrix product; flattening then multiplying gives the same result."""
    if a.block_shape[1] != b.block_shape[0]:
        raise DimensionError(
            f"block dimensions not conformable: {a.block_shape} x {b.block_shape}")
    if a.inner_shape[1] != b.inner_shape[0]:
        raise DimensionError(
            f"inner dimensions not conformable: {a.inner_shape} x {b.inner_shape}")
    return BlockMatrix(np.einsum("ikab,kjbc->ijac", a.blocks, b.blocks))


def _bessel_series(order: int, x: float) -> float:
    # J_l(x) = sum_m (-1)^m (x/2)^{2m+l} / (m! (m+l)!), l >= 0
    half = x / 2.0
    term = 1.0
    for i in range(1, order + 1):
        term *= half / i
    total = term
    m = 1
    while m <= 200:
        term *= -(half * half) / (m * (m + order))
        total += term
        if abs(term) < 1e-18 * max(abs(total), 1e-30):
            break
        m += 1
    return total


def _bessel_quadrature(order: int, x: float) -> float:
    # J_l(x) = (1/2pi) int_0^{2pi} cos(l t - x sin t) dt; the integrand is
    # 2pi-periodic, so the uniform trapezoid rule converges spectrally once
    # the node count clears the integrand's bandwidth (~|x| + order).
    n = max(_MIN_QUAD_NODES, int(4 * (abs(x) + order + 8)))
    t = 2.0 * np.pi * np.arange(n) / n
    return float(np.mean(np.cos(order * t - x * np.sin(t))))


def bessel_j(order: int, x: float) -> float:
    """Bessel function of the first kind J_order(x) for integer order.

    Accurate to about 1e-10 absolute over |order| <= 64, |x| <= 1e4.
    """
    if int(order) != order:
        raise DomainError(f"Bessel order must be an integer, got {order!r}")
    order = int(order)
    x = float(x)
    if abs(order) > MAX_BESSEL_ORDER:
        raise DomainError(f"|order| must be <= {MAX_BESSEL_ORDER}, got {order}")
    if not np.isfinite(x) or abs(x) > MAX_BESSEL_ARG:
        raise DomainError(f"|x| must be <= {MAX_BESSEL_ARG:g}, got {x!r}")
    sign = 1.0
    if order < 0:
        # J_{-l}(x) = (-1)^l J_l(x)
        order = -order
        if order % 2:
            sign = -sign
    if x < 0:
        # J_l(-x) = (-1)^l J_l(x)
        x = -x
        if order % 2:
            sign = -sign
    if x <= _SERIES_CUTOFF:
        return sign * _bessel_series(order, x)
    return sign * _bessel_quadrature(order, x)
