"""Transceiver chain: two-dimension OAM modulation, physical propagation,
two-dimension demodulation, and mode-wise ML detection.

Every stage keeps a direct-summation path and a matrix path side by side;
the two must agree to machine precision, and the physical propagation path
must match the logical block-circulant path, which the test suite enforces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel as chan
from .errors import DimensionError
from .geometry import Layout, SharingMatrix, duplicate_to_slots, sharing_matrix, \
    slot_group_sum
from .linalg import BlockMatrix, block_matmul, dft_matrix, idft_matrix

_QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)
_BPSK = np.array([1 + 0j, -1 + 0j])


def _qam16_points() -> np.ndarray:
    re, im = np.meshgrid([-3, -1, 1, 3], [-3, -1, 1, 3])
    pts = (re + 1j * im).reshape(-1)
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


@dataclass(frozen=True)
class Constellation:
    """Finite symbol alphabet with unit average energy."""

    name: str
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("constellation needs a non-empty 1-D point set")
        if abs(np.mean(np.abs(pts) ** 2) - 1.0) > 1e-12:
            raise ValueError("constellation points must have unit average energy")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_name(cls, name: str) -> "Constellation":
        table = {"qpsk": _QPSK, "bpsk": _BPSK, "16qam": _qam16_points()}
        if name not in table:
            raise ValueError(f"unknown constellation {name!r}, expected one of {sorted(table)}")
        return cls(name=name, points=table[name])


@dataclass(frozen=True)
class SymbolGrid:
    """Transmit symbols s_{p,l} and their power budget.

    Arrays are (n_inter, n_inner) in DFT-index order; row/column index i
    corresponds to mode i for i <= n/2 and i - n beyond, matching the
    centered summation ranges.
    """

    n_inter: int
    n_inner: int
    symbols: np.ndarray
    power_alloc: np.ndarray

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=complex)
        pw = np.asarray(self.power_alloc, dtype=float)
        if sym.shape != (self.n_inter, self.n_inner) or pw.shape != sym.shape:
            raise DimensionError("symbol and power grids must be (n_inter, n_inner)")
        if np.any(pw < 0):
            raise ValueError("power allocation must be nonnegative")
        object.__setattr__(self, "symbols", sym)
        object.__setattr__(self, "power_alloc", pw)

    @property
    def total_power(self) -> float:
        return float(self.power_alloc.sum())

    def symbol(self, p: int, l: int) -> complex:
        return self.symbols[p % self.n_inter, l % self.n_inner]

    @classmethod
    def uniform(cls, n_inter: int, n_inner: int, symbols=None,
                total_power: float = 1.0) -> "SymbolGrid":
        """Grid with power averagely allocated over all modes."""
        if symbols is None:
            symbols = np.zeros((n_inter, n_inner), dtype=complex)
        pw = np.full((n_inter, n_inner), total_power / (n_inter * n_inner))
        return cls(n_inter=n_inter, n_inner=n_inner, symbols=symbols, power_alloc=pw)


@dataclass(frozen=True)
class NoiseModel:
    """Circular complex white noise per physical receive element."""

    element_variance: float
    seed: int = 0

    def __post_init__(self):
        if self.element_variance < 0:
            raise ValueError("noise variance must be nonnegative")

    def rng(self, frame: int = 0) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence((self.seed, frame)))

    def sample(self, n: int, frame: int = 0) -> np.ndarray:
        if self.element_variance == 0:
            return np.zeros(n, dtype=complex)
        scale = np.sqrt(self.element_variance / 2)
        g = self.rng(frame)
        return g.normal(scale=scale, size=n) + 1j * g.normal(scale=scale, size=n)


def logical_modulated(grid: SymbolGrid) -> np.ndarray:
    """Pre-superposition logical signals x_{n,k}: the two-dimension IDFT of
    the symbol grid, (1/sqrt(NK)) sum_{p,l} s e^{j2pi kl/K} e^{j2pi np/N}."""
    wn = idft_matrix(grid.n_inter)
    wk = idft_matrix(grid.n_inner)
    return wn @ grid.symbols @ wk


def tom_modulate(grid: SymbolGrid, tx: Layout) -> np.ndarray:
    """Physical transmit feed via the block-matrix form: the two-dimension
    IDFT block operator applied to the stacked symbol vectors, then the
    group-sum superposition; indexed by physical element id."""
    n, k = grid.n_inter, grid.n_inner
    if (n, k) != (tx.n_cells, tx.elems_per_cell):
        raise ValueError("symbol grid does not match the transmit layout")
    wk = idft_matrix(k)
    wtilde = BlockMatrix.from_grid(
        [[np.exp(2j * np.pi * nn * p / n) * wk for p in range(n)]
         for nn in range(n)])
    s_stack = BlockMatrix(grid.symbols.reshape(n, 1, k, 1))
    logical = block_matmul(wtilde, s_stack).flatten().reshape(n, k) / np.sqrt(n)
    return slot_group_sum(tx, logical)


def tom_modulate_loops(grid: SymbolGrid, tx: Layout) -> np.ndarray:
    """Physical transmit feed by direct double summation and explicit
    per-element superposition of shared slots."""
    n, k = grid.n_inter, grid.n_inner
    if (n, k) != (tx.n_cells, tx.elems_per_cell):
        raise ValueError("symbol grid does not match the transmit layout")
    p_modes = chan.mode_values(n)
    l_modes = chan.mode_values(k)
    logical = np.zeros((n, k), dtype=complex)
    for nn in range(n):
        for kk in range(k):
            acc = 0.0 + 0.0j
            for pi, p in enumerate(p_modes):
                for li, l in enumerate(l_modes):
                    acc += grid.symbols[pi, li] \
                        * np.exp(2j * np.pi * kk * l / k) \
                        * np.exp(2j * np.pi * nn * p / n)
            logical[nn, kk] = acc / np.sqrt(n * k)
    feed = np.zeros(tx.n_physical, dtype=complex)
    for nn in range(n):
        for kk in range(k):
            feed[tx.slot_group[nn, kk]] += logical[nn, kk]
    return feed


def propagate(tx_signals: np.ndarray, tx: Layout, rx: Layout,
              params: chan.PropagationParams, noise: NoiseModel,
              frame: int = 0) -> np.ndarray:
    """Physical element-to-element propagation plus receiver noise.

    Deterministic given (noise.seed, frame)."""
    x = np.asarray(tx_signals, dtype=complex)
    if x.size != tx.n_physical:
        raise DimensionError("transmit vector does not match the physical element count")
    g = chan.physical_gain_matrix(tx, rx, params)
    return g @ x + noise.sample(rx.n_physical, frame)


def propagate_logical(grid: SymbolGrid, block_channel: chan.BlockChannel) -> np.ndarray:
    """Noise-free logical path: the assembled block-circulant channel applied
    to the pre-superposition logical signals; returns the (M, V) grid."""
    x = logical_modulated(grid).reshape(-1)
    h = block_channel.assembled.flatten()
    v = block_channel.subchannels[0].shape[0]
    return (h @ x).reshape(block_channel.n_cells, v)


def split_received(rx_signals: np.ndarray, rx: Layout) -> np.ndarray:
    """Split each physical element's observation into its logical slots: the
    shared element's value is divided equally among the co-using cells (the
    1/L_v of the gain definition), which the inner demodulation's L undoes."""
    y = np.asarray(rx_signals, dtype=complex)
    if y.size != rx.n_physical:
        raise DimensionError("receive vector does not match the physical element count")
    counts = np.bincount(rx.slot_group.ravel(), minlength=rx.n_physical)
    return duplicate_to_slots(rx, y / counts)


def tod_split_compensate(rx_signals: np.ndarray, rx: Layout) -> np.ndarray:
    """Split physical observations to logical slots, then separate the
    inter-cell modes by the N-point phase compensation (matrix form):
    row p of the result is x~_p."""
    r = split_received(rx_signals, rx)
    n, v = r.shape
    wnh = BlockMatrix.from_grid(
        [[np.exp(-2j * np.pi * m * p / n) / np.sqrt(n) * np.eye(v)
          for m in range(n)] for p in range(n)])
    r_stack = BlockMatrix(r.reshape(n, 1, v, 1))
    return block_matmul(wnh, r_stack).flatten().reshape(n, v)


def tod_split_compensate_loops(rx_signals: np.ndarray, rx: Layout) -> np.ndarray:
    """Direct-summation variant: x~_{p,v} = (1/sqrt(N)) sum_m r_{m,v} e^{-j Theta_m p}."""
    r = split_received(rx_signals, rx)
    n, v = r.shape
    out = np.zeros((n, v), dtype=complex)
    for p in range(n):
        for m in range(n):
            out[p] += r[m] * np.exp(-2j * np.pi * m * p / n)
    return out / np.sqrt(n)


def tod_inner_demodulate(x_tilde_p: np.ndarray, sharing: SharingMatrix) -> np.ndarray:
    """Inner demodulation of one branch: s~_p = W^H L x~_p."""
    x = np.asarray(x_tilde_p, dtype=complex)
    if x.size != sharing.diag_values.size:
        raise DimensionError("branch length does not match the sharing matrix")
    return dft_matrix(x.size) @ (sharing.diag_values * x)


def ml_detect(s_tilde_p: np.ndarray, lambda_row: np.ndarray,
              constellation: Constellation,
              amplitudes: np.ndarray | None = None):
    """Mode-wise ML detection of one branch.

    Per inner mode l independently, picks argmin over the (amplitude-scaled)
    alphabet of |s~_p(l) - Lambda_{p,l} s|; exact ties resolve to the lowest
    constellation index.  Modes with Lambda exactly zero are undetectable and
    flagged; they return the tie-break symbol.

    Returns (detected values, detected indices, degenerate flags).
    """
    s_tilde = np.asarray(s_tilde_p, dtype=complex)
    lam = np.asarray(lambda_row, dtype=complex)
    if s_tilde.shape != lam.shape:
        raise DimensionError("branch and coefficient lengths differ")
    if not np.all(np.isfinite(lam.view(float))):
        raise ValueError("detection coefficients must be finite")
    k = s_tilde.size
    if amplitudes is None:
        amplitudes = np.ones(k)
    detected = np.zeros(k, dtype=complex)
    indices = np.zeros(k, dtype=int)
    degenerate = np.zeros(k, dtype=bool)
    for l in range(k):
        candidates = amplitudes[l] * constellation.points
        dist = np.abs(s_tilde[l] - lam[l] * candidates)
        idx = int(np.argmin(dist))
        indices[l] = idx
        detected[l] = candidates[idx]
        degenerate[l] = lam[l] == 0
    return detected, indices, degenerate


@dataclass(frozen=True)
class Diagnostics:
    """Per-mode link diagnostics, all (n_inter, n_inner) in DFT-index order."""

    signal_power: np.ndarray
    interference_power: np.ndarray
    noise_power: np.ndarray

    @property
    def sinr(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(self.signal_power > 0,
                           self.signal_power / self.noise_power, 0.0)
        return out

    @property
    def interference_to_signal(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.signal_power > 0,
                            self.interference_power / self.signal_power, np.inf)


@dataclass(frozen=True)
class EndToEndResult:
    detected: np.ndarray
    detected_idx: np.ndarray
    degenerate: np.ndarray
    symbol_errors: int
    diagnostics: Diagnostics


def noise_mode_scale(rx: Layout, n_inter: int) -> np.ndarray:
    """sigma^2_{p,l} / sigma^2: row power of the linear map taking the
    physical element noise vector to s~_p(l) through split, compensation,
    post-decoding, and the inner DFT."""
    v = rx.elems_per_cell
    counts = np.bincount(rx.slot_group.ravel(), minlength=rx.n_physical)
    wh = dft_matrix(v)
    out = np.zeros((n_inter, v))
    for p in range(n_inter):
        a = np.zeros((v, rx.n_physical), dtype=complex)
        for m in range(rx.n_cells):
            for vv in range(v):
                g = rx.slot_group[m, vv]
                # the split's 1/L_v and the post-decoding L_v cancel, leaving
                # only the coherent accumulation of each element's duplicates
                a[vv, g] += np.exp(-2j * np.pi * m * p / n_inter) / np.sqrt(n_inter) \
                    * (counts[rx.slot_group[0, vv]] / counts[g])
        b = wh @ a
        out[p] = np.sum(np.abs(b) ** 2, axis=1)
    return out


@dataclass(frozen=True)
class Link:
    """Everything derived from a scenario that the pipeline needs."""

    tx: Layout
    rx: Layout
    params: chan.PropagationParams
    sharing: SharingMatrix
    mode: chan.ModeChannel
    block_channel: chan.BlockChannel
    lambda_coeffs: np.ndarray
    constellation: Constellation
    power_alloc: np.ndarray
    sigma2: float
    noise_scale: np.ndarray
    seed: int = 0

    @property
    def n_inter(self) -> int:
        return self.tx.n_cells

    @property
    def n_inner(self) -> int:
        return self.tx.elems_per_cell

    @property
    def noise_power(self) -> np.ndarray:
        return self.sigma2 * self.noise_scale

    def amplitudes(self) -> np.ndarray:
        return np.sqrt(self.power_alloc)


def build_link(scenario, lambda_path: str | None = None) -> Link:
    """Assemble layouts, channel, detection coefficients, and noise figures
    for one scenario (see qfuca.config.Scenario)."""
    from .geometry import build_layout

    tx = build_layout(scenario.n_cells, scenario.tx_elems, scenario.tx_ratio,
                      scenario.qf_radius_m)
    rx = build_layout(scenario.n_cells, scenario.rx_elems, scenario.rx_ratio,
                      scenario.qf_radius_m)
    params = chan.PropagationParams.from_frequency(
        scenario.distance_m, scenario.freq_hz, scenario.beta)
    sharing = sharing_matrix(rx)
    mode = chan.detection_coeffs(tx, rx, params, sharing,
                                 j_order=scenario.bessel_order,
                                 correction=scenario.bessel_correction)
    path = lambda_path or scenario.lambda_path
    lam = mode.lambda_coeffs if path == "exact" else chan.bessel_lambda(mode)
    block_channel = chan.build_block_channel(tx, rx, params, sharing)
    grid = SymbolGrid.uniform(scenario.n_cells, scenario.tx_elems,
                              total_power=scenario.total_power)
    sigma2 = scenario.total_power * params.reference_gain ** 2 / scenario.snr_linear
    return Link(tx=tx, rx=rx, params=params, sharing=sharing, mode=mode,
                block_channel=block_channel, lambda_coeffs=lam,
                constellation=Constellation.from_name(scenario.constellation),
                power_alloc=grid.power_alloc, sigma2=sigma2,
                noise_scale=noise_mode_scale(rx, scenario.n_cells),
                seed=scenario.seed)


def end_to_end(grid: SymbolGrid, link: Link, noise: NoiseModel,
               frame: int = 0) -> EndToEndResult:
    """Full chain: modulate, propagate, split/compensate, inner demodulate,
    detect.  Symbol errors are counted over non-degenerate modes against the
    transmitted grid."""
    n, k = grid.n_inter, grid.n_inner
    feed = tom_modulate(grid, link.tx)
    received = propagate(feed, link.tx, link.rx, link.params, noise, frame)
    x_tilde = tod_split_compensate(received, link.rx)
    amplitudes = np.sqrt(grid.power_alloc)
    detected = np.zeros((n, k), dtype=complex)
    detected_idx = np.zeros((n, k), dtype=int)
    degenerate = np.zeros((n, k), dtype=bool)
    errors = 0
    for p in range(n):
        s_tilde = tod_inner_demodulate(x_tilde[p], link.sharing)
        det, idx, deg = ml_detect(s_tilde, link.lambda_coeffs[p],
                                  link.constellation, amplitudes[p])
        detected[p], detected_idx[p], degenerate[p] = det, idx, deg
        live = ~deg
        errors += int(np.sum(det[live] != grid.symbols[p][live]))

    gmats = link.mode.exact_matrices
    sig = np.abs(link.lambda_coeffs) ** 2 * grid.power_alloc
    interf = np.zeros((n, k))
    for p in range(n):
        coupling = np.abs(gmats[p]) ** 2 @ grid.power_alloc[p]
        interf[p] = coupling - np.abs(np.diag(gmats[p])) ** 2 * grid.power_alloc[p]
    diags = Diagnostics(signal_power=sig, interference_power=interf,
                        noise_power=link.noise_power)
    return EndToEndResult(detected=detected, detected_idx=detected_idx,
                          degenerate=degenerate, symbol_errors=errors,
                          diagnostics=diags)


@dataclass(frozen=True)
class LoopbackReport:
    frames: int
    symbol_errors: int
    symbols_counted: int
    degenerate_modes: int
    max_interference_to_signal: float
    per_frame_errors: list = field(default_factory=list)

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols_counted if self.symbols_counted else 0.0


def run_loopback(link: Link, n_frames: int, noise_variance: float = 0.0) -> LoopbackReport:
    """Transmit n_frames random constellation grids through the chain and
    count symbol errors; deterministic from the link seed."""
    n, k = link.n_inter, link.n_inner
    noise = NoiseModel(element_variance=noise_variance, seed=link.seed)
    sym_rng = np.random.default_rng(np.random.SeedSequence((link.seed, 0xA11CE)))
    amplitudes = link.amplitudes()
    total_err = 0
    counted = 0
    degenerate = 0
    per_frame = []
    max_isr = 0.0
    for frame in range(n_frames):
        idx = sym_rng.integers(0, link.constellation.points.size, size=(n, k))
        symbols = amplitudes * link.constellation.points[idx]
        grid = SymbolGrid(n_inter=n, n_inner=k, symbols=symbols,
                          power_alloc=link.power_alloc)
        result = end_to_end(grid, link, noise, frame)
        frame_err = result.symbol_errors
        total_err += frame_err
        counted += int(np.sum(~result.degenerate))
        degenerate += int(np.sum(result.degenerate))
        per_frame.append(frame_err)
        isr = result.diagnostics.interference_to_signal
        max_isr = max(max_isr, float(np.max(isr[np.isfinite(isr)], initial=0.0)))
    return LoopbackReport(frames=n_frames, symbol_errors=total_err,
                          symbols_counted=counted, degenerate_modes=degenerate,
                          max_interference_to_signal=max_isr,
                          per_frame_errors=per_frame)
