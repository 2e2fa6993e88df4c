"""Frequency-grid numerics: filter shapes, spectrum products, folding and
band integration.

All spectra live on a uniform :class:`FrequencyGrid`. Everything here is a
pure function of immutable inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erf

KINDS = ("magnitude", "magnitude_squared", "psd", "complex_response")

# default number of grid steps per symbol-rate period; keeps fold points on nodes
POINTS_PER_PERIOD = 2048
DEFAULT_ALIASES = 4


class GridError(ValueError):
    """Raised when spectra are not on compatible grids or a range is off-grid."""


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform frequency grid ``f_min .. f_max`` with ``n_points`` nodes (Hz)."""

    f_min: float
    f_max: float
    n_points: int

    def __post_init__(self):
        if not self.f_min < self.f_max:
            raise GridError(f"f_min ({self.f_min}) must be below f_max ({self.f_max})")
        if self.n_points < 2:
            raise GridError("a grid needs at least two points")

    @property
    def df(self) -> float:
        return (self.f_max - self.f_min) / (self.n_points - 1)

    @property
    def freqs(self) -> np.ndarray:
        return np.linspace(self.f_min, self.f_max, self.n_points)

    @classmethod
    def for_symbol_rate(
        cls,
        rs: float,
        n_aliases: int = DEFAULT_ALIASES,
        points_per_period: int = POINTS_PER_PERIOD,
    ) -> "FrequencyGrid":
        """Symmetric grid spanning ``±(n_aliases + 1/2)·rs``.

        The node count is odd (f = 0 is a node) and ``rs`` is an integer
        number of steps, so every periodic shift ``f + n·rs`` lands on a node.
        """
        half = (n_aliases + 0.5) * rs
        n = points_per_period * (2 * n_aliases + 1) + 1
        return cls(-half, half, n)

    def refined(self, factor: int = 2) -> "FrequencyGrid":
        return FrequencyGrid(self.f_min, self.f_max, factor * (self.n_points - 1) + 1)


@dataclass(frozen=True, eq=False)
class SampledSpectrum:
    """Samples of a function of frequency on ``grid``."""

    grid: FrequencyGrid
    values: np.ndarray
    kind: str = "magnitude"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        values = np.asarray(self.values)
        if values.shape != (self.grid.n_points,):
            raise GridError(
                f"{values.shape[0] if values.ndim else 0} values for a "
                f"{self.grid.n_points}-point grid"
            )
        if self.kind in ("psd", "magnitude_squared"):
            if np.iscomplexobj(values) or np.any(values < 0):
                raise ValueError(f"{self.kind} spectra must be real and nonnegative")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def freqs(self) -> np.ndarray:
        return self.grid.freqs

    def __call__(self, f) -> np.ndarray:
        """Linear interpolation of the samples (zero outside the grid)."""
        return np.interp(f, self.freqs, np.real(self.values), left=0.0, right=0.0)


@dataclass(frozen=True, eq=False)
class FoldedSpectrum:
    """Symbol-rate periodic spectrum sampled on ``[-rs/2, rs/2)``."""

    rs: float
    freqs: np.ndarray
    values: np.ndarray
    n_aliases: int = DEFAULT_ALIASES
    kind: str = field(default="folded")

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float).copy()
        values = np.asarray(self.values, dtype=float).copy()
        if freqs.shape != values.shape:
            raise GridError("folded frequencies and values differ in length")
        freqs.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "values", values)

    def mean(self) -> float:
        """Average over one period (rectangle rule on the periodic samples)."""
        return float(np.mean(self.values))


def _check_positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")


def erf_filter_magnitude(f, bw_otf: float, b_ch: float, center: float = 0.0) -> np.ndarray:
    """Unit-peak amplitude response of the erf (Gaussian-smoothed box) filter.

    ``b_ch`` is the nominal channel bandwidth and ``bw_otf`` the FWHM of the
    Gaussian optical transfer function that smooths the box edges.
    """
    _check_positive(bw_otf=bw_otf, b_ch=b_ch)
    sigma = bw_otf / (2.0 * np.sqrt(2.0 * np.log(2.0)))
    f = np.asarray(f, dtype=float) - center
    scale = sigma * np.sqrt(2.0)
    shape = 0.5 * (erf((b_ch / 2 - f) / scale) - erf((-b_ch / 2 - f) / scale))
    return shape / erf(b_ch / (2.0 * scale))


def erf_filter_response(bw_otf: float, b_ch: float, grid: FrequencyGrid) -> SampledSpectrum:
    return SampledSpectrum(grid, erf_filter_magnitude(grid.freqs, bw_otf, b_ch), "magnitude")


def rect_filter_magnitude(f, bandwidth: float) -> np.ndarray:
    """Ideal brick-wall passband ``|f| < bandwidth/2``.

    A node exactly on the edge gets half power, which keeps the trapezoid
    rule exact for the step.
    """
    _check_positive(bandwidth=bandwidth)
    a = np.abs(np.asarray(f, dtype=float))
    edge = bandwidth / 2
    return np.where(a < edge, 1.0, np.where(a == edge, np.sqrt(0.5), 0.0))


def raised_cosine(f, rolloff: float, rs: float) -> np.ndarray:
    """Raised-cosine spectrum with peak ``1/rs`` (unit area)."""
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError(f"rolloff must lie in [0, 1], got {rolloff}")
    _check_positive(rs=rs)
    T = 1.0 / rs
    a = np.abs(np.asarray(f, dtype=float))
    f1 = (1.0 - rolloff) / (2 * T)
    f2 = (1.0 + rolloff) / (2 * T)
    out = np.zeros_like(a)
    if rolloff == 0.0:
        out[a < f1] = T
        out[a == f1] = T / 2
        return out
    out[a <= f1] = T
    band = (a > f1) & (a < f2)
    out[band] = 0.5 * T * (1.0 + np.cos(np.pi * T / rolloff * (a[band] - f1)))
    return out


def srrc_magnitude(f, rolloff: float, rs: float) -> np.ndarray:
    """Square-root raised-cosine amplitude, unit-energy normalized."""
    return np.sqrt(raised_cosine(f, rolloff, rs))


def srrc_spectrum(rolloff: float, rs: float, grid: FrequencyGrid) -> SampledSpectrum:
    return SampledSpectrum(grid, srrc_magnitude(grid.freqs, rolloff, rs), "magnitude")


def magnitude_squared(s: SampledSpectrum) -> np.ndarray:
    if s.kind in ("magnitude_squared", "psd"):
        return np.asarray(s.values, dtype=float)
    return np.abs(s.values) ** 2


def cascade_magnitude_sq(
    stages: Sequence[SampledSpectrum], grid: FrequencyGrid | None = None
) -> SampledSpectrum:
    """Pointwise product of ``|H_n(f)|^2`` over ``stages``.

    An empty cascade is all-pass and needs ``grid`` to know its support.
    """
    if not stages:
        if grid is None:
            raise GridError("an empty cascade needs an explicit grid")
        return SampledSpectrum(grid, np.ones(grid.n_points), "magnitude_squared")
    g = stages[0].grid
    if grid is not None and grid != g:
        raise GridError("stages are not on the requested grid")
    out = np.ones(g.n_points)
    for s in stages:
        if s.grid != g:
            raise GridError("cascade stages live on different grids")
        out = out * magnitude_squared(s)
    return SampledSpectrum(g, out, "magnitude_squared")


def fold_spectrum(
    q: SampledSpectrum,
    rs: float,
    n_aliases: int = DEFAULT_ALIASES,
    n_period: int | None = None,
    zero_extend: bool = False,
) -> FoldedSpectrum:
    """Fold ``q`` into one symbol-rate period: ``rs · sum_n q(f + n·rs)``.

    The period ``[-rs/2, rs/2)`` is sampled at ``n_period`` points (default:
    the grid resolution). Shifted copies that leave the grid raise
    :class:`GridError` unless ``zero_extend`` is set.
    """
    _check_positive(rs=rs)
    if q.kind == "complex_response" or np.iscomplexobj(q.values):
        raise ValueError("only real spectra can be folded")
    vals = np.asarray(q.values, dtype=float)
    if np.any(vals < 0):
        raise ValueError("folding expects a nonnegative spectrum")
    g = q.grid
    if n_period is None:
        n_period = max(int(round(rs / g.df)), 2)
    f = -rs / 2 + rs * np.arange(n_period) / n_period
    freqs = g.freqs
    tol = 1e-9 * g.df
    total = np.zeros(n_period)
    for n in range(-n_aliases, n_aliases + 1):
        fn = f + n * rs
        if not zero_extend and (fn[0] < g.f_min - tol or fn[-1] > g.f_max + tol):
            raise GridError(
                f"alias {n:+d} spans [{fn[0]:.6g}, {fn[-1]:.6g}] Hz, outside the grid; "
                "widen the grid or pass zero_extend=True"
            )
        total += np.interp(fn, freqs, vals, left=0.0, right=0.0)
    return FoldedSpectrum(rs, f, rs * total, n_aliases)


def integrate_band(s: SampledSpectrum | FoldedSpectrum, f_lo: float, f_hi: float) -> float:
    """Composite trapezoid integral of ``s`` over ``[f_lo, f_hi]``.

    Endpoints between nodes are linearly interpolated. A folded spectrum is
    treated as periodic, so its support is the closed period ``[-rs/2, rs/2]``.
    """
    if f_hi < f_lo:
        raise GridError("f_hi must not be below f_lo")
    if isinstance(s, FoldedSpectrum):
        freqs = np.append(s.freqs, s.rs / 2)
        vals = np.append(s.values, s.values[0])
    else:
        freqs = s.freqs
        vals = np.asarray(s.values)
    tol = 1e-9 * (freqs[-1] - freqs[0])
    if f_lo < freqs[0] - tol or f_hi > freqs[-1] + tol:
        raise GridError(f"[{f_lo}, {f_hi}] is outside the support [{freqs[0]}, {freqs[-1]}]")
    f_lo = max(f_lo, freqs[0])
    f_hi = min(f_hi, freqs[-1])
    inner = (freqs > f_lo) & (freqs < f_hi)
    x = np.concatenate(([f_lo], freqs[inner], [f_hi]))
    y = np.concatenate(([_interp(f_lo, freqs, vals)], vals[inner], [_interp(f_hi, freqs, vals)]))
    out = np.trapezoid(y, x)
    return complex(out) if np.iscomplexobj(out) else float(out)


def _interp(f, freqs, vals):
    if np.iscomplexobj(vals):
        return np.interp(f, freqs, vals.real) + 1j * np.interp(f, freqs, vals.imag)
    return np.interp(f, freqs, vals)
