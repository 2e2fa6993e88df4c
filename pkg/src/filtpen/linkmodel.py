"""White-noise-equivalent channel of a filtered, ASE-noise-limited link.

A :class:`LinkSpec` is an ordered path ``noise group 1, filter 1, noise group
2, ..., filter N, receiver group``. The receiver group also carries the
transceiver noise. From it we derive per-source noise PSDs, the normalized
colored PSD seen at the receiver, the whitened channel ``H(f)`` with its
energy ``||h||^2``, the normalized autocorrelation spectrum ``Q(f)`` and its
symbol-rate fold.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.constants as const

from . import spectral
from .spectral import FoldedSpectrum, FrequencyGrid, SampledSpectrum
from .trxmodel import DP16QAM, ModulationConstants, TrxModel, snr_trx

DEFAULT_WINDOW = 64
TAIL_TOLERANCE = 1e-6
MEMORY_ENERGY = 1.0 - 1e-6


class DegenerateLinkError(ValueError):
    """The link cannot be whitened or carries no noise at all."""


class WindowTooSmallError(ValueError):
    """The time window drops more pulse energy than tolerated."""


@dataclass(frozen=True)
class AmplifierSpec:
    """Optical amplifier with linear power gain and noise figure."""

    gain: float
    noise_figure: float

    def __post_init__(self):
        if self.gain < 1:
            raise ValueError(f"amplifier gain must be >= 1 (linear), got {self.gain}")
        if self.noise_figure < 1:
            raise ValueError(f"noise figure must be >= 1 (linear), got {self.noise_figure}")

    @classmethod
    def from_db(cls, gain_db: float, nf_db: float) -> "AmplifierSpec":
        return cls(10 ** (gain_db / 10), 10 ** (nf_db / 10))


@dataclass(frozen=True)
class ErfFilter:
    b_ch: float
    bw_otf: float

    def magnitude(self, f) -> np.ndarray:
        return spectral.erf_filter_magnitude(f, self.bw_otf, self.b_ch)

    def with_bandwidth(self, b_ch: float) -> "ErfFilter":
        return ErfFilter(b_ch, self.bw_otf)


@dataclass(frozen=True)
class RectFilter:
    bandwidth: float

    def magnitude(self, f) -> np.ndarray:
        return spectral.rect_filter_magnitude(f, self.bandwidth)

    def with_bandwidth(self, b_ch: float) -> "RectFilter":
        return RectFilter(b_ch)


@dataclass(frozen=True)
class AllPassFilter:
    def magnitude(self, f) -> np.ndarray:
        return np.ones_like(np.asarray(f, dtype=float))

    def with_bandwidth(self, b_ch: float) -> "AllPassFilter":
        return self


@dataclass(frozen=True, eq=False)
class TabulatedFilter:
    """Measured shape: attenuation (dB) vs. frequency offset (Hz), linearly
    interpolated; the edge values are held outside the table."""

    f_offset: np.ndarray
    attenuation_db: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f_offset, dtype=float)
        a = np.asarray(self.attenuation_db, dtype=float)
        if f.shape != a.shape or f.size < 2:
            raise ValueError("tabulated filter needs >= 2 (frequency, attenuation) pairs")
        if np.any(np.diff(f) <= 0):
            raise ValueError("tabulated filter frequencies must be strictly increasing")
        object.__setattr__(self, "f_offset", f)
        object.__setattr__(self, "attenuation_db", a)

    def magnitude(self, f) -> np.ndarray:
        # referenced to the table's passband so the result is grid-independent
        att = np.interp(np.asarray(f, dtype=float), self.f_offset, self.attenuation_db)
        return 10.0 ** (-(att - self.attenuation_db.min()) / 20.0)

    def with_bandwidth(self, b_ch: float):
        raise ValueError("a tabulated filter has no adjustable bandwidth")


@dataclass(frozen=True)
class NoiseSource:
    """Injection point ``index`` (1-based) with per-dimension PSD ``sigma_sq``.

    The source traverses filters ``index..N`` (1-based), i.e. none for the
    receiver-side source ``N + 1``.
    """

    index: int
    sigma_sq: float

    def __post_init__(self):
        if self.sigma_sq < 0:
            raise ValueError("noise PSD must be nonnegative")


@dataclass(frozen=True)
class LinkSpec:
    """Declarative optical path.

    ``noise_groups[i]`` holds the amplifiers between filter ``i - 1`` and
    filter ``i`` (the first group sits before the first filter);
    ``rx_amplifiers`` follow the last filter. Powers are in W, frequencies
    in Hz. Amplifiers are assumed to restore losses, so ``p_rx == p_tx``.
    """

    rs: float
    rolloff: float
    f0: float
    p_tx: float
    filters: tuple = ()
    noise_groups: tuple = ()
    rx_amplifiers: tuple = ()
    trx: TrxModel | None = None
    modulation: ModulationConstants = DP16QAM
    ase_scale: float = 1.0
    span_loss_db: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(self.filters))
        object.__setattr__(self, "noise_groups", tuple(tuple(g) for g in self.noise_groups))
        object.__setattr__(self, "rx_amplifiers", tuple(self.rx_amplifiers))
        if not self.rs > 0:
            raise ValueError("symbol rate must be positive")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError(f"rolloff must lie in [0, 1], got {self.rolloff}")
        if not self.f0 > 0:
            raise ValueError("central frequency must be positive")
        if not self.p_tx > 0:
            raise ValueError("launch power must be positive")
        if not self.ase_scale >= 0:
            raise ValueError("ASE scale must be nonnegative")
        if len(self.noise_groups) != len(self.filters):
            raise ValueError(
                f"{len(self.filters)} filters need {len(self.filters)} noise groups "
                f"before them, got {len(self.noise_groups)}"
            )

    @property
    def n_filters(self) -> int:
        return len(self.filters)

    @property
    def p_rx(self) -> float:
        return self.p_tx

    @property
    def e_x_bar(self) -> float:
        """Per-dimension symbol energy, ``P / (4 Rs)``."""
        return self.p_rx / (4.0 * self.rs)

    def replace(self, **changes) -> "LinkSpec":
        from dataclasses import replace

        return replace(self, **changes)

    def with_filter_bandwidth(self, b_ch: float) -> "LinkSpec":
        return self.replace(filters=tuple(f.with_bandwidth(b_ch) for f in self.filters))

    def all_pass(self) -> "LinkSpec":
        return self.replace(filters=tuple(AllPassFilter() for _ in self.filters))

    def default_grid(self, n_aliases: int = spectral.DEFAULT_ALIASES) -> FrequencyGrid:
        return FrequencyGrid.for_symbol_rate(self.rs, n_aliases)


def ase_sigma_sq(group: Sequence[AmplifierSpec], f0: float) -> float:
    """Per-dimension ASE PSD (W/Hz) of a chain of amplifiers."""
    if not f0 > 0:
        raise ValueError("central frequency must be positive")
    return 0.25 * sum(const.h * f0 * (a.gain - 1.0) * a.noise_figure for a in group)


def sigma_trx_sq(link: LinkSpec) -> float:
    if link.trx is None:
        return 0.0
    return link.e_x_bar / snr_trx(link.p_rx, link.trx)


def noise_sources(link: LinkSpec) -> list[NoiseSource]:
    """One source per filter gap plus the receiver source (ASE + transceiver)."""
    k = link.ase_scale
    out = [NoiseSource(i + 1, k * ase_sigma_sq(g, link.f0)) for i, g in enumerate(link.noise_groups)]
    rx = k * ase_sigma_sq(link.rx_amplifiers, link.f0) + sigma_trx_sq(link)
    out.append(NoiseSource(link.n_filters + 1, rx))
    return out


def snr_ase(link: LinkSpec) -> float:
    """Received SNR from ASE alone, noise measured over a bandwidth ``Rs``."""
    total = sum(ase_sigma_sq(g, link.f0) for g in link.noise_groups)
    total += ase_sigma_sq(link.rx_amplifiers, link.f0)
    total *= link.ase_scale
    if total <= 0:
        return np.inf
    return link.p_rx / (4.0 * total * link.rs)


def filter_stages(link: LinkSpec, grid: FrequencyGrid) -> list[SampledSpectrum]:
    return [SampledSpectrum(grid, f.magnitude(grid.freqs), "magnitude") for f in link.filters]


def _tail_products(stages: Sequence[SampledSpectrum], grid: FrequencyGrid) -> list[np.ndarray]:
    """``prod_{n >= i} |H_n|^2`` for i = 1 .. N+1 (the last one is all-pass)."""
    tails = [np.ones(grid.n_points)]
    for s in reversed(stages):
        tails.append(tails[-1] * spectral.magnitude_squared(s))
    return tails[::-1]


def colored_noise_psd(
    link: LinkSpec, grid: FrequencyGrid
) -> tuple[SampledSpectrum, float]:
    """Normalized receiver-side noise PSD and its normalization ``sum sigma_i^2``."""
    sources = noise_sources(link)
    total = sum(s.sigma_sq for s in sources)
    if not total > 0:
        raise DegenerateLinkError("the link carries no noise; SNR is undefined")
    tails = _tail_products(filter_stages(link, grid), grid)
    psd = sum(s.sigma_sq * t for s, t in zip(sources, tails)) / total
    return SampledSpectrum(grid, psd, "psd"), total


def source_coloring(link: LinkSpec, grid: FrequencyGrid) -> list[np.ndarray]:
    """Per-source coloring ``prod_{n >= i} |H_n|^2`` on ``grid``."""
    return _tail_products(filter_stages(link, grid), grid)


@dataclass(frozen=True, eq=False)
class ChannelResponse:
    """Whitened channel: ``H(f)``, ``||h||^2``, ``Q(f)`` and its fold."""

    rs: float
    h_freq: SampledSpectrum
    h_norm_sq: float
    q_freq: SampledSpectrum
    q_folded: FoldedSpectrum

    @property
    def grid(self) -> FrequencyGrid:
        return self.h_freq.grid

    def impulse_response(self, t) -> np.ndarray:
        """``h(t)`` by trapezoidal inverse Fourier transform of ``H(f)``."""
        return _inverse_ft(self.h_freq, t)

    def q_samples(self, n: int) -> np.ndarray:
        """Symbol-spaced autocorrelation samples ``q_k`` for ``k = -n..n``."""
        k = np.arange(-n, n + 1)
        return _inverse_ft(self.q_freq, k / self.rs)

    def pulse_phases(self, ell: int, window: int = DEFAULT_WINDOW, tail_tol: float = TAIL_TOLERANCE):
        return pulse_phases(self, ell, window, tail_tol)


def _inverse_ft(s: SampledSpectrum, t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    f = s.grid.freqs
    v = np.asarray(s.values)
    nz = np.flatnonzero(v)
    if nz.size == 0:
        return np.zeros(t.shape, dtype=complex)
    lo, hi = max(nz[0] - 1, 0), min(nz[-1] + 2, f.size)
    f, v = f[lo:hi], v[lo:hi]
    w = np.full(f.size, s.grid.df)
    w[0] = w[-1] = s.grid.df / 2
    out = np.empty(t.shape, dtype=complex)
    # chunk over t to bound the temporary matrix
    for start in range(0, t.size, 256):
        tt = t[start : start + 256]
        out[start : start + 256] = np.exp(2j * np.pi * np.outer(tt, f)) @ (w * v)
    return out


def channel_from_spectra(
    signal_mag: SampledSpectrum,
    noise_psd: SampledSpectrum,
    rs: float,
    n_aliases: int = spectral.DEFAULT_ALIASES,
) -> ChannelResponse:
    """Whiten ``signal_mag`` (shaping times filter magnitudes) against a
    normalized noise PSD and derive ``||h||^2``, ``Q`` and its fold."""
    if signal_mag.grid != noise_psd.grid:
        raise spectral.GridError("signal and noise spectra live on different grids")
    num = np.abs(np.asarray(signal_mag.values))
    s = np.asarray(noise_psd.values, dtype=float)
    live = num > 0
    if np.any(live & ~(s > 0)):
        raise DegenerateLinkError(
            "noise PSD vanishes where the signal does not; the whitening filter is not invertible"
        )
    h = np.zeros_like(num)
    h[live] = num[live] / np.sqrt(s[live])
    grid = signal_mag.grid
    h_spec = SampledSpectrum(grid, h, "complex_response")
    h2 = h**2
    norm_sq = spectral.integrate_band(SampledSpectrum(grid, h2, "magnitude_squared"), grid.f_min, grid.f_max)
    if not norm_sq > 0:
        raise DegenerateLinkError("the channel passes no signal energy")
    q = SampledSpectrum(grid, h2 / norm_sq, "magnitude_squared")
    folded = spectral.fold_spectrum(q, rs, n_aliases)
    return ChannelResponse(rs, h_spec, norm_sq, q, folded)


def signal_magnitude(link: LinkSpec, grid: FrequencyGrid) -> SampledSpectrum:
    """``|Phi(f)| · prod |H_i(f)|`` on ``grid``."""
    mag = spectral.srrc_magnitude(grid.freqs, link.rolloff, link.rs)
    for f in link.filters:
        mag = mag * f.magnitude(grid.freqs)
    return SampledSpectrum(grid, mag, "magnitude")


def white_equiv_channel(
    link: LinkSpec, grid: FrequencyGrid | None = None, n_aliases: int = spectral.DEFAULT_ALIASES
) -> ChannelResponse:
    grid = grid or link.default_grid(n_aliases)
    psd, _ = colored_noise_psd(link, grid)
    return channel_from_spectra(signal_magnitude(link, grid), psd, link.rs, n_aliases)


@dataclass(frozen=True, eq=False)
class PulsePhases:
    """Symbol-spaced phases of ``h(t)``.

    ``samples[i, k] = h((k - center) T - i T / ell)``, i.e. ``ell`` interleaved
    sequences at the symbol rate. ``h_norm_sq`` is the continuous-time
    energy of the pulse the samples came from.
    """

    samples: np.ndarray
    ell: int
    rs: float
    h_norm_sq: float
    center: int

    @property
    def n_symbols(self) -> int:
        return self.samples.shape[1]

    @property
    def sampled_energy(self) -> float:
        """Riemann estimate ``sum |h|^2 · T / ell`` of the pulse energy."""
        return float(np.sum(np.abs(self.samples) ** 2) / (self.ell * self.rs))

    def normalized(self) -> np.ndarray:
        """Samples of ``sqrt(T) · h(t) / ||h||`` (total squared sum ``≈ ell``)."""
        return self.samples / np.sqrt(self.rs * self.h_norm_sq)

    def phase_spectra(self, n_freq: int = spectral.POINTS_PER_PERIOD) -> tuple[np.ndarray, np.ndarray]:
        """DTFT of each normalized phase on ``n_freq`` points of one period.

        Returns ``(f, H)`` with ``f`` on ``[-rs/2, rs/2)`` and ``H`` of shape
        ``(ell, n_freq)``.
        """
        x = self.normalized()
        n = max(n_freq, x.shape[1])
        if n % 2:
            n += 1
        f = self.rs * (np.arange(n) - n // 2) / n
        spec = np.fft.fftshift(np.fft.fft(x, n=n, axis=1), axes=1)
        return f, spec * np.exp(2j * np.pi * f * self.center / self.rs)[None, :]

    def truncated(self, energy: float = MEMORY_ENERGY) -> "PulsePhases":
        """Smallest symmetric span around ``center`` holding ``energy`` of the
        sampled pulse energy."""
        e = np.sum(np.abs(self.samples) ** 2, axis=0)
        total = e.sum()
        c = self.center
        for half in range(0, self.n_symbols):
            lo, hi = max(c - half, 0), min(c + half + 1, self.n_symbols)
            if e[lo:hi].sum() >= energy * total:
                break
        return PulsePhases(self.samples[:, lo:hi].copy(), self.ell, self.rs, self.h_norm_sq, c - lo)

    @property
    def memory(self) -> int:
        """Channel memory ``nu`` in symbols."""
        return self.n_symbols - 1


def pulse_phases(
    ch: ChannelResponse,
    ell: int,
    window: int = DEFAULT_WINDOW,
    tail_tol: float = TAIL_TOLERANCE,
) -> PulsePhases:
    """Sample ``h(t)`` at ``t = k T - i T / ell`` for ``|k| <= window``."""
    if int(ell) != ell or ell < 1:
        raise ValueError(f"oversampling factor must be a positive integer, got {ell}")
    ell = int(ell)
    T = 1.0 / ch.rs
    k = np.arange(-window, window + 1)
    i = np.arange(ell)
    t = (k[None, :] * T - i[:, None] * T / ell).ravel()
    h = ch.impulse_response(t).reshape(ell, k.size)
    if np.allclose(h.imag, 0.0, atol=1e-14 * np.abs(h).max()):
        h = h.real.copy()
    out = PulsePhases(h, ell, ch.rs, ch.h_norm_sq, window)
    tail = 1.0 - out.sampled_energy / ch.h_norm_sq
    if tail > tail_tol:
        raise WindowTooSmallError(
            f"a ±{window}-symbol window misses {tail:.2e} of the pulse energy "
            f"(tolerance {tail_tol:.0e}); enlarge the window"
        )
    return out
