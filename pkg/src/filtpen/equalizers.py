"""Receiver models: unfiltered bound, ZFE (aggregate and per source), MMSE,
fractionally spaced MMSE and the finite-length MMSE equalizer.

Penalties ``k`` are multiplicative SNR losses relative to the unfiltered
bound ``SNR = Ē_x / sigma^2``. They depend on the normalized channel only,
so a common gain on the signal path leaves them unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import linkmodel, spectral
from .linkmodel import ChannelResponse, LinkSpec, PulsePhases
from .spectral import FoldedSpectrum, FrequencyGrid
from .trxmodel import lin_to_db

EQUALIZERS = ("bound", "zfe", "zfe_disagg", "mmse", "fse", "fle")
SOLVE_RESIDUAL = 1e-10


@dataclass(frozen=True)
class EqualizerResult:
    """One receiver model's outcome on a link.

    ``k_penalty`` is the SNR degradation relative to the unfiltered bound,
    ``bound / snr``. For the MMSE family this differs from the biased
    integral that enters ``snr = bound / k - 1``; that value is kept in
    ``extras["k_biased"]``.
    """

    equalizer: str
    snr: float
    k_penalty: float | None = None
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def snr_db(self) -> float:
        return float(lin_to_db(self.snr))

    @property
    def k_db(self) -> float | None:
        return None if self.k_penalty is None else float(lin_to_db(self.k_penalty))


def snr_unfiltered(e_x_bar: float, h_norm_sq: float, sigma_total_sq: float) -> float:
    """``Ē_x · ||h||^2 / sigma^2``: signal and noise over the same bandwidth."""
    if not sigma_total_sq > 0:
        raise ValueError("noise PSD must be positive for a finite SNR")
    return e_x_bar * h_norm_sq / sigma_total_sq


def bound_snr(link: LinkSpec) -> float:
    """Unfiltered SNR bound of ``link`` (unit-energy shaping, no filters)."""
    sigma = sum(s.sigma_sq for s in linkmodel.noise_sources(link))
    return snr_unfiltered(link.e_x_bar, 1.0, sigma)


def _period_mean(values: np.ndarray) -> float:
    # periodic samples on [-rs/2, rs/2): the rectangle rule is the closed trapezoid
    return float(np.mean(values))


def k_zfe(q_folded: FoldedSpectrum) -> float:
    """Zero-forcing noise enhancement; ``inf`` when the fold has zeros."""
    q = q_folded.values
    if np.any(q <= 0):
        return math.inf
    return _period_mean(1.0 / q)


def k_mmse(q_folded: FoldedSpectrum, snr: float) -> tuple[float, float]:
    """MMSE penalty and the unbiased output SNR."""
    if not snr > 0:
        raise ValueError("SNR must be positive")
    k = _period_mean(1.0 / (q_folded.values + 1.0 / snr))
    return k, snr / k - 1.0


def phase_power(phases: PulsePhases, n_freq: int = spectral.POINTS_PER_PERIOD):
    """``sum_i |H_i(e^{j 2 pi f T})|^2`` of the normalized pulse phases."""
    f, spec = phases.phase_spectra(n_freq)
    return f, np.sum(np.abs(spec) ** 2, axis=0)


def k_fse(phases: PulsePhases, snr: float, n_freq: int = spectral.POINTS_PER_PERIOD) -> tuple[float, float]:
    """Fractionally spaced MMSE penalty from ``phases.ell`` interleaved phases."""
    if not snr > 0:
        raise ValueError("SNR must be positive")
    ell = phases.ell
    _, power = phase_power(phases, n_freq)
    k = _period_mean(ell / (power + ell / snr))
    return k, snr / k - 1.0


def k_zfe_disaggregated(link: LinkSpec, grid: FrequencyGrid | None = None) -> list[float]:
    """Per-source ZF noise enhancement ``k_i`` for sources ``1..N+1``.

    ``k_i`` is the enhancement experienced by noise injected at point ``i``
    through the aggregate zero-forcing receiver, so that
    ``sum sigma_i^2 k_i / sum sigma_i^2`` equals :func:`k_zfe` of the link.
    """
    grid = grid or link.default_grid()
    ch = linkmodel.white_equiv_channel(link, grid)
    psd, _ = linkmodel.colored_noise_psd(link, grid)
    qf = ch.q_folded.values
    if np.any(qf <= 0):
        return [math.inf] * (link.n_filters + 1)
    q = np.asarray(ch.q_freq.values)
    s = np.asarray(psd.values)
    safe = np.where(s > 0, s, 1.0)
    out = []
    n_aliases = ch.q_folded.n_aliases
    for tail in linkmodel.source_coloring(link, grid):
        share = spectral.SampledSpectrum(grid, np.where(q > 0, q * tail / safe, 0.0), "magnitude_squared")
        g = spectral.fold_spectrum(share, link.rs, n_aliases, n_period=qf.size).values
        out.append(_period_mean(g / qf**2))
    return out


@dataclass(frozen=True, eq=False)
class FleProblem:
    """Finite-length MMSE problem on ``ell`` interleaved symbol-spaced phases.

    ``h[:, m]`` is the ``ell``-vector ``h_m`` (samples absorb ``sqrt(T)``),
    ``m = 0..nu``; the equalizer spans ``n_f`` symbols (``n_f · ell`` taps).
    """

    h: np.ndarray
    n_f: int
    e_x_bar: float = 1.0
    noise_psd: float = 1.0

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h))
        object.__setattr__(self, "h", h)
        if self.n_f < 1:
            raise ValueError("the equalizer needs at least one symbol of span")
        if not self.noise_psd > 0:
            raise ValueError("the noise autocorrelation must be positive definite (noise_psd > 0)")
        if not self.e_x_bar > 0:
            raise ValueError("symbol energy must be positive")

    @property
    def ell(self) -> int:
        return self.h.shape[0]

    @property
    def nu(self) -> int:
        return self.h.shape[1] - 1

    @property
    def default_delay(self) -> int:
        return (self.nu + self.n_f) // 2

    def channel_matrix(self) -> np.ndarray:
        """Block-Toeplitz ``(n_f·ell) x (n_f + nu)`` channel matrix."""
        ell, nu, n_f = self.ell, self.nu, self.n_f
        H = np.zeros((n_f * ell, n_f + nu), dtype=self.h.dtype)
        for r in range(n_f):
            H[r * ell : (r + 1) * ell, r : r + nu + 1] = self.h
        return H

    @classmethod
    def from_phases(
        cls, phases: PulsePhases, n_f: int, snr: float, energy: float | None = linkmodel.MEMORY_ENERGY
    ) -> "FleProblem":
        """Normalized problem with ``Ē_x / sigma^2 = snr``; the channel memory is
        truncated to the span holding ``energy`` of the pulse (None keeps all)."""
        if energy is not None:
            phases = phases.truncated(energy)
        return cls(phases.normalized(), n_f, 1.0, 1.0 / snr)


@dataclass(frozen=True, eq=False)
class FleResult:
    sigma_sq: float
    snr: float
    w: np.ndarray
    delay: int
    residual: float

    @property
    def snr_db(self) -> float:
        return float(lin_to_db(self.snr))


def fle_mmse(problem: FleProblem, delay: int | None = None) -> FleResult:
    """MMSE finite-length equalizer ``w = R_xY R_YY^{-1}``.

    With ``delay=None`` every decision delay in ``[0, n_f + nu - 1]`` is
    evaluated (one factorization serves all of them) and the best is kept.
    """
    H = problem.channel_matrix()
    ex = problem.e_x_bar
    n_rows, n_cols = H.shape
    Ryy = ex * (H @ H.conj().T) + problem.ell * problem.noise_psd * np.eye(n_rows)
    fac = cho_factor(Ryy, lower=True)
    if delay is None:
        X = cho_solve(fac, H)
        gain = np.real(np.einsum("ij,ij->j", H.conj(), X))
        sigma_all = ex - ex**2 * gain
        delay = int(np.argmin(sigma_all))
    elif not 0 <= delay < n_cols:
        raise ValueError(f"delay must lie in [0, {n_cols - 1}], got {delay}")
    ryx = ex * H[:, delay]
    wh = cho_solve(fac, ryx)
    residual = float(np.linalg.norm(Ryy @ wh - ryx) / np.linalg.norm(ryx))
    if residual > SOLVE_RESIDUAL:
        raise np.linalg.LinAlgError(f"equalizer solve residual {residual:.2e} exceeds {SOLVE_RESIDUAL:.0e}")
    w = wh.conj()
    sigma = float(np.real(ex - w @ ryx))
    return FleResult(sigma, ex / sigma - 1.0, w, delay, residual)


def _degradation(bound: float, snr: float) -> float:
    return bound / snr if snr > 0 else math.inf


def evaluate_link(
    link: LinkSpec,
    equalizers: Iterable[str] = ("bound", "zfe", "mmse", "fse"),
    *,
    ell: int = 2,
    n_f: int | None = None,
    grid: FrequencyGrid | None = None,
    window: int = linkmodel.DEFAULT_WINDOW,
) -> list[EqualizerResult]:
    """Run the requested receiver models on ``link``."""
    equalizers = list(equalizers)
    unknown = set(equalizers) - set(EQUALIZERS)
    if unknown:
        raise ValueError(f"unknown equalizer(s) {sorted(unknown)}")
    if "fle" in equalizers and n_f is None:
        raise ValueError("the finite-length equalizer needs an equalizer span n_f")
    grid = grid or link.default_grid()
    snr = bound_snr(link)
    ch = linkmodel.white_equiv_channel(link, grid)
    phases = None
    out = []
    for name in equalizers:
        if name == "bound":
            out.append(EqualizerResult("bound", snr, 1.0, {"h_norm_sq": ch.h_norm_sq}))
        elif name == "zfe":
            k = k_zfe(ch.q_folded)
            out.append(EqualizerResult("zfe", snr / k, k))
        elif name == "zfe_disagg":
            ks = k_zfe_disaggregated(link, grid)
            sources = linkmodel.noise_sources(link)
            for src, k in zip(sources, ks):
                snr_i = link.e_x_bar / src.sigma_sq if src.sigma_sq > 0 else math.inf
                out.append(
                    EqualizerResult(
                        f"zfe_disagg:{src.index}", snr_i / k, k, {"source": src.index, "snr_source": snr_i}
                    )
                )
        elif name == "mmse":
            k, s = k_mmse(ch.q_folded, snr)
            out.append(EqualizerResult("mmse", s, _degradation(snr, s), {"k_biased": k}))
        elif name in ("fse", "fle"):
            if phases is None:
                phases = linkmodel.pulse_phases(ch, ell, window)
            if name == "fse":
                k, s = k_fse(phases, snr)
                out.append(EqualizerResult("fse", s, _degradation(snr, s), {"ell": ell, "k_biased": k}))
            else:
                prob = FleProblem.from_phases(phases, n_f, snr)
                res = fle_mmse(prob)
                out.append(
                    EqualizerResult(
                        "fle", res.snr, None, {"ell": ell, "n_f": n_f, "nu": prob.nu, "delay": res.delay}
                    )
                )
    return out
