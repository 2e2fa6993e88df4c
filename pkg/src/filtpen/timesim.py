"""Time-domain Monte Carlo reference: QAM symbols through SRRC shaping, the
filter cascade with distributed AWGN injection, and an LMS-adapted
fractionally spaced FIR equalizer at the receiver.

Time is normalized to the symbol period (T = 1) and the symbol alphabet to
unit average energy; noise PSDs are rescaled by the same factor, so every
SNR is preserved.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import linkmodel, spectral
from .linkmodel import LinkSpec
from .trxmodel import DP16QAM, ModulationConstants

logger = logging.getLogger(__name__)

SNR_CAP_DB = 60.0
DIVERGENCE_RATIO = 1e3


class AlignmentError(RuntimeError):
    """No delay gives a usable correlation between output and reference."""


def qam_constellation(mc: ModulationConstants = DP16QAM) -> tuple[np.ndarray, np.ndarray]:
    """Unit-energy square QAM points and their Gray bit labels.

    ``bits_per_symbol`` in ``mc`` counts bits per polarization.
    """
    m = mc.bits_per_symbol
    if m % 2:
        raise ValueError("only square QAM alphabets are supported")
    side = 2 ** (m // 2)
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    gray = np.arange(side) ^ (np.arange(side) >> 1)
    pts, labels = [], []
    for i in range(side):
        for q in range(side):
            pts.append(levels[i] + 1j * levels[q])
            labels.append((gray[i] << (m // 2)) | gray[q])
    pts = np.array(pts)
    pts /= np.sqrt(np.mean(np.abs(pts) ** 2))
    bits = ((np.array(labels)[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.uint8)
    return pts, bits


@dataclass(frozen=True)
class SimConfig:
    n_symbols: int = 100_000
    sps: int = 2
    taps: int = 32
    mu: float = 1e-3
    train_fraction: float = 0.5
    seed: int = 0
    modulation: ModulationConstants = DP16QAM
    dd_mu_factor: float = 0.1
    whiten: bool = False

    def __post_init__(self):
        if self.n_symbols < 1000:
            raise ValueError("use at least 1000 symbols")
        if self.sps < 1 or int(self.sps) != self.sps:
            raise ValueError("samples per symbol must be a positive integer")
        if self.taps < 1:
            raise ValueError("the equalizer needs at least one tap")
        if not 0 < self.mu < 1:
            raise ValueError("LMS step must lie in (0, 1)")
        if not 0 < self.train_fraction <= 1:
            raise ValueError("training fraction must lie in (0, 1]")
        if self.dd_mu_factor < 0:
            raise ValueError("decision-directed step factor must be nonnegative")

    @property
    def n_train(self) -> int:
        return int(round(self.train_fraction * self.n_symbols))


@dataclass(frozen=True, eq=False)
class SimResult:
    snr_db: float
    ber: float
    converged: bool
    taps: np.ndarray
    delay: int = 0
    diverged: bool = False
    seed: int = 0
    extras: dict = field(default_factory=dict)


@njit(cache=True)
def _lms_kernel(y, ref, points, taps, sps, n_train, mu_train, mu_dd):
    n_sym = ref.shape[0]
    n_samp = y.shape[0]
    w = np.zeros(taps, dtype=np.complex128)
    w0 = 1.0  # divergence reference: norm of a unit delta
    z = np.zeros(n_sym, dtype=np.complex128)
    err = np.zeros(n_sym)
    u = np.zeros(taps, dtype=np.complex128)
    half = taps // 2
    diverged = False
    mid = n_train // 2
    for k in range(n_sym):
        base = k * sps - half
        for j in range(taps):
            u[j] = y[(base + j) % n_samp]
        acc = 0.0 + 0.0j
        for j in range(taps):
            acc += w[j] * u[j]
        z[k] = acc
        if k < n_train:
            d = ref[k]
            mu = mu_train if k < mid else 0.5 * mu_train
        else:
            best = 0
            bd = 1e300
            for p in range(points.shape[0]):
                dist = abs(acc - points[p])
                if dist < bd:
                    bd = dist
                    best = p
            d = points[best]
            mu = mu_dd
        e = d - acc
        err[k] = e.real * e.real + e.imag * e.imag
        if diverged or mu == 0.0:
            continue
        for j in range(taps):
            w[j] += mu * e * np.conj(u[j])
        nrm = 0.0
        for j in range(taps):
            nrm += w[j].real * w[j].real + w[j].imag * w[j].imag
        if nrm > (DIVERGENCE_RATIO * w0) ** 2 or not np.isfinite(nrm):
            diverged = True
    return z, w, err, diverged


@dataclass(frozen=True, eq=False)
class LmsOutput:
    symbols: np.ndarray
    taps: np.ndarray
    diverged: bool
    converged: bool
    sq_error: np.ndarray


def lms_equalize(rx: np.ndarray, reference: np.ndarray, sim: SimConfig) -> LmsOutput:
    """Adapt a ``sim.taps``-long FIR on ``rx`` (``sim.sps`` samples/symbol).

    The first ``sim.n_train`` symbols of ``reference`` train the filter (the
    step is halved halfway through); afterwards the taps track decisions on
    the modulation alphabet with step ``dd_mu_factor · mu``. Output ``k`` is
    centered on sample ``k · sps``.
    """
    rx = np.ascontiguousarray(rx, dtype=np.complex128)
    reference = np.ascontiguousarray(reference, dtype=np.complex128)
    if rx.size < reference.size * sim.sps:
        raise ValueError("fewer samples than symbols times sps")
    n_train = min(sim.n_train, reference.size)
    if n_train < 10 * sim.taps:
        raise ValueError(f"training length {n_train} is below 10x the tap count {sim.taps}")
    points, _ = qam_constellation(sim.modulation)
    z, w, err, diverged = _lms_kernel(
        rx, reference, points.astype(np.complex128), sim.taps, sim.sps, n_train, sim.mu, sim.mu * sim.dd_mu_factor
    )
    chunk = max(n_train // 10, 1)
    # taps start at zero, so the initial MSE is the reference power
    mse_start = float(np.mean(np.abs(reference[:n_train]) ** 2))
    mse_end = float(np.mean(err[n_train - chunk : n_train]))
    converged = (not diverged) and (mse_end <= 0.5 * mse_start or mse_end < 1e-3)
    if diverged:
        logger.warning("LMS diverged (tap norm grew beyond %gx its start)", DIVERGENCE_RATIO)
    elif not converged:
        logger.warning("LMS training MSE fell by less than 3 dB")
    return LmsOutput(z, w, bool(diverged), bool(converged), err)


def estimate_snr(
    output: np.ndarray, transmitted: np.ndarray, max_delay: int = 16
) -> tuple[float, int]:
    """Unbiased SNR (dB) of ``output`` against ``transmitted`` and the delay.

    The delay in ``[-max_delay, max_delay]`` maximizing the normalized
    correlation is used; the output is then regressed on the reference and
    SNR = gain² · E|x|² / residual power, capped at 60 dB.
    """
    z = np.asarray(output, dtype=complex)
    x = np.asarray(transmitted, dtype=complex)
    n = min(z.size, x.size) - 2 * max_delay
    if n < 10:
        raise ValueError("sequences too short for the delay search")
    zc = z[max_delay : max_delay + n]
    best, best_d = -1.0, 0
    for d in range(-max_delay, max_delay + 1):
        xs = x[max_delay - d : max_delay - d + n]
        rho = abs(np.vdot(xs, zc)) / math.sqrt(np.vdot(xs, xs).real * np.vdot(zc, zc).real)
        if rho > best:
            best, best_d = rho, d
    if best < 0.5:
        raise AlignmentError(f"peak normalized correlation {best:.3f} is below 0.5")
    xs = x[max_delay - best_d : max_delay - best_d + n]
    gain = np.vdot(xs, zc) / np.vdot(xs, xs)
    resid = zc - gain * xs
    p_sig = abs(gain) ** 2 * np.mean(np.abs(xs) ** 2)
    p_err = np.mean(np.abs(resid) ** 2)
    if p_err <= p_sig * 10 ** (-SNR_CAP_DB / 10):
        return SNR_CAP_DB, best_d
    return float(10 * np.log10(p_sig / p_err)), best_d


def count_ber(output: np.ndarray, transmitted_idx: np.ndarray, gain: complex, mc: ModulationConstants) -> float:
    points, bits = qam_constellation(mc)
    z = output / gain
    dec = np.argmin(np.abs(z[:, None] - points[None, :]), axis=1)
    errors = np.count_nonzero(bits[dec] != bits[transmitted_idx])
    return errors / (transmitted_idx.size * bits.shape[1])


def _normalized_freqs(n: int, sps: int) -> np.ndarray:
    return np.fft.fftfreq(n, d=1.0 / sps)


def synthesize(link: LinkSpec, sim: SimConfig, grid: spectral.FrequencyGrid | None = None):
    """Received samples, transmitted symbol indices and symbols.

    The signal component is scaled by ``1/||h||`` of the whitened channel so
    the unfiltered reference SNR is ``Ē_x / sum sigma_i^2`` exactly as in the
    analytic models; every source injects white noise at its own PSD.
    """
    grid = grid or link.default_grid()
    ss = np.random.SeedSequence(sim.seed)
    sources = linkmodel.noise_sources(link)
    streams = [np.random.default_rng(s) for s in ss.spawn(len(sources) + 1)]

    points, _ = qam_constellation(sim.modulation)
    idx = streams[0].integers(0, points.size, sim.n_symbols)
    x = points[idx]
    scale = 0.5 / link.e_x_bar  # unit-energy symbols: per-dimension energy 1/2

    n = sim.n_symbols * sim.sps
    f_norm = _normalized_freqs(n, sim.sps)
    f_hz = f_norm * link.rs
    mags = [flt.magnitude(f_hz) for flt in link.filters]
    tails = [np.ones(n)]
    for m in reversed(mags):
        tails.append(tails[-1] * m)
    tails = tails[::-1]  # tails[i] = prod_{n >= i} |H_n|

    noisy = any(src.sigma_sq > 0 for src in sources)
    # without noise the output is power-normalized anyway, so the scale is moot
    h_norm_sq = linkmodel.white_equiv_channel(link, grid).h_norm_sq if noisy else 1.0
    up = np.zeros(n, dtype=complex)
    up[:: sim.sps] = x
    shaping = sim.sps * spectral.srrc_magnitude(f_norm, link.rolloff, 1.0)
    spec = np.fft.fft(up) * shaping * tails[0] / math.sqrt(h_norm_sq)
    for src, tail, rng in zip(sources, tails, streams[1:]):
        if src.sigma_sq <= 0:
            continue
        std = math.sqrt(src.sigma_sq * scale * sim.sps)
        noise = std * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        spec += np.fft.fft(noise) * tail
    if sim.whiten and noisy:
        psd, _ = linkmodel.colored_noise_psd(link, grid)
        s = np.interp(f_hz, grid.freqs, psd.values)
        spec /= np.sqrt(np.where(s > 0, s, 1.0))
    y = np.fft.ifft(spec)
    y /= math.sqrt(np.mean(np.abs(y) ** 2))
    return y, idx, x


def run_simulation(link: LinkSpec, sim: SimConfig, grid: spectral.FrequencyGrid | None = None) -> SimResult:
    y, idx, x = synthesize(link, sim, grid)
    out = lms_equalize(y, x, sim)
    edge = int(math.ceil(4 * sim.taps / sim.sps))
    start = max(sim.n_train, edge)
    stop = sim.n_symbols - edge
    if stop - start < 1000:
        raise ValueError("too few payload symbols after training and edge trimming")
    z = out.symbols[start:stop]
    ref = x[start:stop]
    if out.diverged:
        return SimResult(-math.inf, 0.5, False, out.taps, 0, True, sim.seed)
    try:
        snr_db, delay = estimate_snr(z, ref)
    except AlignmentError:
        return SimResult(-math.inf, 0.5, False, out.taps, 0, out.diverged, sim.seed)
    lo = 16
    zz = z[lo : z.size - lo]
    ii = idx[start + lo - delay : stop - lo - delay]
    rr = ref[lo - delay : ref.size - lo - delay]
    gain = np.vdot(rr, zz) / np.vdot(rr, rr)
    ber = count_ber(zz, ii, gain, sim.modulation)
    return SimResult(snr_db, ber, out.converged, out.taps, delay, out.diverged, sim.seed)
