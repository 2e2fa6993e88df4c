"""Independent reference computations, kept free of filtpen imports.

Each oracle is built from first principles (quadrature, bisection, scalar
loops) so that agreement with the package is evidence, not tautology.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate

PLANCK = 6.62607015e-34


def erfc_quad(x: float) -> float:
    """``2/sqrt(pi) · ∫_x^∞ exp(-t²) dt`` by adaptive quadrature."""
    val, _ = integrate.quad(lambda t: math.exp(-t * t), x, math.inf, epsabs=0, epsrel=1e-13, limit=200)
    return 2.0 / math.sqrt(math.pi) * val


def gaussian_tail(q: float) -> float:
    """``P(N(0,1) > q)`` by quadrature of the density."""
    val, _ = integrate.quad(
        lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), q, math.inf, epsabs=0, epsrel=1e-13, limit=200
    )
    return val


def q_from_ber_bisect(ber: float) -> float:
    """Invert the Gaussian tail by bisection."""
    lo, hi = 0.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gaussian_tail(mid) > ber:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def snr_ase_db(groups_db, f0, rs, p_w) -> float:
    """Dual-polarization ASE SNR from ``[(gain_db, nf_db, count), ...]``.

    Total ASE power over the symbol-rate bandwidth is
    ``sum h·f0·(G-1)·NF · Rs`` (both polarizations, both quadratures).
    """
    p_ase = 0.0
    for g_db, nf_db, count in groups_db:
        g = 10 ** (g_db / 10)
        nf = 10 ** (nf_db / 10)
        p_ase += count * PLANCK * f0 * (g - 1) * nf * rs
    return 10 * math.log10(p_w / p_ase)


def fle_normal_equations(h: np.ndarray, n_f: int, ex: float, sigma_sq: float) -> tuple[float, int]:
    """Best unbiased SNR and delay of a symbol-spaced FIR MMSE equalizer.

    ``y_k = sum_m h_m x_{k-m} + n_k``; the equalizer sees
    ``(y_k, y_{k-1}, ..., y_{k-n_f+1})`` and estimates ``x_{k-delay}``.
    Correlations are written entry by entry from the model.
    """
    h = np.asarray(h, dtype=complex)
    nu = h.size - 1

    def hv(m):
        return h[m] if 0 <= m <= nu else 0.0

    R = np.zeros((n_f, n_f), dtype=complex)
    for a in range(n_f):
        for b in range(n_f):
            # E[y_{k-a} conj(y_{k-b})] = ex · sum_j h_{j-a} conj(h_{j-b}) + noise
            acc = 0.0
            for j in range(n_f + nu + 1):
                acc += hv(j - a) * np.conj(hv(j - b))
            R[a, b] = ex * acc + (sigma_sq if a == b else 0.0)
    best = (-math.inf, -1)
    for d in range(n_f + nu):
        # E[y_{k-a} conj(x_{k-d})] = ex · h_{d-a}
        r = np.array([ex * hv(d - a) for a in range(n_f)])
        w = np.linalg.solve(R, r)
        mse = float(np.real(ex - np.vdot(r, w)))
        snr = ex / mse - 1.0
        if snr > best[0]:
            best = (snr, d)
    return best


def brickwall_k_mmse(b_over_rs: float, snr: float) -> float:
    """MMSE penalty of a brick-wall channel ``|f| < B/2`` with ``B < Rs``."""
    q_in = 1.0 / b_over_rs
    return b_over_rs / (q_in + 1.0 / snr) + (1.0 - b_over_rs) * snr


def raised_cosine_unit(f, beta: float) -> np.ndarray:
    """Raised cosine with unit peak at symbol rate 1, written directly."""
    a = np.abs(np.asarray(f, dtype=float))
    out = np.zeros_like(a)
    lo, hi = (1 - beta) / 2, (1 + beta) / 2
    out[a <= lo] = 1.0
    if beta > 0:
        mid = (a > lo) & (a < hi)
        out[mid] = np.cos(np.pi / (2 * beta) * (a[mid] - lo)) ** 2
    return out


def zf_inverse_taps(h0: float, h1: float, n: int) -> np.ndarray:
    """Causal series inverse of ``h0 + h1 z^-1`` truncated to ``n`` taps."""
    return np.array([(1 / h0) * (-h1 / h0) ** k for k in range(n)])
