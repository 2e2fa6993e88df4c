"""Transceiver SNR model and BER / SNR / Q-factor conversions."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.special import erfc, erfcinv

Q2_DB_FLOOR = -30.0


@dataclass(frozen=True)
class ModulationConstants:
    """Coefficients of ``BER = k1 · erfc(sqrt(k2 · SNR))``."""

    name: str
    k1: float
    k2: float
    bits_per_symbol: int = 4

    def __post_init__(self):
        if not 0 < self.k1 <= 1:
            raise ValueError(f"k1 must lie in (0, 1], got {self.k1}")
        if not self.k2 > 0:
            raise ValueError(f"k2 must be positive, got {self.k2}")


DP16QAM = ModulationConstants("dp-16qam", 3 / 8, 1 / 10, 4)
DPQPSK = ModulationConstants("dp-qpsk", 1 / 2, 1 / 2, 2)
MODULATIONS = {m.name: m for m in (DP16QAM, DPQPSK)}


def modulation(name: str) -> ModulationConstants:
    key = name.lower().replace("_", "-")
    try:
        return MODULATIONS[key]
    except KeyError:
        raise ValueError(f"unknown modulation {name!r}; known: {sorted(MODULATIONS)}") from None


@dataclass(frozen=True)
class TrxModel:
    """Saturating back-to-back SNR curve ``N · P / (P + D)``.

    ``n_sat`` is the asymptotic SNR (linear) and ``d_half`` the received
    power (W) at which the SNR drops to half of it.
    """

    n_sat: float
    d_half: float

    def __post_init__(self):
        if not (self.n_sat > 0 and self.d_half > 0):
            raise ValueError("TRX model parameters must be positive")

    @classmethod
    def from_db(cls, n_db: float, d_dbm: float) -> "TrxModel":
        return cls(db_to_lin(n_db), dbm_to_w(d_dbm))

    @property
    def n_db(self) -> float:
        return lin_to_db(self.n_sat)

    @property
    def d_dbm(self) -> float:
        return w_to_dbm(self.d_half)


def _scalar_or_array(a):
    return float(a) if np.ndim(a) == 0 else a


def db_to_lin(x):
    return _scalar_or_array(10.0 ** (np.asarray(x, dtype=float) / 10.0))


def lin_to_db(x):
    with np.errstate(divide="ignore"):
        return _scalar_or_array(10.0 * np.log10(np.asarray(x, dtype=float)))


def dbm_to_w(p_dbm):
    return _scalar_or_array(1e-3 * np.asarray(db_to_lin(p_dbm)))


def w_to_dbm(p_w):
    return lin_to_db(np.asarray(p_w, dtype=float) / 1e-3)


def snr_trx(p_rx, model: TrxModel):
    """Back-to-back transceiver SNR at received power ``p_rx`` (W)."""
    p = np.asarray(p_rx, dtype=float)
    if np.any(p < 0):
        raise ValueError("received power must be nonnegative")
    out = model.n_sat * p / (p + model.d_half)
    return float(out) if out.ndim == 0 else out


def combine_snr(parts: Iterable[float]) -> float:
    """Inverse-sum combination of independent SNR contributions (linear)."""
    parts = [float(p) for p in parts]
    if not parts:
        raise ValueError("need at least one SNR contribution")
    if any(not p > 0 for p in parts):
        raise ValueError(f"SNR contributions must be positive, got {parts}")
    return 1.0 / math.fsum(1.0 / p for p in parts)


def ber_from_snr(snr, mc: ModulationConstants = DP16QAM):
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("SNR must be nonnegative")
    out = mc.k1 * erfc(np.sqrt(mc.k2 * snr))
    return float(out) if out.ndim == 0 else out


def snr_from_ber(ber, mc: ModulationConstants = DP16QAM):
    """Inverse of :func:`ber_from_snr`, valid for ``0 < BER <= k1``."""
    ber = np.asarray(ber, dtype=float)
    if np.any(ber <= 0) or np.any(ber > mc.k1):
        raise ValueError(f"BER must lie in (0, {mc.k1}] to be invertible")
    out = erfcinv(ber / mc.k1) ** 2 / mc.k2
    return float(out) if out.ndim == 0 else out


def q_from_ber(ber):
    ber = np.asarray(ber, dtype=float)
    if np.any(ber <= 0) or np.any(ber >= 0.5):
        raise ValueError("BER must lie in (0, 0.5)")
    out = np.sqrt(2.0) * erfcinv(2.0 * ber)
    return float(out) if out.ndim == 0 else out


def q2_db_from_ber(ber) -> float:
    """Gaussian-equivalent Q² in dB, floored at -30 dB for BER >= 0.499."""
    ber = float(ber)
    if not 0 < ber < 0.5:
        raise ValueError("BER must lie in (0, 0.5)")
    if ber >= 0.499:
        return Q2_DB_FLOOR
    return max(float(lin_to_db(q_from_ber(ber) ** 2)), Q2_DB_FLOOR)


def _model_db(params, p):
    n_db, log_d = params
    d = 10.0**log_d
    return n_db + 10.0 * np.log10(p / (p + d))


def fit_trx_model(
    points: Sequence[tuple[float, float]], mc: ModulationConstants = DP16QAM
) -> TrxModel:
    """Least-squares fit of (N, D) to ``(p_rx [W], BER)`` sensitivity points.

    BER is mapped to SNR through the modulation formula; residuals are taken
    in dB, where measurement scatter is roughly uniform.
    """
    if len(points) < 3:
        raise ValueError(f"need at least 3 sensitivity points, got {len(points)}")
    p = np.array([pt[0] for pt in points], dtype=float)
    ber = np.array([pt[1] for pt in points], dtype=float)
    if np.any(p <= 0):
        raise ValueError("received powers must be positive")
    if p.max() / p.min() < 10.0:
        raise ValueError("sensitivity points must span at least a decade of received power")
    snr_db = lin_to_db(snr_from_ber(ber, mc))
    if not np.all(np.isfinite(snr_db)):
        raise ValueError("BER at the k1 ceiling maps to zero SNR; drop those points")
    if np.ptp(snr_db) < 1.0:
        raise ValueError("points are all saturated (SNR spread < 1 dB); D is unidentifiable")

    order = np.argsort(p)
    n0 = float(snr_db.max()) + 0.5
    target = n0 - 3.0
    if snr_db.min() < target:
        d0 = float(np.interp(target, snr_db[order], p[order]))
    else:
        d0 = float(np.median(p))
    res = least_squares(
        lambda x: _model_db(x, p) - snr_db,
        x0=[n0, np.log10(d0)],
        method="lm",
        xtol=1e-14,
        ftol=1e-14,
    )
    n_db, log_d = res.x
    return TrxModel(db_to_lin(n_db), 10.0**log_d)


def fit_residual_db(model: TrxModel, points, mc: ModulationConstants = DP16QAM) -> float:
    """Sum of squared dB residuals of ``model`` against sensitivity points."""
    p = np.array([pt[0] for pt in points], dtype=float)
    snr_db = lin_to_db(snr_from_ber(np.array([pt[1] for pt in points]), mc))
    r = _model_db([model.n_db, np.log10(model.d_half)], p) - snr_db
    return float(np.sum(r**2))


def read_sensitivity_csv(path: str | Path) -> list[tuple[float, float]]:
    """Read ``p_rx_dbm,ber`` rows; returns ``(p_rx [W], ber)`` pairs."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"p_rx_dbm", "ber"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing column(s) {sorted(missing)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append((float(dbm_to_w(float(row["p_rx_dbm"]))), float(row["ber"])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out
