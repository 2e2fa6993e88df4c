"""JSON link descriptions in engineering units (GHz, THz, dB, dBm).

A document has three sections::

    {
      "signal": {"rs_ghz": 63.1, "rolloff": 0.15, "f0_thz": 193.9,
                 "p_tx_dbm": 0, "modulation": "dp-16qam"},
      "path": [
        {"amplifiers": [{"gain_db": 15, "nf_db": 6, "count": 3}]},
        {"filter": {"model": "erf", "b_ch_ghz": 62.5, "bw_otf_ghz": 10}},
        {"amplifiers": [{"gain_db": 8, "nf_db": 9}]}
      ],
      "trx": {"N_db": 17.5, "D_dbm": -20}
    }

``path`` is ordered from transmitter to receiver. Amplifiers ahead of a
filter form that filter's noise group; amplifiers after the last filter
inject receiver-side noise. ``trx`` may instead name a sensitivity CSV via
``fit_file`` (fitted on load); omit it to disable transceiver noise.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from . import trxmodel
from .linkmodel import AllPassFilter, AmplifierSpec, ErfFilter, LinkSpec, RectFilter, TabulatedFilter

GHZ = 1e9
FILTER_MODELS = ("erf", "rect", "allpass", "tabulated")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str], source: str | Path | None = None):
        self.errors = list(errors)
        self.source = source
        head = f"{source}: " if source else ""
        super().__init__(head + "; ".join(self.errors))


class _Collector:
    def __init__(self):
        self.errors: list[str] = []

    def number(self, obj: dict, key: str, where: str, *, default=None, required=True, check=None, msg=""):
        if key not in obj:
            if required and default is None:
                self.errors.append(f"{where}.{key}: missing")
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            self.errors.append(f"{where}.{key}: expected a finite number, got {v!r}")
            return default
        if check is not None and not check(v):
            self.errors.append(f"{where}.{key}: {msg} (got {v})")
            return default
        return float(v)

    def unknown(self, obj: dict, allowed: set[str], where: str):
        for key in sorted(set(obj) - allowed):
            self.errors.append(f"{where}.{key}: unknown field")


def _parse_signal(sig: Any, c: _Collector) -> dict:
    if not isinstance(sig, dict):
        c.errors.append("signal: expected an object")
        return {}
    c.unknown(sig, {"rs_ghz", "rolloff", "f0_thz", "p_tx_dbm", "modulation"}, "signal")
    out = {
        "rs": c.number(sig, "rs_ghz", "signal", check=lambda v: v > 0, msg="must be positive"),
        "rolloff": c.number(sig, "rolloff", "signal", check=lambda v: 0 <= v <= 1, msg="must lie in [0, 1]"),
        "f0": c.number(sig, "f0_thz", "signal", check=lambda v: v > 0, msg="must be positive"),
        "p_tx_dbm": c.number(sig, "p_tx_dbm", "signal", default=0.0),
    }
    if out["rs"] is not None:
        out["rs"] *= GHZ
    if out["f0"] is not None:
        out["f0"] *= 1e12
    mod = sig.get("modulation", trxmodel.DP16QAM.name)
    try:
        out["modulation"] = trxmodel.modulation(str(mod))
    except ValueError as exc:
        c.errors.append(f"signal.modulation: {exc}")
    return out


def _parse_amplifier(a: Any, where: str, c: _Collector) -> list[AmplifierSpec]:
    if not isinstance(a, dict):
        c.errors.append(f"{where}: expected an object")
        return []
    c.unknown(a, {"gain_db", "nf_db", "count"}, where)
    g = c.number(a, "gain_db", where, check=lambda v: v >= 0, msg="gain must be nonnegative in dB")
    nf = c.number(a, "nf_db", where, check=lambda v: v >= 0, msg="noise figure must be nonnegative in dB")
    count = a.get("count", 1)
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        c.errors.append(f"{where}.count: expected a positive integer, got {count!r}")
        return []
    if g is None or nf is None:
        return []
    return [AmplifierSpec.from_db(g, nf)] * count


def _parse_filter(flt: Any, where: str, base: Path, c: _Collector):
    if not isinstance(flt, dict):
        c.errors.append(f"{where}: expected an object")
        return None
    model = flt.get("model")
    if model not in FILTER_MODELS:
        c.errors.append(f"{where}.model: unknown filter model {model!r}; known: {list(FILTER_MODELS)}")
        return None
    if model == "erf":
        c.unknown(flt, {"model", "b_ch_ghz", "bw_otf_ghz"}, where)
        b = c.number(flt, "b_ch_ghz", where, check=lambda v: v > 0, msg="must be positive")
        otf = c.number(flt, "bw_otf_ghz", where, check=lambda v: v > 0, msg="must be positive")
        return None if b is None or otf is None else ErfFilter(b * GHZ, otf * GHZ)
    if model == "rect":
        c.unknown(flt, {"model", "bandwidth_ghz"}, where)
        b = c.number(flt, "bandwidth_ghz", where, check=lambda v: v > 0, msg="must be positive")
        return None if b is None else RectFilter(b * GHZ)
    if model == "allpass":
        c.unknown(flt, {"model"}, where)
        return AllPassFilter()
    c.unknown(flt, {"model", "file"}, where)
    if "file" not in flt:
        c.errors.append(f"{where}.file: missing")
        return None
    try:
        return read_tabulated_filter(base / str(flt["file"]))
    except (OSError, ValueError) as exc:
        c.errors.append(f"{where}.file: {exc}")
        return None


def read_tabulated_filter(path: str | Path) -> TabulatedFilter:
    """Two-column CSV ``f_offset_ghz,attenuation_db`` with a header row."""
    path = Path(path)
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    names = data.dtype.names or ()
    if names != ("f_offset_ghz", "attenuation_db"):
        raise ValueError(f"{path}: expected columns f_offset_ghz,attenuation_db, got {','.join(names)}")
    data = np.atleast_1d(data)
    if not np.all(np.isfinite(data["f_offset_ghz"])) or not np.all(np.isfinite(data["attenuation_db"])):
        raise ValueError(f"{path}: non-numeric or missing values")
    return TabulatedFilter(data["f_offset_ghz"] * GHZ, data["attenuation_db"])


def _parse_trx(trx: Any, base: Path, mod, c: _Collector):
    if trx is None:
        return None
    if not isinstance(trx, dict):
        c.errors.append("trx: expected an object")
        return None
    c.unknown(trx, {"N_db", "D_dbm", "fit_file"}, "trx")
    if "fit_file" in trx:
        if "N_db" in trx or "D_dbm" in trx:
            c.errors.append("trx: give either fit_file or N_db/D_dbm, not both")
            return None
        try:
            points = trxmodel.read_sensitivity_csv(base / str(trx["fit_file"]))
            return trxmodel.fit_trx_model(points, mod or trxmodel.DP16QAM)
        except (OSError, ValueError) as exc:
            c.errors.append(f"trx.fit_file: {exc}")
            return None
    n = c.number(trx, "N_db", "trx")
    d = c.number(trx, "D_dbm", "trx")
    return None if n is None or d is None else trxmodel.TrxModel.from_db(n, d)


def link_from_dict(doc: Any, base_dir: str | Path = ".", source: str | Path | None = None) -> LinkSpec:
    """Validate ``doc`` and build a :class:`LinkSpec`; see the module docstring."""
    c = _Collector()
    base = Path(base_dir)
    if not isinstance(doc, dict):
        raise ConfigError(["top level: expected an object"], source)
    c.unknown(doc, {"signal", "path", "trx"}, "config")
    if "signal" not in doc:
        c.errors.append("signal: missing")
    sig = _parse_signal(doc.get("signal", {}), c) if "signal" in doc else {}

    filters, groups, pending = [], [], []
    path = doc.get("path")
    if not isinstance(path, list):
        c.errors.append("path: expected a list of stages")
        path = []
    for i, stage in enumerate(path):
        where = f"path[{i}]"
        if not isinstance(stage, dict) or len(stage) != 1 or next(iter(stage)) not in ("filter", "amplifiers"):
            c.errors.append(f"{where}: expected {{'filter': {{...}}}} or {{'amplifiers': [...]}}")
            continue
        kind, body = next(iter(stage.items()))
        if kind == "amplifiers":
            if not isinstance(body, list):
                c.errors.append(f"{where}.amplifiers: expected a list")
                continue
            for j, a in enumerate(body):
                pending.extend(_parse_amplifier(a, f"{where}.amplifiers[{j}]", c))
        else:
            flt = _parse_filter(body, f"{where}.filter", base, c)
            filters.append(flt)
            groups.append(pending)
            pending = []

    trx = _parse_trx(doc.get("trx"), base, sig.get("modulation"), c)
    if c.errors:
        raise ConfigError(c.errors, source)
    p_tx = trxmodel.dbm_to_w(sig["p_tx_dbm"])
    try:
        return LinkSpec(
            rs=sig["rs"],
            rolloff=sig["rolloff"],
            f0=sig["f0"],
            p_tx=p_tx,
            filters=filters,
            noise_groups=groups,
            rx_amplifiers=pending,
            trx=trx,
            modulation=sig["modulation"],
        )
    except ValueError as exc:
        raise ConfigError([str(exc)], source) from None


def load_link_spec(path: str | Path) -> LinkSpec:
    """Read and validate a JSON link description."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read: {exc.strerror or exc}"], path) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno}, column {exc.colno}: {exc.msg}"], path) from None
    return link_from_dict(doc, path.parent, path)


def bundled_config(name: str = "metro8") -> Path:
    """Path of a configuration shipped with the package."""
    p = Path(__file__).with_name("configs") / f"{name}.json"
    if not p.exists():
        raise FileNotFoundError(f"no bundled configuration named {name!r}")
    return p
