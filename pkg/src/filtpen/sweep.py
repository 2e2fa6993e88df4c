"""Parameter sweeps over a link and plot-ready result tables."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

from . import equalizers as eq
from . import linkmodel, timesim, trxmodel
from .linkmodel import LinkSpec

logger = logging.getLogger(__name__)

SWEEP_VARIABLES = ("filter_bandwidth", "taps", "snr_ase", "p_rx")
# engineering units of the sweep axis, converted once at the boundary
SWEEP_UNITS = {"filter_bandwidth": "GHz", "taps": "count", "snr_ase": "dB", "p_rx": "dBm", "none": ""}
CSV_HEADER = ("sweep_var", "sweep_value", "equalizer", "snr_db", "k_db", "q2_db", "ber", "sim_snr_db", "seed")
_FLOAT_FIELDS = ("sweep_value", "snr_db", "k_db", "q2_db", "ber", "sim_snr_db")


@dataclass(frozen=True)
class SweepDef:
    """One swept variable over ``values`` (engineering units; see ``SWEEP_UNITS``).

    ``taps`` counts FIR coefficients at ``ell`` samples per symbol, so the
    finite-length model spans ``taps // ell`` symbols. A taps sweep takes its
    tap counts from ``values``.
    """

    variable: str
    values: tuple[float, ...]
    equalizers: tuple[str, ...]
    taps: int | None = None
    ell: int = 2
    with_sim: bool = False
    sim: timesim.SimConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "equalizers", tuple(self.equalizers))
        errors = self.validation_errors()
        if errors:
            raise ValueError("; ".join(errors))

    def validation_errors(self) -> list[str]:
        errs = []
        if self.variable not in SWEEP_VARIABLES:
            errs.append(f"variable: unknown sweep variable {self.variable!r}; known: {list(SWEEP_VARIABLES)}")
        if not self.values:
            errs.append("values: the sweep needs at least one value")
        if not self.equalizers:
            errs.append("equalizers: the equalizer set is empty")
        unknown = [e for e in self.equalizers if e not in eq.EQUALIZERS]
        if unknown:
            errs.append(f"equalizers: unknown {unknown}; known: {list(eq.EQUALIZERS)}")
        needs_taps = "fle" in self.equalizers or self.with_sim
        if needs_taps and self.variable != "taps" and self.taps is None:
            errs.append("taps: the finite-length equalizer and the simulator need a tap count")
        if self.with_sim and "fle" not in self.equalizers:
            errs.append("with_sim: simulated SNR is reported next to the fle rows; include fle")
        if self.variable == "taps":
            bad = [v for v in self.values if v != int(v) or v < self.ell]
            if bad:
                errs.append(f"values: tap counts must be integers >= ell={self.ell}, got {bad}")
        if self.taps is not None and self.taps < self.ell:
            errs.append(f"taps: must be at least ell={self.ell}")
        return errs


@dataclass(frozen=True)
class ResultRow:
    sweep_var: str
    sweep_value: float | None
    equalizer: str
    snr_db: float | None = None
    k_db: float | None = None
    q2_db: float | None = None
    ber: float | None = None
    sim_snr_db: float | None = None
    seed: int | None = None
    error: str | None = None


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)

    @property
    def has_errors(self) -> bool:
        return any(r.error for r in self.rows)

    def column(self, name: str, equalizer: str | None = None) -> list:
        return [getattr(r, name) for r in self.rows if equalizer is None or r.equalizer == equalizer]

    def __len__(self):
        return len(self.rows)


def _apply(link: LinkSpec, variable: str, value: float) -> LinkSpec:
    if variable == "filter_bandwidth":
        return link.with_filter_bandwidth(value * 1e9)
    if variable == "snr_ase":
        base = linkmodel.snr_ase(link.replace(ase_scale=1.0))
        return link.replace(ase_scale=base / trxmodel.db_to_lin(value))
    if variable == "p_rx":
        # amplifiers run in transparency, so launch and received power coincide
        return link.replace(p_tx=trxmodel.dbm_to_w(value))
    return link


def _row_from_result(var, value, res: eq.EqualizerResult, mc) -> ResultRow:
    snr = res.snr
    if snr > 0 and math.isfinite(snr):
        ber = trxmodel.ber_from_snr(snr, mc)
    elif snr == math.inf:
        ber = 0.0
    else:
        ber = mc.k1
    if ber <= 0:
        q2 = math.inf
    else:
        q2 = trxmodel.q2_db_from_ber(ber)
    return ResultRow(var, value, res.equalizer, res.snr_db, res.k_db, q2, float(ber))


def evaluate_point(
    link: LinkSpec,
    sweep: SweepDef,
    value: float | None,
    grid_factory=None,
) -> list[ResultRow]:
    """Rows for one sweep value, in ``sweep.equalizers`` order.

    A failing equalizer yields an error row and the others still run.
    """
    var = sweep.variable if value is not None else "none"
    try:
        point = _apply(link, sweep.variable, value) if value is not None else link
        grid = grid_factory(point) if grid_factory else point.default_grid()
    except Exception as exc:  # noqa: BLE001 - any failure becomes an error row
        return [ResultRow(var, value, name, error=f"{type(exc).__name__}: {exc}") for name in sweep.equalizers]
    taps = int(value) if sweep.variable == "taps" and value is not None else sweep.taps
    n_f = taps // sweep.ell if taps else None
    rows = []
    for name in sweep.equalizers:
        try:
            results = eq.evaluate_link(point, [name], ell=sweep.ell, n_f=n_f, grid=grid)
            rows.extend(_row_from_result(var, value, r, point.modulation) for r in results)
        except Exception as exc:  # noqa: BLE001
            logger.warning("%s at %s=%s failed: %s", name, var, value, exc)
            rows.append(ResultRow(var, value, name, error=f"{type(exc).__name__}: {exc}"))
    if sweep.with_sim:
        base = sweep.sim or timesim.SimConfig()
        sim = replace(base, taps=taps, sps=sweep.ell, modulation=point.modulation)
        try:
            res = timesim.run_simulation(point, sim, grid)
            sim_db, seed, err = res.snr_db, sim.seed, None
            if not res.converged:
                logger.warning("simulation at %s=%s did not converge", var, value)
        except Exception as exc:  # noqa: BLE001
            sim_db, seed, err = None, sim.seed, f"{type(exc).__name__}: {exc}"
        rows = [
            replace(r, sim_snr_db=sim_db, seed=seed, error=r.error or err)
            if r.equalizer == "fle"
            else r
            for r in rows
        ]
    return rows


def worker_count() -> int:
    env = os.environ.get("FILTPEN_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"FILTPEN_THREADS must be an integer, got {env!r}") from None
        return max(n, 1)
    return min(4, os.cpu_count() or 1)


def run_sweep(link: LinkSpec, sweep: SweepDef, grid_factory=None) -> ResultTable:
    """Evaluate every sweep value; rows are ordered by value, then equalizer.

    ``grid_factory(link) -> FrequencyGrid`` overrides the default grid.
    """
    order = {name: i for i, name in enumerate(sweep.equalizers)}

    def run(value):
        return evaluate_point(link, sweep, value, grid_factory)

    n = min(worker_count(), len(sweep.values))
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            chunks = list(pool.map(run, sweep.values))
    else:
        chunks = [run(v) for v in sweep.values]
    rows = [r for chunk in chunks for r in chunk]

    def key(r: ResultRow):
        base, _, idx = r.equalizer.partition(":")
        return (r.sweep_value, order.get(base, len(order)), int(idx) if idx else -1)

    return ResultTable(sorted(rows, key=key))


def analyze(link: LinkSpec, equalizers: Sequence[str], taps: int | None = None, ell: int = 2, grid_factory=None):
    """Single-point evaluation as a one-value table (``sweep_var = none``)."""
    sweep = SweepDef("filter_bandwidth", (0.0,), tuple(equalizers), taps=taps, ell=ell)
    return ResultTable(evaluate_point(link, sweep, None, grid_factory))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, int) and not isinstance(v, bool):
        return str(v)
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.12g}"


def to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in table.rows:
        w.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def to_json(table: ResultTable) -> str:
    rows = []
    for r in table.rows:
        d = {k: _json_value(v) for k, v in asdict(r).items()}
        if d["error"] is None:
            del d["error"]
        rows.append(d)
    return json.dumps({"columns": list(CSV_HEADER), "rows": rows}, indent=2) + "\n"


def _parse_float(s):
    if s is None or s == "":
        return None
    if isinstance(s, str):
        return float(s)  # accepts "inf" / "-inf"
    return float(s)


def from_csv(text: str) -> ResultTable:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    rows = []
    for rec in reader:
        kw = {k: _parse_float(rec[k]) for k in _FLOAT_FIELDS}
        seed = rec["seed"]
        rows.append(ResultRow(rec["sweep_var"], equalizer=rec["equalizer"], seed=int(seed) if seed else None, **kw))
    return ResultTable(rows)


def from_json(text: str) -> ResultTable:
    doc = json.loads(text)
    rows = []
    for rec in doc["rows"]:
        kw = {k: _parse_float(rec.get(k)) for k in _FLOAT_FIELDS}
        rows.append(
            ResultRow(rec["sweep_var"], equalizer=rec["equalizer"], seed=rec.get("seed"), error=rec.get("error"), **kw)
        )
    return ResultTable(rows)


def emit(table: ResultTable, fmt: str, path: str | Path | None = None) -> str:
    """Serialize ``table`` as ``csv`` or ``json``; write to ``path`` if given."""
    if fmt == "csv":
        text = to_csv(table)
    elif fmt == "json":
        text = to_json(table)
    else:
        raise ValueError(f"unknown output format {fmt!r}; use csv or json")
    if path is not None:
        path = Path(path)
        try:
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text
