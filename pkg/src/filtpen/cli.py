"""Command-line entry point: ``filtpen {analyze,sweep,simulate,fit-trx}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import equalizers as eq
from . import spectral, sweep, timesim, trxmodel
from .config import ConfigError, bundled_config, load_link_spec

log = logging.getLogger("filtpen")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _config_path(text: str) -> Path:
    # bare names resolve to bundled configurations (e.g. "metro8")
    p = Path(text)
    if not p.exists() and p.suffix == "" and "/" not in text:
        try:
            return bundled_config(text)
        except FileNotFoundError:
            pass
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="filtpen", description="Optical filtering penalty models for coherent links.")
    ap.add_argument("--grid-points", type=int, default=None, help="frequency-grid points per symbol-rate period")
    ap.add_argument("--aliases", type=int, default=None, help="spectral aliases kept on each side when folding")
    ap.add_argument("--seed", type=int, default=None, help="simulator RNG seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def outputs(p):
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("-o", "--output", type=Path, default=None, help="write here instead of stdout")

    a = sub.add_parser("analyze", help="evaluate the receiver models at the configured operating point")
    a.add_argument("config", type=_config_path)
    a.add_argument("--equalizers", type=_csv_list, default=["bound", "zfe", "mmse", "fse"])
    a.add_argument("--taps", type=int, default=None)
    a.add_argument("--ell", type=int, default=2)
    a.add_argument("--all-pass", action="store_true", help="replace every filter by an all-pass stage")
    outputs(a)

    s = sub.add_parser("sweep", help="sweep one variable and tabulate every receiver model")
    s.add_argument("config", type=_config_path)
    s.add_argument("--var", required=True, choices=sweep.SWEEP_VARIABLES)
    s.add_argument("--values", required=True, type=_float_list, help="GHz, taps, dB or dBm by variable")
    s.add_argument("--equalizers", type=_csv_list, default=["bound", "zfe", "mmse", "fse"])
    s.add_argument("--taps", type=int, default=None)
    s.add_argument("--ell", type=int, default=2)
    s.add_argument("--with-sim", action="store_true")
    s.add_argument("--n-symbols", type=int, default=100_000)
    s.add_argument("--mu", type=float, default=1e-3)
    outputs(s)

    m = sub.add_parser("simulate", help="run the time-domain LMS reference")
    m.add_argument("config", type=_config_path)
    m.add_argument("--taps", type=int, default=32)
    m.add_argument("--sps", type=int, default=2)
    m.add_argument("--n-symbols", type=int, default=100_000)
    m.add_argument("--mu", type=float, default=1e-3)
    m.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds to run")
    m.add_argument("-o", "--output", type=Path, default=None)

    f = sub.add_parser("fit-trx", help="fit the transceiver SNR model to sensitivity data")
    f.add_argument("csv", type=Path, help="columns p_rx_dbm,ber")
    f.add_argument("--modulation", default=trxmodel.DP16QAM.name)
    return ap


def _grid_factory(args):
    if args.grid_points is None and args.aliases is None:
        return None
    aliases = spectral.DEFAULT_ALIASES if args.aliases is None else args.aliases
    ppp = spectral.POINTS_PER_PERIOD if args.grid_points is None else args.grid_points
    if aliases < 1 or ppp < 16:
        raise ConfigError(["--aliases must be >= 1 and --grid-points >= 16"])
    return lambda link: spectral.FrequencyGrid.for_symbol_rate(link.rs, aliases, ppp)


def _write(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _emit(table: sweep.ResultTable, args) -> int:
    text = sweep.emit(table, args.format, args.output)
    if args.output is None:
        sys.stdout.write(text)
    for r in table.rows:
        if r.error:
            log.error("%s=%s %s: %s", r.sweep_var, r.sweep_value, r.equalizer, r.error)
    return 1 if table.has_errors else 0


def cmd_analyze(args) -> int:
    link = load_link_spec(args.config)
    if args.all_pass:
        link = link.all_pass()
    errs = [e for e in args.equalizers if e not in eq.EQUALIZERS]
    if errs or not args.equalizers:
        raise ConfigError([f"--equalizers: unknown or empty selection {args.equalizers}"])
    if "fle" in args.equalizers and args.taps is None:
        raise ConfigError(["--taps: required by the fle equalizer"])
    table = sweep.analyze(link, args.equalizers, args.taps, args.ell, _grid_factory(args))
    return _emit(table, args)


def cmd_sweep(args) -> int:
    link = load_link_spec(args.config)
    sim = timesim.SimConfig(n_symbols=args.n_symbols, mu=args.mu, seed=args.seed or 0)
    try:
        sd = sweep.SweepDef(
            args.var, args.values, tuple(args.equalizers), args.taps, args.ell, args.with_sim, sim
        )
    except ValueError as exc:
        raise ConfigError(str(exc).split("; ")) from None
    return _emit(sweep.run_sweep(link, sd, _grid_factory(args)), args)


def cmd_simulate(args) -> int:
    link = load_link_spec(args.config)
    factory = _grid_factory(args)
    grid = factory(link) if factory else None
    base = timesim.SimConfig(
        n_symbols=args.n_symbols, sps=args.sps, taps=args.taps, mu=args.mu, modulation=link.modulation
    )
    first = args.seed or 0
    runs = []
    for seed in range(first, first + args.seeds):
        res = timesim.run_simulation(link, replace(base, seed=seed), grid)
        runs.append(
            {"seed": seed, "snr_db": res.snr_db, "ber": res.ber, "converged": res.converged, "diverged": res.diverged}
        )
    _write(json.dumps({"taps": args.taps, "sps": args.sps, "runs": runs}, indent=2) + "\n", args.output)
    return 0 if all(r["converged"] for r in runs) else 1


def cmd_fit(args) -> int:
    mc = trxmodel.modulation(args.modulation)
    points = trxmodel.read_sensitivity_csv(args.csv)
    model = trxmodel.fit_trx_model(points, mc)
    out = {
        "N_db": model.n_db,
        "D_dbm": model.d_dbm,
        "residual_db2": trxmodel.fit_residual_db(model, points, mc),
        "n_points": len(points),
    }
    sys.stdout.write(json.dumps(out, indent=2) + "\n")
    return 0


COMMANDS = {"analyze": cmd_analyze, "sweep": cmd_sweep, "simulate": cmd_simulate, "fit-trx": cmd_fit}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        src = f"{exc.source}: " if exc.source else ""
        for e in exc.errors:
            print(f"error: {src}{e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
