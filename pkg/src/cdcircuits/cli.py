"""Command-line entry point: ``cdcircuits <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

from .errors import CdCircuitsError
from .experiments import (
    EXPERIMENTS,
    evaluate_run,
    load_config,
    render_plots,
    run_experiment,
    trotter_scan,
    write_csv,
)

_FIXED = {"agp-sweep": "agp-sweep", "nc-profile": "nc-bond-profile", "gap-scan": "gap-scan"}
_COMPRESS = ("gap-traversal", "critical-prep", "combinatorial")


def _parse_set(items: list[str] | None) -> dict:
    """``key=value`` pairs with TOML value syntax (``chi=[4, 8]``, ``T=0.3``)."""
    out = {}
    for item in items or []:
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = tomli.loads(f"v = {v}")["v"]
    return out


def _common(p: argparse.ArgumentParser, experiment_flag: bool = True) -> None:
    p.add_argument("--config", type=Path, help="TOML config file")
    if experiment_flag:
        p.add_argument("--experiment", choices=EXPERIMENTS, help="override the config's experiment")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="override the solver seed")
    p.add_argument("--threads", type=int, help="worker pool size for grid points")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config field (TOML syntax)")


def _config(args, experiment: str | None = None):
    over = _parse_set(args.set)
    over.update({"out": args.out, "seed": args.seed, "threads": args.threads})
    exp = experiment or getattr(args, "experiment", None)
    if exp is not None:
        over["experiment"] = exp
    return load_config(args.config, **over)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cdcircuits", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, exp in _FIXED.items():
        p = sub.add_parser(name, help=f"run the {exp} experiment")
        _common(p, experiment_flag=False)
        p.add_argument("--no-plots", action="store_true")
    p = sub.add_parser("compress", help="optimize CD/adiabatic circuits (gap-traversal, critical-prep, combinatorial)")
    _common(p)
    p.add_argument("--no-plots", action="store_true")
    p = sub.add_parser("trotter-scan", help="Trotter baseline over total times")
    _common(p)
    p.add_argument("--instance", type=int, help="combinatorial seed (default: first of seeds)")
    p = sub.add_parser("evaluate", help="metrics of a saved circuit run")
    _common(p)
    p.add_argument("--run", type=Path, required=True, help="run JSON written by compress")
    p.add_argument("--instance", type=int, help="combinatorial seed")
    p = sub.add_parser("report", help="redraw plots and print summaries of result directories")
    p.add_argument("dirs", nargs="+", type=Path)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in _FIXED:
            cfg = _config(args, _FIXED[args.command])
            out = run_experiment(cfg, plots=not args.no_plots)
            print(out / "manifest.json")
        elif args.command == "compress":
            cfg = _config(args)
            if cfg.experiment not in _COMPRESS:
                raise CdCircuitsError(f"compress runs {_COMPRESS}, got {cfg.experiment}")
            out = run_experiment(cfg, plots=not args.no_plots)
            print(out / "manifest.json")
        elif args.command == "trotter-scan":
            cfg = _config(args)
            print(trotter_scan(cfg, cfg.out, args.instance))
        elif args.command == "evaluate":
            cfg = _config(args)
            rows = evaluate_run(cfg, args.run, args.instance)
            cols = ["chunk", "t", "lambda", "fid_target", "e_targ", "e_inst", "inst_infidelity", "two_qubit_gates"]
            print(write_csv(Path(cfg.out) / f"{args.run.stem}_evaluate.csv", cols, rows))
        else:
            for d in args.dirs:
                man = json.loads((d / "manifest.json").read_text())
                plots = render_plots(d, man["experiment"])
                print(f"{d}: {man['experiment']} hash={man['config_hash']} wall={man['wall_time_s']:.1f}s plots={len(plots)}")
                print(json.dumps(man["summary"], indent=1, sort_keys=True))
    except (CdCircuitsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, (ValueError, OSError)) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
