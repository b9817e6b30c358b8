"""Command-line front end.

Subcommands mirror the experiment runners; every run takes a JSON config and
emits provenance-stamped CSV (and optionally JSON) tables.  Exit codes:
0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .config import load_config, validate_config
from .errors import ConfigError, MirrorModeError
from . import experiments
from .experiments import SweepTable, write_table


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mirrormode",
        description="Driven qubit at a mirror: capture, tomography, Wigner negativity")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, about in [
            ("reflection", "detuning sweep of the reflection coefficient"),
            ("wln-sweep", "WLN and populations along a filter-length sweep"),
            ("dephasing-map", "max WLN over dephasing/nonradiative rates"),
            ("optimize-filter", "derivative-free search for the optimal filter"),
            ("qubit-curves", "steady-state coherence/population/purity vs drive"),
            ("mollow", "emission spectrum at critical power with Rabi fits"),
            ("capture", "single capture run: state dump plus moments")]:
        p = sub.add_parser(name, help=about)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the tomography seed")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--format", choices=["csv", "json"], default="csv")
    return parser


def _formats(args, cfg) -> tuple:
    fmts = set(cfg["output"]["formats"])
    fmts.add(args.format)
    return tuple(sorted(fmts))


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        fmts = _formats(args, cfg)
        if args.command == "reflection":
            write_table(experiments.run_reflection_circle(cfg), args.out, fmts)
        elif args.command == "qubit-curves":
            write_table(experiments.run_qubit_state_curves(cfg), args.out, fmts)
        elif args.command == "wln-sweep":
            table = experiments.run_wln_sweep(cfg, seed=args.seed,
                                              threads=args.threads,
                                              out_dir=args.out)
            write_table(table, args.out, fmts)
        elif args.command == "dephasing-map":
            heat, cuts = experiments.run_dephasing_map(cfg, seed=args.seed,
                                                       threads=args.threads,
                                                       out_dir=args.out)
            write_table(heat, args.out, fmts)
            write_table(cuts, args.out, fmts)
        elif args.command == "optimize-filter":
            best = experiments.optimize_filter(cfg, seed=args.seed)
            path = os.path.join(args.out, "optimize_filter.json")
            with open(path, "w") as fh:
                json.dump(best, fh, indent=1)
            print(json.dumps(best, indent=1))
        elif args.command == "mollow":
            spec, fits = experiments.run_mollow(cfg, seed=args.seed)
            write_table(spec, args.out, fmts)
            write_table(fits, args.out, fmts)
        elif args.command == "capture":
            _write_capture(experiments.run_capture(cfg), args.out, fmts)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MirrorModeError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3
    return 0


def _write_capture(out: dict, out_dir: str, fmts) -> None:
    res = out["result"]
    rho = res.rho_mode_full
    rows = [{"i": i, "j": j, "re": rho[i, j].real, "im": rho[i, j].imag}
            for i in range(rho.shape[0]) for j in range(rho.shape[1])]
    table = SweepTable(name="capture_state", columns=["i", "j", "re", "im"],
                       rows=rows, meta=out["meta"])
    write_table(table, out_dir, fmts)
    out["moments"].to_csv(os.path.join(out_dir, "capture_moments.csv"))
    summary = dict(out["metrics"])
    summary.update({"capture_efficiency": res.capture_efficiency,
                    "beta_re": out["beta"].real, "beta_im": out["beta"].imag,
                    "steps": res.integrator_report.steps,
                    "trace_defect": res.integrator_report.trace_defect})
    with open(os.path.join(out_dir, "capture_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
