"""Command-line front-end: simulate, fit, repeat, summarize."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PRESETS, load_config, load_preset
from .errors import ConfigError, IsofitError
from .runner import fit, read_chain, repeat, resolve_workers, simulate, write_summary


def _add_common(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", type=Path, help="run configuration file (INI)")
    group.add_argument("--preset", choices=PRESETS, help="shipped experiment preset")
    parser.add_argument("--seed", type=int, default=None, help="chain seed override")
    parser.add_argument("--sampler", choices=("mwg", "mgdg", "malg"), default=None)
    parser.add_argument("--out", type=Path, required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isofit",
        description="Bayesian isotherm / mixture parameter estimation by "
                    "optimization-embedded MCMC.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write a synthetic observation CSV")
    _add_common(p_sim)
    p_sim.add_argument("--dump-field", action="store_true",
                       help="also dump the column's space-time field (chroma only)")

    p_fit = sub.add_parser("fit", help="run one chain and write its outputs")
    _add_common(p_fit)
    p_fit.add_argument("--obs", type=Path, default=None,
                       help="observation CSV (default: synthesized from the config)")
    p_fit.add_argument("--workers", type=int, default=None,
                       help="accepted for interface symmetry; fits are single-chain")

    p_rep = sub.add_parser("repeat", help="run repeated trials and aggregate them")
    _add_common(p_rep)
    p_rep.add_argument("--reps", type=int, required=True, help="number of trials")
    p_rep.add_argument("--workers", type=int, default=None,
                       help="concurrent trials (fallback: ISOFIT_WORKERS)")

    p_sum = sub.add_parser("summarize", help="summarize an existing chain CSV")
    p_sum.add_argument("--chain", type=Path, required=True)
    p_sum.add_argument("--out", type=Path, required=True)
    return parser


def _load(args) -> "RunConfig":
    config = load_config(args.config) if args.config else load_preset(args.preset)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "sampler", None):
        overrides["sampler"] = args.sampler
    return config.with_overrides(**overrides) if overrides else config


def _fail(out_dir: Path | None, exc: Exception) -> int:
    record = {"error": type(exc).__name__, "message": str(exc)}
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "error.json").write_text(json.dumps(record, indent=2) + "\n")
        except OSError:
            pass
    print(json.dumps(record), file=sys.stderr)
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = getattr(args, "out", None)
    try:
        if args.command == "summarize":
            chain = read_chain(args.chain)
            out_dir.mkdir(parents=True, exist_ok=True)
            write_summary(out_dir / "summary.csv", chain)
            print(f"summary written to {out_dir / 'summary.csv'}")
            return 0
        config = _load(args)
        if args.command == "simulate":
            path = simulate(config, out_dir)
            if args.dump_field and config.model_kind == "chroma":
                _dump_field(config, out_dir)
            print(f"observation written to {path}")
            return 0
        if args.command == "fit":
            result = fit(config, out_dir, sampler=args.sampler, seed=args.seed,
                         obs_path=args.obs)
            print(f"chain written to {out_dir / 'chain.csv'} "
                  f"(band max RE {result.metrics['re_band_max']:.4f})")
            return 0
        if args.command == "repeat":
            workers = resolve_workers(args.workers)
            aggregate = repeat(config, out_dir, args.reps,
                               sampler=args.sampler, workers=workers)
            print(f"aggregate written to {out_dir / 'aggregate.csv'} "
                  f"({aggregate.n_completed}/{args.reps} trials completed)")
            return 0
        raise ConfigError(f"unknown command {args.command!r}")
    except IsofitError as exc:
        return _fail(out_dir, exc)
    except OSError as exc:
        return _fail(out_dir, exc)


def _dump_field(config, out_dir: Path) -> None:
    import csv

    import numpy as np

    from .column import IsothermParams, solve_column_field

    times, centers, field = solve_column_field(
        config.column_config(), IsothermParams.from_xi(np.asarray(config.xi_star))
    )
    with open(out_dir / "field.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t_s", "x_cm", "c1_mM", "c2_mM"])
        for i, t in enumerate(times):
            for j, x in enumerate(centers):
                writer.writerow([repr(float(t)), repr(float(x)),
                                 repr(float(field[i, 0, j])), repr(float(field[i, 1, j]))])


if __name__ == "__main__":
    raise SystemExit(main())
