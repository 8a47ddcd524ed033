"""Command line entry points.

Subcommands: ``noise`` (sample and export scalar paths), ``solve`` (one
pathwise run), ``ensemble``, ``stability``, and ``skorokhod`` (distance
between two exported path files).  Exit status is 0 exactly when every
asserted invariant passes.  The BAROSTOCH_OUT environment variable
overrides --out.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import io as _io
from .config import ConfigError, parse_config
from .harness import build_grid, build_noise, run_ensemble, run_single, run_stability
from .paths import skorokhod_distance


def _outdir(args) -> Path:
    env = os.environ.get("BAROSTOCH_OUT")
    if env:
        return Path(env)
    return Path(args.out)


def _load_config(args):
    try:
        return parse_config(args.config, allow_low_gamma=args.allow_low_gamma)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        raise SystemExit(2)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        raise SystemExit(2)


def _cmd_noise(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg.seed = args.seed
    out = _outdir(args)
    grid = build_grid(cfg)
    noise = build_noise(cfg, cfg.seed, grid)
    out.mkdir(parents=True, exist_ok=True)
    for k, path in enumerate(noise.paths):
        _io.write_path_csv(path, out / f"path_{k:02d}")
    print(f"wrote {len(noise.paths)} paths to {out} (c_w={noise.c_w})")
    return 0


def _cmd_solve(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg.seed = args.seed
    result = run_single(cfg, outdir=_outdir(args), persist=True)
    for name, ok in result.report.flags.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(f"artifacts in {result.outdir}")
    return 0 if result.report.all_pass() else 1


def _cmd_ensemble(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg.seed = args.seed
    summary = run_ensemble(cfg, outdir=_outdir(args), persist=True)
    print(
        f"{summary.n_paths} paths: mass mean {summary.mass_mean}, "
        f"jump count mean {summary.jump_count_mean}, "
        f"failed seeds {summary.failed_seeds}"
    )
    return 0 if not summary.failed_seeds else 1


def _cmd_stability(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg.seed = args.seed
    report = run_stability(cfg)
    out = _outdir(args)
    out.mkdir(parents=True, exist_ok=True)
    _io.write_csv(
        out / "stability.csv",
        ["width", "rho_distance", "relmom_distance", "uniform_path", "skorokhod_path"],
        zip(
            report.widths,
            report.rho_distances,
            report.relmom_distances,
            report.uniform_path_distances,
            report.skorokhod_path_distances,
        ),
    )
    trend = report.distances_non_increasing()
    within = report.final_within_baseline()
    print(f"baseline rho {report.baseline_rho} relmom {report.baseline_relmom}")
    for w, dr, dq in zip(report.widths, report.rho_distances, report.relmom_distances):
        print(f"width {w}: rho {dr} relmom {dq}")
    print(f"{'PASS' if trend else 'FAIL'} distances_non_increasing")
    print(f"{'PASS' if within else 'FAIL'} final_within_baseline")
    return 0 if (trend and within) else 1


def _cmd_skorokhod(args) -> int:
    x = _io.read_path_csv(Path(args.path_a))
    y = _io.read_path_csv(Path(args.path_b))
    d, lam = skorokhod_distance(x, y, tol=args.tol)
    print(f"d,{_io.fmt(d)}")
    print("lambda_t,lambda_value")
    for t, v in zip(lam.knots_t.tolist(), lam.knots_lambda.tolist()):
        print(f"{_io.fmt(t)},{_io.fmt(v)}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="barostoch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--allow-low-gamma", action="store_true",
                       help="accept gamma at or below 3/2 (warning instead of error)")

    common(sub.add_parser("noise", help="sample forcing paths and export them"))
    common(sub.add_parser("solve", help="one pathwise run with diagnostics"))
    common(sub.add_parser("ensemble", help="Monte Carlo over consecutive seeds"))
    common(sub.add_parser("stability", help="mollified-forcing stability experiment"))
    sk = sub.add_parser("skorokhod", help="distance between two exported paths")
    sk.add_argument("path_a")
    sk.add_argument("path_b")
    sk.add_argument("--tol", type=float, default=1e-9)

    args = parser.parse_args(argv)
    handlers = {
        "noise": _cmd_noise,
        "solve": _cmd_solve,
        "ensemble": _cmd_ensemble,
        "stability": _cmd_stability,
        "skorokhod": _cmd_skorokhod,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
