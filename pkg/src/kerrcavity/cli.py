"""Command-line front end.

    kerrcavity                               list recipes
    kerrcavity recipes                       list recipes
    kerrcavity validate CONFIG               check a config without computing
    kerrcavity run CONFIG [--out D]          run the recipe named in the config
    kerrcavity linewidth-table [--n-traj N]  peak/width table of the P- spectrum

Exit codes: 0 success, 2 invalid input, 3 numerical failure. Errors are
also printed to stderr as one JSON object.
"""

import argparse
import json
import logging
import sys

import numpy as np

from . import recipes
from .config import load_toml, parse_config
from .errors import ConfigError, KerrCavityError
from .io import RunContext, json_text
from .parallel import WORKERS_ENV, resolve_workers

log = logging.getLogger("kerrcavity")


def _print_recipes(out=sys.stdout):
    width = max(len(n) for n in recipes.names())
    for name in recipes.names():
        out.write(f"{name.ljust(width)}  {recipes.describe(name)}\n")


def _config_from_file(path, overrides=None):
    data = load_toml(path)
    return _config_from_dict(data, overrides)


def _config_from_dict(data, overrides=None):
    name = data.get("recipe")
    if name not in recipes.RECIPES:
        raise ConfigError(f"unknown recipe {name!r}", known=",".join(recipes.names()))
    data = dict(data)
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return parse_config(data, recipes.defaults(name))


def execute(cfg, out_dir=None):
    """Run one validated config; returns (summary, manifest)."""
    out = out_dir or cfg.output.directory
    cfg = cfg.model_copy(update={"workers": resolve_workers(cfg.workers)})
    ctx = RunContext(out_dir=out, recipe=cfg.recipe, config_hash=cfg.digest(),
                     config=cfg.model_dump(mode="json"), formats=tuple(cfg.output.formats),
                     checkpoint_interval=cfg.output.checkpoint_interval)
    try:
        summary = recipes.run_recipe(cfg, ctx)
    except KerrCavityError as e:
        ctx.write_manifest(status="failed", error=e.to_dict())
        raise
    ctx.write_json("summary.json", summary)
    return summary, ctx.write_manifest()


def _fail(err, stream=None):
    (stream or sys.stderr).write(json.dumps(err.to_dict()) + "\n")
    return err.exit_code


def build_parser():
    ap = argparse.ArgumentParser(prog="kerrcavity",
                                 description="Driven-dissipative multimode Kerr cavity solvers.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command")
    sub.add_parser("recipes", help="list named reproductions")
    v = sub.add_parser("validate", help="validate a config file")
    v.add_argument("config")
    r = sub.add_parser("run", help="run a config file")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (overrides the config)")
    r.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (the {WORKERS_ENV} variable takes precedence)")
    t = sub.add_parser("linewidth-table", help="P- spectrum peak/width table")
    t.add_argument("--n-traj", type=int, default=2000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", default="linewidth_table")
    t.add_argument("--workers", type=int, default=None)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in (None, "recipes"):
            _print_recipes()
            return 0
        if args.command == "validate":
            cfg = _config_from_file(args.config)
            sys.stdout.write(json_text({"valid": True, "recipe": cfg.recipe,
                                        "config_hash": cfg.digest()}))
            return 0
        if args.command == "run":
            cfg = _config_from_file(args.config, {"workers": args.workers})
            summary, man = execute(cfg, args.out)
            log.info("wrote %d files to %s", len(man["files"]), args.out or cfg.output.directory)
            sys.stdout.write(json_text(summary))
            return 0
        if args.command == "linewidth-table":
            cfg = _config_from_dict({"recipe": "linewidth-table", "seed": args.seed, "workers": args.workers,
                                     "solver": {"n_traj": args.n_traj}})
            summary, _ = execute(cfg, args.out)
            rows = summary["rows"]
            sys.stdout.write(f"{'phase':>5} {'V0':>6} {'omega_peak':>11} {'Gamma':>8}\n")
            for r in rows:
                sys.stdout.write(f"{r['phase']:>5} {r['v0']:>6.2f} {r['omega_peak']:>11.3f} "
                                 f"{r['gamma']:>8.3f}\n")
            return 0
    except KerrCavityError as e:
        return _fail(e)
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
