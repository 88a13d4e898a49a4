"""Command-line harness.

Subcommands: simulate, drivers, renorm, converge, besov, verify, selftest.
Exit codes: 0 success, 2 configuration error, 3 explosion, 4 property
failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .besov import BesovIndex, besov_norm, build_partition
from .config import RunConfig, load_config
from .drivers import TREE_NAMES, build_driving_vector, driving_norm, mild_residual
from .errors import ConfigError, ExplosionError
from .fields import Grid, Mollifier, read_snapshot
from .harness import CSV_SCHEMA, _write_csv, convergence_study, simulate, worker_count
from .noise import NoiseGen, lattice_constants, renorm_c1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EXPLOSION = 3
EXIT_PROPERTY = 4


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--n", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--nu-re", type=float, dest="nu_re")
    p.add_argument("--nu-im", type=float, dest="nu_im")
    p.add_argument("--lambda-re", type=float, dest="lambda_re")
    p.add_argument("--lambda-im", type=float, dest="lambda_im")
    p.add_argument("--c", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--mollifier", choices=("gaussian", "sharp"))
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--T", type=float, dest="T")
    p.add_argument("--out")
    p.add_argument("--record-every", type=int, dest="record_every")


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    for name in ("n", "dim", "mu", "nu_re", "nu_im", "lambda_re", "lambda_im",
                 "c", "eps", "mollifier", "seed", "dt", "T", "out",
                 "record_every", "mode"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    cfg.require_valid()
    return cfg


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    record = simulate(cfg, checkpoint_every=args.checkpoint_every,
                      resume_from=args.resume)
    return EXIT_EXPLOSION if record.exit_status == 3 else EXIT_OK


def cmd_drivers(args) -> int:
    cfg = _config_from_args(args)
    grid = Grid(cfg.dim, cfg.n)
    part = build_partition(grid)
    mol = Mollifier(cfg.mollifier)
    consts = lattice_constants(grid, part, cfg.mu, cfg.eps, mol, dt=cfg.dt)
    gen = NoiseGen(cfg.seed, grid, cfg.dt, cfg.eps, mol)
    dv = build_driving_vector(gen, cfg.mu, part, consts, T=cfg.T,
                              burn=cfg.burn, kappa=cfg.kappa)
    rows = [("components", len(TREE_NAMES)),
            ("nodes", len(dv)),
            ("c1", consts.c1),
            ("mild_residual", mild_residual(dv, cfg.mu)),
            ("norm", driving_norm(dv, cfg.kappa, part))]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "driving_vector.csv", ["quantity", "value"], rows)
    for q, v in rows:
        print(f"{q},{v}")
    return EXIT_OK


def cmd_renorm(args) -> int:
    cfg = _config_from_args(args)
    eps_list = [float(tok) for tok in args.eps_list.split(",")] if args.eps_list \
        else list(cfg.eps_list) or [cfg.eps]
    grid = Grid(cfg.dim, cfg.n)
    part = build_partition(grid)
    mol = Mollifier(cfg.mollifier)
    rows = []
    for eps in eps_list:
        consts = lattice_constants(grid, part, cfg.mu, eps, mol, dt=cfg.dt)
        rows.append((eps, consts.c1, consts.c2.real, consts.c2.imag,
                     consts.c3.real, consts.c3.imag, 0.0))
    header = ["eps", "c1", "c2_re", "c2_im", "c3_re", "c3_im", "stderr"]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "renorm_constants.csv", header, rows)
    print(",".join(header))
    for row in rows:
        print(",".join(f"{v:.10g}" for v in row))
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = _config_from_args(args)
    eps_list = [float(tok) for tok in args.eps_list.split(",")] if args.eps_list \
        else list(cfg.eps_list)
    rows, flags = convergence_study(cfg, eps_list)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "convergence.csv", ["eps_hi", "eps_lo", "distance"], rows)
    print("eps_hi,eps_lo,distance")
    for row in rows:
        print(",".join(f"{v:.10g}" for v in row))
    if any(flags.values()):
        print("warning: some runs exploded; report is partial")
        return EXIT_EXPLOSION
    return EXIT_OK


def cmd_besov(args) -> int:
    field, _ = read_snapshot(args.snapshot)
    part = build_partition(field.grid)
    triples = []
    for tok in args.indices.split(";"):
        a, p, q = tok.split(":")
        triples.append(BesovIndex(float(a),
                                  math.inf if p == "inf" else float(p),
                                  math.inf if q == "inf" else float(q)))
    print("alpha,p,q,value")
    for idx in triples:
        val = besov_norm(field, idx, part)
        print(f"{idx.alpha:g},{idx.p:g},{idx.q:g},{val:.10g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import run_property_suite

    rows = run_property_suite(verbose=True)
    if args.report:
        _write_csv(args.report, ["property", "statistic", "threshold", "pass"],
                   [(r.name, r.statistic, r.threshold, int(r.passed)) for r in rows])
    return EXIT_OK if all(r.passed for r in rows) else EXIT_PROPERTY


def cmd_selftest(args) -> int:
    from .acceptance import run_acceptance

    results = run_acceptance(verbose=True, names=args.only)
    return EXIT_OK if all(r.passed for r in results) else EXIT_PROPERTY


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cglab",
        description="Numerical laboratory for the stochastic complex "
                    "Ginzburg-Landau equation on the torus",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="advance one run and persist outputs")
    _add_common(p)
    p.add_argument("--mode", choices=("paracontrolled", "direct", "coupled"))
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--resume", help="checkpoint file to resume from")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("drivers", help="build the driving vector, print its norm")
    _add_common(p)
    p.set_defaults(func=cmd_drivers)

    p = sub.add_parser("renorm", help="renormalization constants per eps")
    _add_common(p)
    p.add_argument("--eps-list", dest="eps_list")
    p.set_defaults(func=cmd_renorm)

    p = sub.add_parser("converge", help="coupled-noise convergence study")
    _add_common(p)
    p.add_argument("--eps-list", dest="eps_list")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("besov", help="norms of a stored field snapshot")
    p.add_argument("snapshot")
    p.add_argument("--indices", default="0:2:2;-0.5:inf:inf;1:inf:inf")
    p.set_defaults(func=cmd_besov)

    p = sub.add_parser("verify", help="run the invariant/property suite")
    p.add_argument("--report", help="CSV file for (property, statistic, threshold, pass)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("selftest", help="run every acceptance criterion")
    p.add_argument("--only", nargs="*", help="restrict to named criteria")
    p.set_defaults(func=cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ExplosionError as err:
        print(f"explosion: {err}", file=sys.stderr)
        return EXIT_EXPLOSION


if __name__ == "__main__":
    sys.exit(main())
