"""Command-line entry point.

Every subcommand takes one config file (see `config.SCHEMA`); results go
to `output.dir`.  Exit codes: 0 success, 1 solver or validation failure,
2 config/usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .. import __version__, bem
from ..fem import material_by_name
from ..smoothing import superpotential_by_name
from ..solver import NewtonFailure
from .cases import manufactured_case, validate_case
from .config import ConfigError, read_config
from .studies import (
    build_case_mesh,
    run_eps_study,
    run_h_study,
    solve_case,
    write_csv,
    write_json,
)

__all__ = ["main"]

_DEFAULT_SCHEDULE = (0.1, 0.05, 0.025, 0.0125)


def _load_case(cfg):
    case = manufactured_case(cfg["case.name"], scale=cfg["mesh.scale"])
    subs = {}
    if cfg["material.name"] is not None:
        subs["material"] = material_by_name(cfg["material.name"])
    if cfg["friction.name"] is not None:
        params = cfg["friction.params"] or ()
        subs["spec"] = superpotential_by_name(cfg["friction.name"], params)
        subs["friction_name"] = cfg["friction.name"]
        subs["friction_params"] = tuple(params)
    return dataclasses.replace(case, **subs) if subs else case


def _outdir(cfg):
    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report(report, cfg, stem):
    out = _outdir(cfg)
    paths = []
    if cfg["output.format"] == "csv":
        p = out / f"{stem}.csv"
        write_csv(report, p)
        paths.append(p)
    p = out / f"{stem}.json"
    write_json(report, p)
    paths.append(p)
    return paths


def _cmd_solve(cfg):
    case = _load_case(cfg)
    mesh, _ = build_case_mesh(case, cfg["mesh.h0"], cfg["mesh.levels"] - 1)
    system, sol = solve_case(
        case,
        mesh,
        cfg["smoothing.eps"],
        tol=cfg["solver.tol"],
        max_iter=cfg["solver.max_iter"],
    )
    out = _outdir(cfg)
    payload = {
        "case": case.name,
        "config": cfg,
        "level": mesh.level,
        "h": mesh.h,
        "dofs": system.n_dof,
        "iterations": sol.iterations,
        "residual_history": sol.residual_history,
        "energy": sol.energy,
        "multiplier": sol.multiplier,
        "uniqueness_ok": sol.uniqueness_ok,
        "alpha_hat": sol.alpha_hat,
        "coercivity": sol.coercivity,
        "u": sol.u.tolist(),
        "v": sol.v.tolist(),
        "version": __version__,
    }
    path = out / "solution.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"solve {case.name}: level={mesh.level} dofs={system.n_dof} "
        f"iters={sol.iterations} residual={sol.residual_history[-1]:.3e} "
        f"energy={sol.energy:.6e} uniqueness={sol.uniqueness_ok} -> {path}"
    )
    return 0


def _cmd_study_h(cfg):
    if cfg["mesh.levels"] < 3:
        raise ConfigError(0, "levels >= 3 required for study-h")
    case = _load_case(cfg)
    report = run_h_study(
        case,
        cfg["mesh.levels"],
        cfg["smoothing.eps"],
        h0=cfg["mesh.h0"],
        tol=cfg["solver.tol"],
        max_iter=cfg["solver.max_iter"],
        config=cfg,
    )
    paths = _write_report(report, cfg, f"study_h_{case.name}")
    orders = {k: v for k, v in report.observed_orders.items() if v is not None}
    print(f"study-h {case.name}: {len(report.rows)} levels, orders {orders} -> "
          + ", ".join(str(p) for p in paths))
    return 0 if all(r.converged for r in report.rows) else 1


def _cmd_study_eps(cfg):
    case = _load_case(cfg)
    schedule = cfg["smoothing.eps_schedule"] or _DEFAULT_SCHEDULE
    if len(schedule) < 3:
        raise ConfigError(0, "eps schedule needs >= 3 values for study-eps")
    report = run_eps_study(
        case,
        schedule,
        h_level=max(0, cfg["mesh.levels"] - 1),
        h0=cfg["mesh.h0"],
        tol=cfg["solver.tol"],
        max_iter=cfg["solver.max_iter"],
        config=cfg,
    )
    paths = _write_report(report, cfg, f"study_eps_{case.name}")
    print(f"study-eps {case.name}: {len(report.rows)} eps values -> "
          + ", ".join(str(p) for p in paths))
    return 0 if all(r.converged for r in report.rows) else 1


def _cmd_validate(cfg):
    case = _load_case(cfg)
    report = validate_case(case, eps=cfg["smoothing.eps"], h0=cfg["mesh.h0"])
    for c in report.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    out = _outdir(cfg)
    path = out / f"validate_{case.name}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "case": case.name,
                "all_passed": report.all_passed,
                "checks": [dataclasses.asdict(c) for c in report.checks],
                "version": __version__,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(f"validate {case.name}: "
          f"{'all checks passed' if report.all_passed else 'FAILURES'} -> {path}")
    return 0 if report.all_passed else 1


def _cmd_dump_ops(cfg):
    case = _load_case(cfg)
    mesh, _ = build_case_mesh(case, cfg["mesh.h0"], cfg["mesh.levels"] - 1)
    ops = bem.boundary_operator_set(mesh)
    steklov = bem.build_steklov(ops)
    out = _outdir(cfg)
    written = {}
    for name, mat in (
        ("V", ops.V),
        ("K", ops.K),
        ("W", ops.W),
        ("M", ops.M),
        ("S", steklov.S),
    ):
        path = out / f"{name}.bin"
        bem.write_operator(path, np.asarray(mat))
        written[name] = {"path": str(path), "shape": list(np.asarray(mat).shape)}
    manifest = out / "ops.json"
    with open(manifest, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "case": case.name,
                "level": mesh.level,
                "h": mesh.h,
                "panels": ops.geometry.n_panels,
                "operators": written,
                "version": __version__,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(f"dump-ops {case.name}: {ops.geometry.n_panels} panels -> {manifest}")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "study-h": _cmd_study_h,
    "study-eps": _cmd_study_eps,
    "validate": _cmd_validate,
    "dump-ops": _cmd_dump_ops,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="hvibem",
        description="Interface problems with set-valued friction: "
        "solves, convergence studies, validators, operator dumps.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run '{name}' from a config file")
        p.add_argument("config", help="path to a key = value config file")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help/--version
        return int(exc.code or 0)

    try:
        cfg = read_config(args.config)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NewtonFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
