"""Configuration-driven entry point and report writers.

Subcommands: bundle, tube, cone, smoothness, preset-list.  A run is described
either by a JSON config file (--config) or by a built-in preset (--preset);
command-line flags override parallelism, refinement depth, output directory
and the smoothness toggle.  Reports are deterministic: two runs with the same
config produce byte-identical report.json apart from the meta block, which
carries the timestamp, elapsed time and worker count.

Exit codes: 0 when every cell of every branch certifies, 1 when any
validation stage fails, 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

from .tubular import BranchSpec, RunResult, RunSpec, run

__all__ = ["main", "presets", "load_config", "spec_from_config", "write_reports"]

SCHEMA_CONFIG = "slowtube-config/1"
SCHEMA_REPORT = "slowtube-report/1"

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    pass


def presets() -> dict:
    """Built-in validation setups for the three example systems."""
    cylinder = {
        "schema": SCHEMA_CONFIG,
        "name": "cylinder",
        "system": {
            "fast_vars": ["r", "z"],
            "slow_vars": ["theta"],
            "f": [
                "r*(1-r^2)*cos(theta) - z*sin(theta)",
                "r*(1-r^2)*sin(theta) + z*cos(theta)",
            ],
            "g": ["1"],
            "params": {},
            "eps0": 1.0,
        },
        "Y": [[0.0, TWO_PI]],
        "subdivisions": [3142],
        "M": 10.0,
        "smoothness": False,
        "refine_depth": 2,
        "jobs": 1,
        "samples": [0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi],
        "branches": [
            {
                "name": "circle",
                "x_guess": [1.0, 0.0],
                "eta_u": 1e-4,
                "eta_s": 1e-4,
                "M_u": 2.0,
                "M_s": 2.0,
                "l_u": 1e-3,
                "l_s": 1e-3,
            }
        ],
    }
    fhn = {
        "schema": SCHEMA_CONFIG,
        "name": "fhn",
        "system": {
            "fast_vars": ["u", "v"],
            "slow_vars": ["w"],
            "f": ["v", "(c*v - u*(u-a)*(1-u) + w)/delta"],
            "g": ["(u - gamma*w)/c"],
            "params": {"a": 0.3, "gamma": 10.0, "delta": 9.0, "c": [0.799, 0.801]},
            "eps0": 1e-4,
        },
        "Y": [[-0.0002, 0.0798]],
        "subdivisions": [800],
        "M": 10.0,
        "smoothness": False,
        "refine_depth": 2,
        "jobs": 1,
        "samples": [0.0, 0.07],
        "branches": [
            {
                "name": "left",
                "x_guess": [0.0, 0.0],
                "eta_u": 1e-3,
                "eta_s": 1e-3,
                "M_u": 5.0,
                "M_s": 10.0,
                "l_u": 0.01,
                "l_s": 0.09,
                "M_rate": 4.0,
            },
            {
                "name": "right",
                "x_guess": [1.0, 0.0],
                "eta_u": 1e-3,
                "eta_s": 1e-3,
                "M_u": 4.0,
                "M_s": 6.0,
                "l_u": 0.008,
                "l_s": 0.08,
                "M_rate": 2.0,
            },
        ],
    }
    predprey = {
        "schema": SCHEMA_CONFIG,
        "name": "predprey",
        "system": {
            "fast_vars": ["u", "w"],
            "slow_vars": ["v", "z"],
            "f": ["w", "-(theta*w) - u*((1-u)*(u-v))"],
            "g": ["z", "-(theta*z + v*(a*u - b - v))"],
            "params": {"a": 1.65, "b": 0.25, "theta": -0.25},
            "eps0": 1e-4,
        },
        "Y": [[0.2, 0.8], [-0.6, 0.2]],
        "subdivisions": [200, 200],
        "M": 10.0,
        "smoothness": False,
        "refine_depth": 2,
        "jobs": 1,
        "samples": [],
        "branches": [
            {
                "name": "u0",
                "x_guess": [0.0, 0.0],
                "eta_u": 1.3e-4,
                "eta_s": 1.3e-4,
                "M_u": 1.1,
                "M_s": 1.1,
                "l_u": 0.001,
                "l_s": 0.005,
                "M_rate": 12.0,
            },
            {
                "name": "u1",
                "x_guess": [1.0, 0.0],
                "eta_u": 1.5e-4,
                "eta_s": 1.5e-4,
                "M_u": 1.1,
                "M_s": 1.1,
                "l_u": 0.001,
                "l_s": 0.005,
                "M_rate": 18.0,
            },
        ],
    }
    return {"cylinder": cylinder, "fhn": fhn, "predprey": predprey}


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    return cfg


def _require(cfg, key, kind, what="config"):
    if key not in cfg:
        raise ConfigError(f"{what} is missing {key!r}")
    value = cfg[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigError(f"{what}[{key!r}] must be {kind}")
    return value


def spec_from_config(cfg: dict) -> RunSpec:
    """Validate a config dict and build the run specification."""
    sysc = _require(cfg, "system", dict)
    fast = tuple(_require(sysc, "fast_vars", list, "system"))
    slow = tuple(_require(sysc, "slow_vars", list, "system"))
    f_src = tuple(_require(sysc, "f", list, "system"))
    g_src = tuple(_require(sysc, "g", list, "system"))
    params_cfg = _require(sysc, "params", dict, "system")
    params = []
    for name, val in sorted(params_cfg.items()):
        if isinstance(val, (int, float)):
            params.append((name, float(val), float(val)))
        elif isinstance(val, (list, tuple)) and len(val) == 2:
            params.append((name, float(val[0]), float(val[1])))
        else:
            raise ConfigError(f"parameter {name!r} must be a number or [lo, hi]")
    eps0 = _require(sysc, "eps0", float, "system")
    if eps0 < 0:
        raise ConfigError("eps0 must be nonnegative")
    Y = tuple(tuple(map(float, pair)) for pair in _require(cfg, "Y", list))
    if len(Y) != len(slow):
        raise ConfigError("Y must have one [lo, hi] pair per slow variable")
    for lo, hi in Y:
        if not lo < hi:
            raise ConfigError("Y bounds must satisfy lo < hi")
    subs = tuple(int(m) for m in _require(cfg, "subdivisions", list))
    if len(subs) != len(slow) or any(m < 1 for m in subs):
        raise ConfigError("subdivisions must be >= 1 per slow dimension")
    branches = []
    for bc in _require(cfg, "branches", list):
        branches.append(
            BranchSpec(
                name=str(bc["name"]),
                x_guess=tuple(float(v) for v in bc["x_guess"]),
                eta_u=float(bc.get("eta_u", 0.0)),
                eta_s=float(bc.get("eta_s", 0.0)),
                M_u=float(bc.get("M_u", 2.0)),
                M_s=float(bc.get("M_s", 2.0)),
                l_u=float(bc.get("l_u", 0.0)),
                l_s=float(bc.get("l_s", 0.0)),
                M_rate=(float(bc["M_rate"]) if "M_rate" in bc else None),
            )
        )
    if not branches:
        raise ConfigError("at least one branch is required")
    samples = []
    for s in cfg.get("samples", []):
        if isinstance(s, (int, float)):
            samples.append((float(s),))
        else:
            samples.append(tuple(float(v) for v in s))
        if len(samples[-1]) != len(slow):
            raise ConfigError("each sample must have one value per slow variable")
    try:
        spec = RunSpec(
            fast_vars=fast,
            slow_vars=slow,
            f_sources=f_src,
            g_sources=g_src,
            params=tuple(params),
            eps0=eps0,
            Y=Y,
            subdivisions=subs,
            branches=tuple(branches),
            M=float(cfg.get("M", 10.0)),
            smoothness=bool(cfg.get("smoothness", False)),
            refine_depth=int(cfg.get("refine_depth", 6)),
            jobs=max(1, int(cfg.get("jobs", 1))),
            samples=tuple(samples),
        )
        spec.build_system()  # surfaces expression and declaration errors early
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from exc
    return spec


# -- serialization -----------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _pair_json(pair):
    return [_fmt(pair[0]), _fmt(pair[1])]


def _eigen_json(rec):
    return {
        "kind": rec.kind,
        "lambda_re": _pair_json(rec.lambda_re),
        "lambda_im": _pair_json(rec.lambda_im),
        "u_re": [_pair_json(p) for p in rec.u_re],
        "u_im": [_pair_json(p) for p in rec.u_im],
        "anchor": rec.anchor,
    }


def _cone_json(rec):
    return {
        "kind": rec.kind,
        "M": rec.M,
        "holds": rec.holds,
        "margin_graph": rec.margin_graph,
        "margin_cone": rec.margin_cone,
    }


def _cell_json(o):
    rec = {
        "index": list(o.index),
        "sub": o.sub,
        "cell": [_pair_json(p) for p in o.cell],
        "status": o.status,
        "detail": o.detail,
    }
    if not o.ok and not o.x_bar:
        return rec
    rec.update(
        {
            "x_bar": [_fmt(v) for v in o.x_bar],
            "lam_sample": [[_fmt(re), _fmt(im)] for re, im in o.lam_sample],
            "P": [[_fmt(v) for v in row] for row in o.P],
            "direction_kinds": list(o.direction_kinds),
            "n_u": o.n_u,
            "seed_box": [_pair_json(p) for p in o.seed_box],
            "seed_delta": [_pair_json(p) for p in o.seed_delta],
            "dir_bounds": [_pair_json(p) for p in o.dir_bounds],
            "gershgorin_disjoint": o.gersh_disjoint,
            "eigenpairs": [_eigen_json(e) for e in o.eigen],
            "seed_face_margin": o.seed_face_margin,
            "seed_cones": [_cone_json(c) for c in o.seed_cones],
            "face_labels": list(o.face_labels),
        }
    )
    if o.rates:
        rec["rates"] = {k: v for k, v in o.rates}
        rec["k"] = o.k
        rec["k_status"] = o.k_status
        rec["k_floor_ratios"] = [
            None if r is None else r for r in o.k_ratios
        ]
    if o.target_box:
        rec.update(
            {
                "target_box": [_pair_json(p) for p in o.target_box],
                "target_face_margin": o.target_face_margin,
                "target_cones": [_cone_json(c) for c in o.target_cones],
                "inclusion_margins": list(o.inclusion_margins),
                "seed_in_target_interior": o.seed_in_target_interior,
            }
        )
    if o.cone_records:
        rec["cone_neighborhoods"] = [_cone_json(c) for c in o.cone_records]
    return rec


def _branch_json(b, branch_spec: BranchSpec, mode: str):
    failures = [
        {
            "index": list(o.index),
            "sub": o.sub,
            "stage": o.status,
            "detail": o.detail,
        }
        for o in list(b.outcomes) + list(b.samples)
        if not o.ok
    ]
    rec = {
        "name": b.name,
        "ok": b.ok,
        "cells_total": len(b.outcomes),
        "cells_certified": sum(1 for o in b.outcomes if o.ok),
        "failures": failures,
        "k": b.k,
        "k_status": b.k_status,
        "glue": None
        if b.glue is None
        else {
            "connected": b.glue.connected,
            "consistent": b.glue.consistent,
            "span": [_pair_json(p) for p in b.glue.span],
            "pairs_checked": b.glue.pairs_checked,
            "detail": b.glue.detail,
        },
        "cells": [_cell_json(o) for o in b.outcomes],
        "samples": [_cell_json(o) for o in b.samples],
    }
    if mode in ("tube", "cone"):
        rec["neighborhood"] = {
            "kind": "tubular" if mode == "tube" else "conic+star",
            "eta_u": branch_spec.eta_u,
            "eta_s": branch_spec.eta_s,
            "fast_exit": "union of unstable faces a_j = +/- extent over all cells",
            "fast_entrance": "union of stable faces b_j = +/- extent over all cells",
        }
        if mode == "cone":
            rec["neighborhood"].update(
                {
                    "M_u": branch_spec.M_u,
                    "M_s": branch_spec.M_s,
                    "l_u": branch_spec.l_u,
                    "l_s": branch_spec.l_s,
                    "star": "union of the unstable and stable conic neighborhoods",
                    "conic_exit_unstable": "R(eta_u + l_u, eta_s + l_u/M_u) fast exit",
                    "conic_entrance_stable": "R(eta_u + l_s/M_s, eta_s + l_s) fast entrance",
                }
            )
    return rec


def build_report(cfg: dict, spec: RunSpec, result: RunResult, elapsed: float):
    branch_by_name = {b.name: b for b in spec.branches}
    return {
        "schema": SCHEMA_REPORT,
        "meta": {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "elapsed_seconds": elapsed,
            "jobs": spec.jobs,
        },
        "mode": result.mode,
        "config": cfg,
        "summary": {
            "ok": result.ok,
            "branches": {
                b.name: {"ok": b.ok, "k": b.k, "k_status": b.k_status}
                for b in result.branches
            },
        },
        "branches": [
            _branch_json(b, branch_by_name[b.name], result.mode)
            for b in result.branches
        ],
    }


def write_reports(outdir: Path, report: dict, result: RunResult, spec: RunSpec):
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "report.json", "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")

    l = len(spec.slow_vars)
    with open(outdir / "cells.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        header = ["branch", "index", "sub", "status"]
        header += [f"y{d}_lo" for d in range(l)] + [f"y{d}_hi" for d in range(l)]
        header += ["k", "P_mid", "seed_extents", "target_extents", "face_labels"]
        wr.writerow(header)
        for b in result.branches:
            for o in b.outcomes:
                row = [b.name, ";".join(map(str, o.index)), o.sub, o.status]
                row += [_fmt(p[0]) for p in o.cell] + [_fmt(p[1]) for p in o.cell]
                row.append(o.k if o.rates else "")
                row.append(
                    ";".join(_fmt(v) for r in o.P for v in r) if o.P else ""
                )
                row.append(
                    ";".join(_fmt(p[1] - p[0]) for p in o.seed_box)
                    if o.seed_box
                    else ""
                )
                row.append(
                    ";".join(_fmt(p[1] - p[0]) for p in o.target_box)
                    if o.target_box
                    else ""
                )
                row.append("|".join(o.face_labels))
                wr.writerow(row)

    with open(outdir / "eigenpairs.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        n = len(spec.fast_vars)
        header = ["branch", "index", "sub", "pair", "kind",
                  "lambda_re_lo", "lambda_re_hi", "lambda_im_lo", "lambda_im_hi"]
        for i in range(n):
            header += [f"u{i}_re_lo", f"u{i}_re_hi", f"u{i}_im_lo", f"u{i}_im_hi"]
        wr.writerow(header)
        for b in result.branches:
            for tag, outs in (("cell", b.outcomes), ("sample", b.samples)):
                for o in outs:
                    for j, e in enumerate(o.eigen):
                        row = [
                            b.name,
                            ("s:" if tag == "sample" else "") + ";".join(map(str, o.index)),
                            o.sub,
                            j,
                            e.kind,
                            _fmt(e.lambda_re[0]),
                            _fmt(e.lambda_re[1]),
                            _fmt(e.lambda_im[0]),
                            _fmt(e.lambda_im[1]),
                        ]
                        for i in range(n):
                            row += [
                                _fmt(e.u_re[i][0]),
                                _fmt(e.u_re[i][1]),
                                _fmt(e.u_im[i][0]),
                                _fmt(e.u_im[i][1]),
                            ]
                        wr.writerow(row)

    if spec.smoothness:
        with open(outdir / "smoothness.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(
                ["branch"]
                + [f"y{d}_center" for d in range(l)]
                + ["k", "k_status"]
            )
            for b in result.branches:
                for o in b.outcomes:
                    centers = [_fmt(0.5 * (p[0] + p[1])) for p in o.cell]
                    wr.writerow([b.name] + centers + [o.k, o.k_status])


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="slowtube",
        description="Verified tubular, conic and star-shaped neighborhoods "
        "of slow manifolds for fast-slow ODE systems.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("bundle", "validate seeds and eigenpair families"),
        ("tube", "validate a tubular neighborhood with radii eta"),
        ("cone", "validate conic and star-shaped neighborhoods"),
        ("smoothness", "tube run with rate-condition smoothness orders"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, help="path to a JSON config file")
        p.add_argument(
            "--preset", choices=sorted(presets().keys()), help="built-in setup"
        )
        p.add_argument("--out", type=str, default="slowtube-out")
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--refine-depth", type=int, default=None)
        p.add_argument("--smoothness", action="store_true")
        p.add_argument(
            "--subdivisions",
            type=str,
            default=None,
            help="comma-separated override, one entry per slow dimension",
        )
        p.add_argument(
            "--y-range",
            type=str,
            default=None,
            help="override of the slow box as lo:hi[,lo:hi...]",
        )
    sub.add_parser("preset-list", help="list built-in presets")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "preset-list":
        for name, cfg in sorted(presets().items()):
            sysc = cfg["system"]
            print(
                f"{name}: fast={sysc['fast_vars']} slow={sysc['slow_vars']} "
                f"eps0={sysc['eps0']} cells={cfg['subdivisions']} "
                f"branches={[b['name'] for b in cfg['branches']]}"
            )
        return 0

    try:
        if args.config and args.preset:
            raise ConfigError("give either --config or --preset, not both")
        if args.config:
            cfg = load_config(args.config)
        elif args.preset:
            cfg = presets()[args.preset]
        else:
            raise ConfigError("one of --config or --preset is required")
        if args.jobs is not None:
            cfg = {**cfg, "jobs": args.jobs}
        if args.refine_depth is not None:
            cfg = {**cfg, "refine_depth": args.refine_depth}
        if args.smoothness or args.command == "smoothness":
            cfg = {**cfg, "smoothness": True}
        if args.subdivisions:
            cfg = {**cfg, "subdivisions": [int(s) for s in args.subdivisions.split(",")]}
        if args.y_range:
            pairs = []
            for chunk in args.y_range.split(","):
                lo, hi = chunk.split(":")
                pairs.append([float(lo), float(hi)])
            cfg = {**cfg, "Y": pairs}
        spec = spec_from_config(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    mode = {"bundle": "bundle", "tube": "tube", "cone": "cone", "smoothness": "tube"}[
        args.command
    ]
    t0 = time.time()
    result = run(spec, mode)
    elapsed = time.time() - t0
    report = build_report(cfg, spec, result, elapsed)
    write_reports(Path(args.out), report, result, spec)

    total = sum(len(b.outcomes) for b in result.branches)
    certified = sum(1 for b in result.branches for o in b.outcomes if o.ok)
    print(f"mode={result.mode} cells={total} certified={certified} ok={result.ok}")
    for b in result.branches:
        extra = f" k={b.k}" if spec.smoothness else ""
        print(f"  branch {b.name}: ok={b.ok}{extra}")
        if not b.ok:
            fails = [o for o in list(b.outcomes) + list(b.samples) if not o.ok]
            for o in fails[:5]:
                print(f"    cell {o.index}{o.sub} failed at {o.status}: {o.detail}")
            if len(fails) > 5:
                print(f"    ... and {len(fails) - 5} more")
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
