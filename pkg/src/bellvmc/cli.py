"""Command-line front end: train / ed / bound / scan.

A run is described by a flat configuration (inequality family, system size,
measurement parameters, tying scheme, optimizer and sampler settings).  The
same keys can come from a JSON file (``--config``) or from flags, flags
winning; the fully resolved configuration is embedded in every JSON output
so a result file is self-describing.  Output directory resolution order:
``--out``, the BELLVMC_OUT environment variable, then ``./runs``.

Exit codes: 0 ok, 2 usage/config error, 3 numeric failure, 4 capacity.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

from .ed import min_eigenpair, save_ed_result
from .errors import CapacityError, NumericsError
from .inequalities import (brute_force_classical_min, build_i1_hamiltonian,
                           build_i2, build_i3, classical_bound_i1,
                           compile_bell_operator, i2_settings_random,
                           i3_settings)
from .rbm import SCHEME_KINDS, TyingScheme
from .sampler import SamplerConfig
from .sr import SrConfig, train

ENV_OUT = "BELLVMC_OUT"
BOUND_MATCH_TOL = 1e-9

INEQ_KEYS = {"i1": ("delta", "Delta"), "i2": ("theta", "eps"), "i3": ("theta",)}
SCHEME_DEFAULT = {"i1": "short_range", "i3": "partial_symmetric"}

_DEFAULTS = {
    "delta": 0.9, "Delta": 1.0, "theta": 0.0, "eps": 0.0,
    "iters": 300, "samples": 1024, "chains": 32, "seed": 0,
    "warmup": 100, "sweeps_per_sample": 1,
    "eta0": 0.05, "eta_decay": 0.995,
    "lambda0": 100.0, "lambda_decay": 0.9, "lambda_min": 1e-4,
    "solver": "auto", "init_scale": 0.05,
}

# keys accepted in a config file (flag-name keys plus optimizer/sampler knobs)
CONFIG_KEYS = set(_DEFAULTS) | {
    "ineq", "n", "scheme", "alpha", "range", "out", "move", "sector",
    "scaled_diag_shift",
}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument
    g("--ineq", choices=("i1", "i2", "i3"), help="inequality family")
    g("--n", type=int, help="number of sites/parties")
    g("--delta", type=float, help="i1 bond alternation in [-1, 1]")
    g("--Delta", type=float, help="i1 anisotropy in [-3, 3]")
    g("--theta", type=float, help="measurement angle (i2, i3)")
    g("--eps", type=float, help="i2 per-party angle jitter half-width")
    g("--scheme", choices=SCHEME_KINDS, help="parameter-tying scheme")
    g("--alpha", type=int, help="hidden-unit density")
    g("--range", type=int, dest="coupling_range", metavar="R",
      help="short_range coupling radius")
    g("--iters", type=int, help="optimizer iterations")
    g("--samples", type=int, help="samples per iteration")
    g("--chains", type=int, help="parallel Metropolis chains")
    g("--seed", type=int, help="global seed (chains, init, settings draw)")
    g("--config", help="JSON config file; flags override its fields")
    g("--out", help=f"output directory (default ${ENV_OUT} or ./runs)")

    parser = argparse.ArgumentParser(
        prog="bellvmc",
        description="Variational search for quantum violations of "
                    "multipartite Bell inequalities.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common],
                   help="minimize the Bell operator with an RBM ansatz")
    sub.add_parser("ed", parents=[common],
                   help="exact minimum eigenvalue of the Bell operator")
    sub.add_parser("bound", parents=[common],
                   help="classical bound: formula and brute-force check")
    scan = sub.add_parser("scan", parents=[common],
                          help="sweep one axis; train + ED per grid point")
    scan.add_argument("--axis", choices=("Delta", "theta", "N"), required=True)
    scan.add_argument("--grid", required=True,
                      help="comma-separated grid values")
    return parser


def resolve_config(args) -> dict:
    cfg = dict(_DEFAULTS)
    cfg["move"] = None
    cfg["sector"] = None
    cfg["scaled_diag_shift"] = True
    if args.config is not None:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}")
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(doc) - CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(doc)
    for key in ("ineq", "n", "delta", "Delta", "theta", "eps", "scheme",
                "alpha", "iters", "samples", "chains", "seed", "out"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    if args.coupling_range is not None:
        cfg["range"] = args.coupling_range

    if cfg.get("ineq") not in INEQ_KEYS:
        raise UsageError("--ineq must be given as i1, i2 or i3")
    if not isinstance(cfg.get("n"), int) or cfg["n"] < 2:
        raise UsageError("--n must be an integer >= 2")
    if cfg.get("scheme") is None:
        cfg["scheme"] = SCHEME_DEFAULT.get(
            cfg["ineq"],
            "perm_symmetric" if cfg["eps"] == 0.0 else "dense")
    if cfg["scheme"] not in SCHEME_KINDS:
        raise UsageError(f"scheme must be one of {SCHEME_KINDS}")
    # i1 conserves total sigma^z, so sample inside the ground sector by
    # default; explicit move/sector settings in a config file win
    if cfg["move"] is None:
        if cfg["ineq"] == "i1":
            cfg["move"], cfg["sector"] = "pair_exchange", 0
        else:
            cfg["move"] = "single_flip"
    if cfg.get("out") is None:
        cfg["out"] = os.environ.get(ENV_OUT, "runs")

    # drop keys that do not apply to the chosen family
    for family, keys in INEQ_KEYS.items():
        if family != cfg["ineq"]:
            for key in keys:
                if key not in INEQ_KEYS[cfg["ineq"]]:
                    cfg.pop(key, None)
    return cfg


def build_problem(cfg: dict):
    """(operator, classical bound, extras) for the resolved configuration."""
    ineq_name, n = cfg["ineq"], cfg["n"]
    if ineq_name == "i1":
        op = build_i1_hamiltonian(n, cfg["delta"], cfg["Delta"])
        return op, classical_bound_i1(n, cfg["delta"], cfg["Delta"]), {}
    if ineq_name == "i2":
        ineq = build_i2(n)
        settings = i2_settings_random(n, cfg["theta"], cfg["eps"], cfg["seed"])
        angles = [math.atan2(settings.get(k, 1).bloch[0],
                             settings.get(k, 1).bloch[2]) for k in range(1, n + 1)]
        extras = {"ineq_obj": ineq, "measurement_angles": angles}
        return compile_bell_operator(ineq, settings), ineq.classical_bound, extras
    ineq = build_i3(n)
    settings = i3_settings(n, cfg["theta"])
    return compile_bell_operator(ineq, settings), ineq.classical_bound, \
        {"ineq_obj": ineq}


def _public_config(cfg: dict, extras: dict) -> dict:
    doc = {k: v for k, v in cfg.items() if v is not None or k == "sector"}
    if "measurement_angles" in extras:
        doc["measurement_angles"] = extras["measurement_angles"]
    return doc


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _train_once(cfg, op, out_dir=None):
    scheme = TyingScheme.make(cfg["scheme"], cfg["n"], alpha=cfg.get("alpha"),
                              coupling_range=cfg.get("range"))
    sr = SrConfig(iterations=cfg["iters"],
                  samples_per_iteration=cfg["samples"],
                  eta0=cfg["eta0"], eta_decay=cfg["eta_decay"],
                  lambda0=cfg["lambda0"], lambda_decay=cfg["lambda_decay"],
                  lambda_min=cfg["lambda_min"], solver=cfg["solver"],
                  scaled_diag_shift=cfg["scaled_diag_shift"],
                  init_scale=cfg["init_scale"], seed=cfg["seed"])
    sampler = SamplerConfig(n_chains=cfg["chains"],
                            sweeps_per_sample=cfg["sweeps_per_sample"],
                            warmup_sweeps=cfg["warmup"],
                            move_kind=cfg["move"], sector=cfg["sector"])
    curve_path = checkpoint_path = None
    if out_dir is not None:
        curve_path = os.path.join(out_dir, "curve.jsonl")
        checkpoint_path = os.path.join(out_dir, "checkpoint.json")
    return train(op, scheme, sr, sampler, curve_path=curve_path,
                 checkpoint_path=checkpoint_path)


def cmd_train(cfg) -> int:
    op, bound, extras = build_problem(cfg)
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    _, curve = _train_once(cfg, op, out_dir=out_dir)
    final = curve.points[-1].estimate
    violated = bool(final.mean + 3.0 * final.stderr < bound)
    summary = {
        "config": _public_config(cfg, extras),
        "qv_final": final.mean,
        "stderr": final.stderr,
        "classical_bound": bound,
        "violated": violated,
        "margin": bound - final.mean,
    }
    _write_json(os.path.join(out_dir, "summary.json"), summary)
    print(f"qv_final={final.mean:.6f} stderr={final.stderr:.6f} "
          f"bound={bound:g} violated={str(violated).lower()}")
    return 0


def cmd_ed(cfg) -> int:
    op, bound, extras = build_problem(cfg)
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    result = min_eigenpair(op, seed=cfg["seed"])
    save_ed_result(os.path.join(out_dir, "eigenvector.f64"), result)
    doc = {"config": _public_config(cfg, extras),
           "classical_bound": bound,
           "violated": bool(result.min_eigenvalue < bound - 1e-12)}
    doc.update(result.summary())
    _write_json(os.path.join(out_dir, "ed.json"), doc)
    print(f"min_eigenvalue={result.min_eigenvalue:.12f} bound={bound:g} "
          f"residual={result.residual:.3e} dim={result.dim}")
    return 0


def cmd_bound(cfg) -> int:
    op, bound, extras = build_problem(cfg)
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    doc = {"config": _public_config(cfg, extras), "formula_bound": bound}
    rc = 0
    if cfg["ineq"] == "i1":
        doc["brute_force_bound"] = None
        doc["note"] = "formula-only"
        print(f"formula={bound:g} (formula-only)")
    else:
        brute = brute_force_classical_min(extras["ineq_obj"])
        match = abs(brute - bound) <= BOUND_MATCH_TOL
        doc["brute_force_bound"] = brute
        doc["match"] = match
        print(f"formula={bound:g} brute_force={brute:g} "
              f"match={str(match).lower()}")
        if not match:
            print("bound mismatch exceeds 1e-9", file=sys.stderr)
            rc = 3
    _write_json(os.path.join(out_dir, "bound.json"), doc)
    return rc


def _parse_grid(axis: str, text: str):
    try:
        if axis == "N":
            return [int(v) for v in text.split(",") if v.strip()]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad grid value: {exc}")


def cmd_scan(cfg, axis: str, grid) -> int:
    if not grid:
        raise UsageError("scan grid is empty")
    if axis == "Delta" and cfg["ineq"] != "i1":
        raise UsageError("Delta scans apply to i1 only")
    if axis == "theta" and cfg["ineq"] == "i1":
        raise UsageError("theta scans apply to i2/i3 only")
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    rc = 0
    for value in grid:
        point = dict(cfg)
        point["Delta" if axis == "Delta" else
              "theta" if axis == "theta" else "n"] = value
        row = {"axis": value, "qv": "", "stderr": "", "ed": "", "bound": "",
               "violated": ""}
        try:
            op, bound, _ = build_problem(point)
            row["bound"] = repr(bound)
            _, curve = _train_once(point, op)
            final = curve.points[-1].estimate
            row["qv"] = repr(final.mean)
            row["stderr"] = repr(final.stderr)
            row["violated"] = str(
                final.mean + 3.0 * final.stderr < bound).lower()
            try:
                row["ed"] = repr(min_eigenpair(op, seed=cfg["seed"]).min_eigenvalue)
            except CapacityError:
                pass
        except (ValueError, NumericsError, CapacityError) as exc:
            print(f"{axis}={value}: {exc}", file=sys.stderr)
            code = _exit_code(exc)
            rc = rc or code
        rows.append(row)
        print(f"{axis}={value} qv={row['qv'] or 'fail'} ed={row['ed'] or '-'} "
              f"bound={row['bound'] or '-'} violated={row['violated'] or '-'}")
    with open(os.path.join(out_dir, "scan.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["axis", "qv", "stderr", "ed",
                                                "bound", "violated"],
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    _write_json(os.path.join(out_dir, "scan_config.json"),
                {"config": _public_config(cfg, {}), "axis": axis,
                 "grid": list(grid)})
    return rc


def _exit_code(exc) -> int:
    if isinstance(exc, CapacityError):
        return 4
    if isinstance(exc, NumericsError):
        return 3
    return 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "ed":
            return cmd_ed(cfg)
        if args.command == "bound":
            return cmd_bound(cfg)
        return cmd_scan(cfg, args.axis, _parse_grid(args.axis, args.grid))
    except (UsageError, ValueError, NumericsError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
