"""Command line front end: generate, corrupt, discover, sweep, validate.

Exit codes: 0 on success, 1 on numerical failure (blow-up, failed checks),
2 on usage or configuration errors.  All artifact writes go through a
temporary file plus rename, so readers never observe partial output.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import solvers
from .gridfield import NoiseSpec, add_noise, export_csv, load_field, save_field
from .regression import (DEFAULT_GAMMA, DEFAULT_K, DEFAULT_M,
                         ensemble_discover)
from .validation import run_validation
from .weak import builtin_reference, default_weight

GENERATE_SYSTEMS = ("ks", "lambda_omega", "kolmogorov")
DISCOVER_SYSTEMS = ("ks", "kolmogorov", "lambda_omega",
                    "lambda_omega_u", "lambda_omega_v")
CSV_COLUMNS = ("system", "sigma", "member_count", "K", "coeff_label", "c_ref",
               "c_mean", "c_min", "c_max", "delta_mean", "delta_min",
               "delta_max", "success_rate")


class UsageError(Exception):
    pass


def _atomic_write(path, writer):
    """Run writer against a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".partial-")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _atomic_text(path, text):
    def writer(tmp):
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
    _atomic_write(path, writer)


def _save_field_atomic(field, path):
    _atomic_write(path, lambda tmp: save_field(field, tmp))


def _write_sidecar(path, meta):
    lines = [f"{key}={value}" for key, value in meta.items()]
    _atomic_text(path + ".meta", "\n".join(lines) + "\n")


def _parse_value(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _parse_sets(pairs):
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        out[key.strip()] = _parse_value(value.strip())
    return out


def _load_config(path):
    """INI file with [run] and [solver] sections of key=value pairs."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # solver parameter names are case sensitive
    read = parser.read(path)
    if not read:
        raise UsageError(f"cannot read config file {path}")
    run = {k: _parse_value(v) for k, v in parser.items("run")} \
        if parser.has_section("run") else {}
    solver = {k: _parse_value(v) for k, v in parser.items("solver")} \
        if parser.has_section("solver") else {}
    return run, solver


def _solver_params(system, overrides):
    cls = solvers.SOLVER_PARAMS[system]
    valid = {f.name for f in dataclasses.fields(cls)}
    bad = set(overrides) - valid
    if bad:
        raise UsageError(f"unknown solver parameter(s) for {system}: "
                         f"{', '.join(sorted(bad))}")
    try:
        return cls(**overrides)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad solver parameters: {exc}") from exc


def _resolve(args, key, config_run, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config_run:
        return config_run[key]
    return default


def _parse_floats(text):
    try:
        return tuple(float(part) for part in str(text).split(",") if part != "")
    except ValueError as exc:
        raise UsageError(f"bad numeric list {text!r}") from exc


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float) and not np.isfinite(value):
        return "nan"
    return repr(float(value)) if isinstance(value, float) else str(value)


# ---------------------------------------------------------------------------
# generate / corrupt


def _generate_base_system(system):
    return "lambda_omega" if system.startswith("lambda_omega") else system


def cmd_generate(args):
    config_run, config_solver = _load_config(args.config) if args.config \
        else ({}, {})
    overrides = dict(config_solver)
    overrides.update(_parse_sets(args.set))
    params = _solver_params(args.system, overrides)
    result = solvers.solve(args.system, params)
    field = result[0] if args.system == "kolmogorov" else result
    _save_field_atomic(field, args.out)
    meta = solvers.solver_metadata(args.system, params)
    meta["shape"] = "x".join(str(n) for n in field.shape)
    meta["components"] = field.ncomp
    _write_sidecar(args.out, meta)
    if args.csv:
        _atomic_write(args.csv, lambda tmp: export_csv(field, tmp))
    print(f"wrote {args.out}: shape {field.shape}, {field.ncomp} component(s)")
    return 0


def cmd_corrupt(args):
    field = load_field(getattr(args, "in"))
    if args.sigma < 0:
        raise UsageError("sigma must be >= 0")
    noisy = add_noise(field, NoiseSpec(args.sigma, args.seed))
    _save_field_atomic(noisy, args.out)
    _write_sidecar(args.out, {"source": getattr(args, "in"),
                              "sigma": args.sigma, "noise_seed": args.seed})
    print(f"wrote {args.out}: sigma={args.sigma} seed={args.seed}")
    return 0


# ---------------------------------------------------------------------------
# discover / sweep


def _equation_list(system):
    if system == "lambda_omega":
        return ["lambda_omega_u", "lambda_omega_v"]
    return [system]


def _discover_options(args, config_run):
    halfwidths = _resolve(args, "halfwidths", config_run, None)
    if halfwidths is not None and not isinstance(halfwidths, tuple):
        halfwidths = _parse_floats(halfwidths)
    return {
        "K": int(_resolve(args, "k", config_run, DEFAULT_K)),
        "M": int(_resolve(args, "m", config_run, DEFAULT_M)),
        "gamma": float(_resolve(args, "gamma", config_run, DEFAULT_GAMMA)),
        "seed": int(_resolve(args, "seed", config_run, 0)),
        "halfwidths": halfwidths,
        "p": _resolve(args, "p", config_run, None),
        "q": _resolve(args, "q", config_run, None),
        "method": _resolve(args, "method", config_run, "auto"),
    }


def _run_equation(field, equation, opts, sigma):
    weight = default_weight(equation, p=opts["p"], q=opts["q"])
    report = ensemble_discover(
        field, equation, K=opts["K"], M=opts["M"], gamma=opts["gamma"],
        seed=opts["seed"], halfwidths=opts["halfwidths"], weight=weight,
        method=opts["method"])
    reference, _ = builtin_reference(equation)
    rows = []
    for i, label in enumerate(report.labels):
        rows.append({
            "system": equation, "sigma": sigma,
            "member_count": report.member_count, "K": opts["K"],
            "coeff_label": label, "c_ref": reference[i],
            "c_mean": report.coeff_mean[i], "c_min": report.coeff_min[i],
            "c_max": report.coeff_max[i], "delta_mean": report.delta_mean[i],
            "delta_min": report.delta_min[i], "delta_max": report.delta_max[i],
            "success_rate": report.success_rate,
        })
    block = {
        "system": equation,
        "sigma": sigma,
        "labels": list(report.labels),
        "reference": report.reference,
        "success_rate": report.success_rate,
        "snapped_halfwidths": list(report.snapped_halfwidths),
        "column_norms": report.column_norms,
        "coeff_mean": report.coeff_mean,
        "coeff_min": report.coeff_min,
        "coeff_max": report.coeff_max,
        "delta_mean": report.delta_mean,
        "delta_min": report.delta_min,
        "delta_max": report.delta_max,
        "members": [{
            "seed_key": [opts["seed"], m],
            "coefficients": out.result.coefficients,
            "active_labels": [lab for lab, a in zip(report.labels,
                                                    out.result.active) if a],
            "iterations": out.result.iterations,
            "residual_norm": out.result.residual_norm,
            "matched": out.matched,
            "spurious": list(out.spurious),
            "missing": list(out.missing),
        } for m, out in enumerate(report.members)],
    }
    return rows, block


def _write_report(base, payload, rows):
    _atomic_text(base + ".json", json.dumps(payload, indent=2,
                                            default=_json_default) + "\n")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    _atomic_text(base + ".csv", buf.getvalue())


def cmd_discover(args):
    config_run, _ = _load_config(args.config) if args.config else ({}, {})
    opts = _discover_options(args, config_run)
    field = load_field(getattr(args, "in"))
    rows, blocks = [], []
    for equation in _equation_list(args.system):
        eq_rows, block = _run_equation(field, equation, opts, args.sigma)
        rows.extend(eq_rows)
        blocks.append(block)
    payload = {
        "command": "discover",
        "input": getattr(args, "in"),
        "options": opts,
        "seed_scheme": "member m draws domains from seed sequence "
                       "[master_seed, m]",
        "results": blocks,
    }
    _write_report(args.out, payload, rows)
    for block in blocks:
        rate = block["success_rate"]
        print(f"{block['system']}: success_rate="
              f"{'n/a' if rate is None else rate}")
    print(f"wrote {args.out}.json, {args.out}.csv")
    return 0


def _noise_seed(master, index):
    return int(np.random.SeedSequence([master, 0x5EED, index])
               .generate_state(1)[0])


def cmd_sweep(args):
    config_run, config_solver = _load_config(args.config) if args.config \
        else ({}, {})
    opts = _discover_options(args, config_run)
    sigmas = _parse_floats(_resolve(args, "sigmas", config_run, "0"))
    if not sigmas:
        raise UsageError("need at least one sigma")
    if getattr(args, "in"):
        base_field = load_field(getattr(args, "in"))
    else:
        overrides = dict(config_solver)
        overrides.update(_parse_sets(args.set))
        base = _generate_base_system(args.system)
        params = _solver_params(base, overrides)
        result = solvers.solve(base, params)
        base_field = result[0] if base == "kolmogorov" else result
    rows, blocks = [], []
    for i, sigma in enumerate(sigmas):
        nseed = _noise_seed(opts["seed"], i)
        noisy = add_noise(base_field, NoiseSpec(sigma, nseed))
        for equation in _equation_list(args.system):
            eq_rows, block = _run_equation(noisy, equation, opts, sigma)
            block["noise_seed"] = nseed
            rows.extend(eq_rows)
            blocks.append(block)
            rate = block["success_rate"]
            print(f"sigma={sigma} {equation}: success_rate="
                  f"{'n/a' if rate is None else rate}")
    payload = {
        "command": "sweep",
        "input": getattr(args, "in") or "(generated)",
        "options": opts,
        "sigmas": list(sigmas),
        "noise_seed_scheme": "sigma index i uses seed sequence "
                             "[master_seed, 0x5EED, i]",
        "seed_scheme": "member m draws domains from seed sequence "
                       "[master_seed, m]",
        "results": blocks,
    }
    _write_report(args.out, payload, rows)
    print(f"wrote {args.out}.json, {args.out}.csv")
    return 0


def cmd_validate(args):
    checks = run_validation(forced_polynomial_time=args.forced_polynomial_time)
    failed = [c for c in checks if not c.passed]
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{status} {check.name}: {check.detail}")
    if args.out:
        payload = {"command": "validate",
                   "checks": [dataclasses.asdict(c) for c in checks],
                   "failed": len(failed)}
        _atomic_text(args.out + ".json",
                     json.dumps(payload, indent=2, default=_json_default) + "\n")
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="weakpde",
        description="Weak-form recovery of PDE coefficients from gridded "
                    "space-time data, with built-in surrogate generators.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_discover(p):
        p.add_argument("--k", type=int, help="integration domains per member")
        p.add_argument("--m", type=int, help="ensemble members")
        p.add_argument("--gamma", type=float, help="pruning threshold fraction")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--halfwidths",
                       help="comma-separated per-axis box halfwidths")
        p.add_argument("--p", type=int, help="envelope exponent override")
        p.add_argument("--q", type=int, help="temporal exponent override")
        p.add_argument("--method", choices=("auto", "direct", "table"),
                       help="assembly strategy")
        p.add_argument("--config", help="INI file with [run]/[solver] sections")

    gen = sub.add_parser("generate", help="integrate a built-in system")
    gen.add_argument("--system", required=True, choices=GENERATE_SYSTEMS)
    gen.add_argument("--out", required=True, help="output field path")
    gen.add_argument("--csv", help="also export a CSV table of the field")
    gen.add_argument("--config", help="INI file with [solver] section")
    gen.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="solver parameter override (repeatable)")
    gen.set_defaults(func=cmd_generate)

    cor = sub.add_parser("corrupt", help="add white gaussian noise to a field")
    cor.add_argument("--in", required=True, help="input field path")
    cor.add_argument("--out", required=True, help="output field path")
    cor.add_argument("--sigma", type=float, required=True)
    cor.add_argument("--seed", type=int, default=0)
    cor.set_defaults(func=cmd_corrupt)

    dis = sub.add_parser("discover", help="fit sparse coefficients to a field")
    dis.add_argument("--system", required=True, choices=DISCOVER_SYSTEMS)
    dis.add_argument("--in", required=True, help="input field path")
    dis.add_argument("--out", required=True, help="report base path")
    dis.add_argument("--sigma", type=float, default=0.0,
                     help="noise level label recorded in the report")
    add_common_discover(dis)
    dis.set_defaults(func=cmd_discover)

    swp = sub.add_parser("sweep", help="corrupt at several noise levels and "
                                       "fit each")
    swp.add_argument("--system", required=True, choices=DISCOVER_SYSTEMS)
    swp.add_argument("--in", help="clean input field (generated when absent)")
    swp.add_argument("--out", required=True, help="report base path")
    swp.add_argument("--sigmas", help="comma-separated noise levels")
    swp.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="solver parameter override (repeatable)")
    add_common_discover(swp)
    swp.set_defaults(func=cmd_sweep)

    val = sub.add_parser("validate", help="run the self-check batteries")
    val.add_argument("--out", help="report base path")
    val.add_argument("--forced-polynomial-time", action="store_true",
                     help=argparse.SUPPRESS)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main(argv=None))
