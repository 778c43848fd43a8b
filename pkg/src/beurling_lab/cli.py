"""Batch command-line front end.

Every numeric default lives in :data:`DEFAULTS`; a JSON config file may
override any of them, and explicit flags override the config.  Outputs are
written with 17 significant digits so reruns are byte-identical (apart from
the optional ``seconds`` column of convergence reports).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import _kernels
from .counting import counting_function, fit_density
from .expansion import (TAGS, CoefficientSeries, brute_force_integers, dirichlet_multiply,
                        expand_integers, expand_reciprocal, selberg_series)
from .geodesic import geodesic_system, norms_by_trace, norms_csv, pgt_residual_profile, _trace_bound
from .moments import (SCHEDULES, AccuracyError, continuation_fast, convergence_run,
                      diagonal, eval_continuation, fejer_pair_check, moment_closed_form,
                      moment_quadrature, reports_csv, reports_json)
from .primes import (DomainError, GPrimeSystem, OutOfRangeError, format_real,
                     gen_jittered_system, gen_li_inverse_system, gen_rational_primes, li)

# name: (default, description)
DEFAULTS: dict[str, tuple] = {
    "epsilon": (0.25, "exponent slack in the (log N)^(2+eps) schedule and bounds"),
    "merge_tol": (1e-9, "relative log-space tolerance for merging grid points"),
    "tol": (1e-8, "relative tolerance of the quadrature engine"),
    "selberg_tol": (1e-12, "truncation tolerance for the Selberg product over k"),
    "schedule": ("logcube", "T(N) schedule: logcube or logsq_eps"),
    "steps": (4, "number of geometric N steps in a convergence run"),
    "tail_model": ("linear", "model of R(x) beyond the series cutoff: linear or mean"),
    "fejer_pairs": (100, "random (T, u) pairs checked by verify"),
    "seed": (0, "seed for generators and randomized checks"),
    "workers": (None, "numba thread count (also via BEURLING_WORKERS)"),
}

ORACLE_INDEX_LIMIT = 20
ORACLE_XMAX = 1e3


class UsageError(Exception):
    """Bad flags or configuration (exit status 2)."""


def _check_value(key: str, value):
    if key in ("epsilon", "merge_tol", "tol", "selberg_tol"):
        if not isinstance(value, (int, float)) or not 0 < value < 1:
            raise UsageError(f"{key} must be a number in (0, 1)")
    elif key == "schedule":
        if value not in SCHEDULES:
            raise UsageError(f"schedule must be one of {SCHEDULES}")
    elif key == "tail_model":
        if value not in ("linear", "mean"):
            raise UsageError("tail_model must be linear or mean")
    elif key in ("steps", "fejer_pairs"):
        if not isinstance(value, int) or value < (2 if key == "steps" else 1):
            raise UsageError(f"{key} must be a positive integer" + (" >= 2" if key == "steps" else ""))
    elif key == "seed":
        if not isinstance(value, int) or value < 0:
            raise UsageError("seed must be an unsigned integer")
    elif key == "workers":
        if value is not None and (not isinstance(value, int) or value < 1):
            raise UsageError("workers must be a positive integer")


def load_config(path: str | None) -> dict:
    """Merge a JSON config document over :data:`DEFAULTS`."""
    cfg = {k: v[0] for k, v in DEFAULTS.items()}
    if path is None:
        return cfg
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    unknown = sorted(set(doc) - set(DEFAULTS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    for k, v in doc.items():
        _check_value(k, v)
        cfg[k] = v
    return cfg


def _resolve(args, cfg: dict, key: str):
    val = getattr(args, key, None)
    if val is None:
        return cfg[key]
    _check_value(key, val)
    return val


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise UsageError(f"input file {path} does not exist") from None


def _load_system(path: str) -> GPrimeSystem:
    try:
        return GPrimeSystem.from_json(_read(path))
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"{path} is not a g-prime system: {exc}") from None


def _load_series(path: str) -> CoefficientSeries:
    try:
        return CoefficientSeries.from_json(_read(path))
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"{path} is not a coefficient series (use --format json): {exc}") from None


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


# -- system gen ----------------------------------------------------------------

def cmd_system_gen(args, cfg) -> int:
    kind = args.kind
    seed = _resolve(args, cfg, "seed")
    if kind == "rational":
        if args.xmax is None:
            raise UsageError("--kind rational needs --xmax")
        system = gen_rational_primes(args.xmax)
    elif kind == "geodesic":
        if args.xmax is None:
            raise UsageError("--kind geodesic needs --xmax")
        system = geodesic_system(args.xmax)
    else:
        count = args.count
        if count is None:
            if args.xmax is None:
                raise UsageError(f"--kind {kind} needs --count or --xmax")
            count = int(li(args.xmax))
        if kind == "li_inverse":
            system = gen_li_inverse_system(count)
        else:
            if args.alpha is None:
                raise UsageError("--kind jittered needs --alpha")
            system = gen_jittered_system(count, args.alpha, seed, scale=args.scale)
    _emit(system.to_json() + "\n", args.output)
    return 0


# -- expand --------------------------------------------------------------------

def _default_tags(system: GPrimeSystem) -> list[str]:
    return ["ruelle_b", "ruelle_c"] if system.kind == "geodesic" else ["d", "e"]


def build_series(system: GPrimeSystem, xmax: float, tag: str, merge_tol: float,
                 selberg_tol: float, K: int | None = None) -> CoefficientSeries:
    if tag in ("d", "ruelle_c"):
        return expand_integers(system, xmax, tag=tag, merge_tol=merge_tol)
    if tag in ("e", "ruelle_b"):
        return expand_reciprocal(system, xmax, tag=tag, merge_tol=merge_tol)
    if tag in ("selberg_b", "selberg_c"):
        b, c = selberg_series(system, xmax, selberg_tol, K, merge_tol)
        return b if tag == "selberg_b" else c
    raise UsageError(f"cannot expand tag {tag!r}")


def cmd_expand(args, cfg) -> int:
    system = _load_system(args.system)
    xmax = args.xmax if args.xmax is not None else system.xmax
    if xmax > system.xmax * (1 + 1e-12):
        raise UsageError(f"--xmax {xmax} exceeds the system cutoff {system.xmax}")
    tags = args.tag or _default_tags(system)
    merge_tol = _resolve(args, cfg, "merge_tol")
    selberg_tol = _resolve(args, cfg, "selberg_tol")
    ext = args.format
    texts = {}
    for tag in tags:
        s = build_series(system, xmax, tag, merge_tol, selberg_tol, args.K)
        texts[tag] = s.to_csv() if ext == "csv" else s.to_json() + "\n"
    if len(tags) == 1:
        _emit(texts[tags[0]], args.output)
    elif args.output is None:
        if ext == "json":
            raise UsageError("several tags with --format json need -o DIR")
        sys.stdout.write("".join(texts[t] for t in tags))
    else:
        for tag in tags:
            _emit(texts[tag], os.path.join(args.output, f"{tag}.{ext}"))
    return 0


# -- moment --------------------------------------------------------------------

def cmd_moment(args, cfg) -> int:
    series = _load_series(args.series)
    if args.T <= 0:
        raise UsageError("--T must be positive")
    part = series.truncate(args.N) if args.N is not None else series
    part = part.nonzero()
    out = {"N": format_real(part.xmax), "T": format_real(args.T), "entries": len(part),
           "diagonal": format_real(diagonal(part))}
    if args.method in ("closed", "both"):
        out["closed_form"] = format_real(moment_closed_form(part, args.T))
    if args.method in ("quadrature", "both"):
        val, err = moment_quadrature(part, args.T, _resolve(args, cfg, "tol"), return_error=True)
        out["quadrature"] = format_real(val)
        out["quadrature_error"] = format_real(err)
    _emit(_dumps(out), args.output)
    return 0


# -- continue-eval ---------------------------------------------------------------

def cmd_continue_eval(args, cfg) -> int:
    series = _load_series(args.series)
    if args.rho is not None:
        rho = args.rho
    else:
        lo, hi = args.fit_window if args.fit_window else (math.e, series.xmax)
        rho = fit_density(counting_function(series), (lo, hi))
    tail = _resolve(args, cfg, "tail_model")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "re", "im", "abs"])
    for t in args.t:
        if args.N is None:
            v = complex(continuation_fast(series, rho, t, tail))
        else:
            v = eval_continuation(series, rho, args.N, t, tail)
        w.writerow([format_real(t), format_real(v.real), format_real(v.imag), format_real(abs(v))])
    buf.write(f"# rho: {format_real(rho)}\n")
    _emit(buf.getvalue(), args.output)
    return 0


# -- verify --------------------------------------------------------------------

def verify_system(system: GPrimeSystem, xmax: float, merge_tol: float, fejer_pairs: int,
                  seed: int) -> list[dict]:
    """Run the invariant suite; each entry has ``check``, ``passed`` and details."""
    results = []
    d = expand_integers(system, xmax, merge_tol=merge_tol)
    e = expand_reciprocal(system, xmax, merge_tol=merge_tol)

    bad = np.flatnonzero(np.abs(e.coef) > d.coef)
    results.append({"check": "dominance", "passed": bool(bad.size == 0),
                    "grid_points": len(d), "violations": int(bad.size),
                    "first_violations": [format_real(v) for v in d.nu[bad[:5]]]})

    prod = dirichlet_multiply(d, e, xmax)
    ident = np.zeros(len(prod))
    ident[0] = 1.0
    err = float(np.max(np.abs(prod.coef - ident))) if len(prod) else 0.0
    results.append({"check": "convolution", "passed": bool(err <= 1e-9),
                    "max_abs_error": format_real(err)})

    # oracle: exhaustive enumeration on the leading <= 20 prime indices
    cum = np.cumsum(system.multiplicities)
    k = int(np.searchsorted(cum, ORACLE_INDEX_LIMIT, side="right"))
    sub_x = min(xmax, ORACLE_XMAX)
    if k:
        sub = GPrimeSystem(system.values[:k], system.multiplicities[:k], system.kind,
                           float(system.values[k - 1]))
        sub_x = min(sub_x, sub.xmax)
    ok = True
    if k and sub_x > 1:
        for recip in (False, True):
            fast = (expand_reciprocal if recip else expand_integers)(sub, sub_x, merge_tol=merge_tol)
            slow = brute_force_integers(sub, sub_x, reciprocal=recip, merge_tol=merge_tol)
            same = (len(fast) == len(slow) and np.array_equal(fast.coef, slow.coef)
                    and bool(np.all(np.abs(fast.log_nu - slow.log_nu)
                                    <= merge_tol * np.maximum(1, np.abs(slow.log_nu)))))
            ok = ok and same
    results.append({"check": "oracle_equivalence", "passed": ok,
                    "indices": int(cum[k - 1]) if k else 0, "xmax": format_real(sub_x)})

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(fejer_pairs):
        T = float(rng.uniform(1.0, 100.0))
        u = float(rng.uniform(-3.0, 3.0))
        worst = max(worst, fejer_pair_check(T, u))
    results.append({"check": "fejer_pair", "passed": bool(worst <= 1e-8), "pairs": fejer_pairs,
                    "max_residual": format_real(worst)})
    return results


def cmd_verify(args, cfg) -> int:
    system = _load_system(args.system)
    xmax = args.xmax if args.xmax is not None else system.xmax
    results = verify_system(system, xmax, _resolve(args, cfg, "merge_tol"),
                            _resolve(args, cfg, "fejer_pairs"), _resolve(args, cfg, "seed"))
    failures = [r["check"] for r in results if not r["passed"]]
    _emit(_dumps({"system": system.fingerprint(), "xmax": format_real(xmax),
                  "results": results, "failures": failures}), args.output)
    return 1 if failures else 0


# -- converge ------------------------------------------------------------------

def cmd_converge(args, cfg) -> int:
    series = _load_series(args.series)
    if args.polarization and args.rho is None:
        raise UsageError("--polarization needs --rho")
    reports = convergence_run(series, _resolve(args, cfg, "schedule"), _resolve(args, cfg, "steps"),
                              _resolve(args, cfg, "epsilon"), args.N_min, args.N_max,
                              args.quadrature, args.polarization, args.rho, _resolve(args, cfg, "tol"))
    with_time = not args.no_time
    text = reports_csv(reports, with_time) if args.format == "csv" else reports_json(reports, with_time) + "\n"
    _emit(text, args.output)
    return 0


# -- geodesic tables -------------------------------------------------------------

def cmd_geodesic_tables(args, cfg) -> int:
    if (args.xmax is None) == (args.tmax is None):
        raise UsageError("give exactly one of --xmax and --tmax")
    if args.tmax is not None:
        if args.tmax < 3:
            raise UsageError("--tmax must be >= 3")
        tmax = args.tmax
        xmax = ((tmax + math.sqrt(tmax * tmax - 4)) / 2) ** 2
    else:
        xmax = args.xmax
        tmax = _trace_bound(xmax)
    norms = norms_by_trace(tmax)
    table = norms_csv(norms)
    if args.output is None:
        sys.stdout.write(table)
        return 0
    out = Path(args.output)
    _emit(table, str(out / "norms.csv"))
    system = geodesic_system(xmax, norms)
    grid = np.geomspace(max(2.0, system.p_min), xmax, args.points)
    prof = pgt_residual_profile(system, grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "pi_minus_li", "relative"])
    for x, r, q in zip(prof.x, prof.residual, prof.relative):
        w.writerow([format_real(x), format_real(r), format_real(q)])
    _emit(buf.getvalue(), str(out / "residual_profile.csv"))
    _emit(_dumps({"xmax": format_real(xmax), "tmax": tmax, "classes": int(system.index_count),
                  "distinct_norms": len(system), "theta_hat": format_real(prof.theta_hat)}),
          str(out / "summary.json"))
    return 0


# -- report --------------------------------------------------------------------

def _rows_from(path: str) -> list[dict]:
    text = _read(path)
    if path.endswith(".json"):
        doc = json.loads(text)
        if isinstance(doc, list):
            return [dict(r) for r in doc]
        if isinstance(doc, dict) and "entries" in doc and "metadata" in doc:
            return [{"nu": nu, "a": a} for nu, a in doc["entries"]]
        if isinstance(doc, dict):
            return [{k: v for k, v in doc.items() if not isinstance(v, (list, dict))}]
        raise UsageError(f"{path}: unsupported JSON layout")
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


def merge_reports(paths: list[str]) -> tuple[list[str], list[dict]]:
    columns = ["source"]
    rows = []
    for p in paths:
        for r in _rows_from(p):
            for k in r:
                if k not in columns:
                    columns.append(k)
            rows.append({"source": os.path.basename(p), **r})
    return columns, rows


def cmd_report(args, cfg) -> int:
    columns, rows = merge_reports(args.inputs)
    if args.format == "json":
        _emit(_dumps(rows), args.output)
        return 0
    buf = io.StringIO()
    w = csv.DictWriter(buf, columns, restval="", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    _emit(buf.getvalue(), args.output)
    return 0


def cmd_config(args, cfg) -> int:
    sys.stdout.write(_dumps({"effective": cfg,
                             "documentation": {k: v[1] for k, v in DEFAULTS.items()}}))
    return 0


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beurling-lab",
                                description="Generalized primes, Dirichlet series and mean squares.")
    p.add_argument("--config", help="JSON document overriding the defaults table")
    p.add_argument("--workers", type=int, help="numba thread count")
    sub = p.add_subparsers(dest="command", required=True)

    sysp = sub.add_parser("system", help="g-prime systems")
    syssub = sysp.add_subparsers(dest="action", required=True)
    gen = syssub.add_parser("gen", help="generate a system as JSON")
    gen.add_argument("--kind", required=True, choices=["rational", "li_inverse", "jittered", "geodesic"])
    gen.add_argument("--xmax", type=float)
    gen.add_argument("--count", type=int)
    gen.add_argument("--alpha", type=float)
    gen.add_argument("--scale", type=float, default=1.0)
    gen.add_argument("--seed", type=int)
    gen.add_argument("-o", "--output")
    gen.set_defaults(func=cmd_system_gen)

    ex = sub.add_parser("expand", help="coefficient series of an Euler product")
    ex.add_argument("--system", required=True)
    ex.add_argument("--xmax", type=float)
    ex.add_argument("--tag", action="append", choices=[t for t in TAGS if t != "generic"])
    ex.add_argument("--merge-tol", dest="merge_tol", type=float)
    ex.add_argument("--selberg-tol", dest="selberg_tol", type=float)
    ex.add_argument("--K", type=int, help="explicit Selberg truncation")
    ex.add_argument("--format", choices=["csv", "json"], default="csv")
    ex.add_argument("-o", "--output")
    ex.set_defaults(func=cmd_expand)

    mo = sub.add_parser("moment", help="mean square of f_N(1+it) over [0, T]")
    mo.add_argument("--series", required=True)
    mo.add_argument("--T", type=float, required=True)
    mo.add_argument("--N", type=float)
    mo.add_argument("--method", choices=["closed", "quadrature", "both"], default="closed")
    mo.add_argument("--tol", type=float)
    mo.add_argument("-o", "--output")
    mo.set_defaults(func=cmd_moment)

    ce = sub.add_parser("continue-eval", help="full series at 1+it via summation by parts")
    ce.add_argument("--series", required=True)
    ce.add_argument("--t", type=float, nargs="+", required=True)
    ce.add_argument("--N", type=float, help="partial-sum cutoff (default: telescoped form)")
    ce.add_argument("--rho", type=float)
    ce.add_argument("--fit-window", dest="fit_window", type=float, nargs=2)
    ce.add_argument("--tail-model", dest="tail_model", choices=["linear", "mean"])
    ce.add_argument("-o", "--output")
    ce.set_defaults(func=cmd_continue_eval)

    ve = sub.add_parser("verify", help="invariant suite; exit 1 on any failure")
    ve.add_argument("--system", required=True)
    ve.add_argument("--xmax", type=float)
    ve.add_argument("--fejer-pairs", dest="fejer_pairs", type=int)
    ve.add_argument("--merge-tol", dest="merge_tol", type=float)
    ve.add_argument("--seed", type=int)
    ve.add_argument("-o", "--output")
    ve.set_defaults(func=cmd_verify)

    cv = sub.add_parser("converge", help="moments along a T(N) schedule")
    cv.add_argument("--series", required=True)
    cv.add_argument("--schedule", choices=list(SCHEDULES))
    cv.add_argument("--steps", type=int)
    cv.add_argument("--epsilon", type=float)
    cv.add_argument("--N-min", dest="N_min", type=float)
    cv.add_argument("--N-max", dest="N_max", type=float)
    cv.add_argument("--quadrature", action="store_true")
    cv.add_argument("--tol", type=float)
    cv.add_argument("--polarization", action="store_true")
    cv.add_argument("--rho", type=float)
    cv.add_argument("--no-time", dest="no_time", action="store_true",
                    help="omit the wall-time column")
    cv.add_argument("--format", choices=["csv", "json"], default="csv")
    cv.add_argument("-o", "--output")
    cv.set_defaults(func=cmd_converge)

    ge = sub.add_parser("geodesic", help="PSL2(Z) geodesic data")
    gesub = ge.add_subparsers(dest="action", required=True)
    tb = gesub.add_parser("tables", help="norm/class tables and the counting residual")
    tb.add_argument("--xmax", type=float)
    tb.add_argument("--tmax", type=int)
    tb.add_argument("--points", type=int, default=200)
    tb.add_argument("-o", "--output", help="directory (default: norms table to stdout)")
    tb.set_defaults(func=cmd_geodesic_tables)

    rp = sub.add_parser("report", help="merge CSV/JSON artifacts into one table")
    rp.add_argument("--inputs", nargs="+", required=True)
    rp.add_argument("--format", choices=["csv", "json"], default="csv")
    rp.add_argument("-o", "--output")
    rp.set_defaults(func=cmd_report)

    co = sub.add_parser("config", help="print the effective defaults table")
    co.set_defaults(func=cmd_config)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        workers = _resolve(args, cfg, "workers")
        if workers is not None:
            _kernels.set_workers(workers)
        return args.func(args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, OutOfRangeError) as exc:
        print(f"{parser.prog}: invalid input: {exc}", file=sys.stderr)
        return 2
    except AccuracyError as exc:
        print(f"{parser.prog}: accuracy not reached: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
