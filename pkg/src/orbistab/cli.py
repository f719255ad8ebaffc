"""Command-line front end.

    orbistab stability {classify|futaki|index|wps|pn|ruled} ...
    orbistab balanced {run|sweep} ...
    orbistab bergman check ...
    orbistab rr quasi ...

Exit codes: 0 success, 1 invalid input, 2 numeric failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import balanced as bal
from .charts import QuadratureScheme, background
from .core_arith import as_rational, rational_str
from .orbicurve import (
    OrbiCurve, QDivisor, canonical_orb, deg_canonical, divisor_from_json, h0_quasi,
    load_problem, make_divisor, weighted_line,
)
from .stability import (
    classify_curve, futaki_brute_force, futaki_normal_cone, index_check,
    parabolic_ruled_check, pardeg, pn_hyperplane_check, wps_check,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class NumericFailure(ArithmeticError):
    pass


@dataclass
class JobSpec:
    command: str
    action: str
    problem: dict | None = None
    divisor: list | None = None
    ks: list = field(default_factory=list)
    M: int | None = None
    p: int = 5
    c: Fraction | None = None
    tol: float = 1e-8
    quad: str = "1d"
    nodes: int = 96
    out: Path | None = None
    oracle: bool = False
    extra: dict = field(default_factory=dict)


# ------------------------------------------------------------------ encoding

def _encode(obj):
    if isinstance(obj, Fraction):
        return rational_str(obj)
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    return obj


def dumps(obj) -> str:
    # json writes floats with repr, the shortest string that round-trips
    return json.dumps(_encode(obj), indent=2)


def parse_range(text: str) -> list[int]:
    """"6", "6..20", "6:20" or "4,6,8" as a list of integers (ranges inclusive)."""
    text = text.strip()
    for sep in ("..", ":"):
        if sep in text:
            lo, hi = (int(x) for x in text.split(sep, 1))
            if hi < lo:
                raise ValueError(f"empty range {text}")
            return list(range(lo, hi + 1))
    return [int(x) for x in text.split(",") if x.strip()]


def worker_cap(default: int | None = None) -> int:
    raw = os.environ.get("ORBISTAB_THREADS")
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError("ORBISTAB_THREADS must be positive")
        return n
    return default or (os.cpu_count() or 1)


def _read_json(path) -> object:
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed JSON ({exc})") from exc


# ------------------------------------------------------------------ problems

def _default_divisor(X: OrbiCurve) -> QDivisor:
    """K_orb when it is positive, otherwise O(1) on P(1, m) or a smooth point."""
    if deg_canonical(X) > 0:
        return canonical_orb(X)
    if X.genus == 0 and len(X.markings) == 1:
        mk = X.markings[0]
        return make_divisor(X, {mk.coord: Fraction(1, mk.m)})
    if X.genus == 0 and len(X.markings) == 2:
        return make_divisor(X, {mk.coord: Fraction(1, mk.m) for mk in X.markings})
    return make_divisor(X, {X.free_point(): 1})


def problem_of(job: JobSpec):
    if job.problem is None:
        raise ValueError("--curve is required")
    X, L = load_problem(job.problem)
    if job.divisor is not None:
        L = divisor_from_json(X, job.divisor)
    return X, (L if L is not None else _default_divisor(X))


def resolve_p(job: JobSpec, X: OrbiCurve) -> int:
    """p from --p, or from --M through M = (ord - 1)(p + 1)."""
    if job.M is None:
        return job.p
    span = X.ord - 1
    if span == 0:
        if job.M != 0:
            raise ValueError("a manifold has M = 0")
        return job.p
    p, rem = divmod(job.M, span)
    if rem or p < 1:
        raise ValueError(f"M = {job.M} is not (ord-1)(p+1) with p >= 0 for ord = {X.ord}")
    return p - 1


def quadrature(job: JobSpec) -> QuadratureScheme:
    return QuadratureScheme(job.quad, job.nodes, max(4, job.nodes // 2))


# ------------------------------------------------------------------ stability

def _top_point(X: OrbiCurve):
    if not X.markings:
        raise ValueError("the curve has no orbifold point to degenerate")
    mk = max(X.markings, key=lambda m: m.m)
    return mk, (mk.coord if X.genus == 0 else mk.label)


def stability_job(job: JobSpec) -> dict:
    a = job.action
    e = job.extra
    if a == "classify":
        X, L = problem_of(job)
        return classify_curve(X, L).to_json()
    if a == "futaki":
        X, L = problem_of(job)
        mk, key = _top_point(X)
        point = e.get("point")
        if point is not None:
            mk = X.marking_at(X.resolve(point))
            key = X.resolve(point)
        q = as_rational(e["q"]) if e.get("q") else Fraction(1, mk.m if mk else 1)
        Z = make_divisor(X, {key: q})
        c = job.c if job.c is not None else Fraction(1)
        formula = futaki_normal_cone(X, L, Z, c)
        out = {"point": str(key), "q": q, "c": c, "futaki": formula,
               "formula": "(mu - mu_c(I_Z)) int_0^c a0(x) dx / a0"}
        if job.oracle:
            if X.genus != 0:
                raise ValueError("the enumeration oracle needs genus 0")
            oracle = futaki_brute_force(X, L, Z, c)
            out["oracle"] = oracle
            out["agree"] = oracle == formula
            if oracle != formula:
                raise NumericFailure(f"oracle {oracle} != formula {formula}")
        return out
    if a == "index":
        res = index_check(int(e["n"]), int(e.get("kk") or 1), as_rational(e["r"]))
        return res.verdict.to_json()
    if a == "wps":
        if e.get("weights"):
            weights = [int(x) for x in e["weights"].split(",")]
            return {"weights": weights, **wps_check(weights).to_json()}
        return wps_sweep(int(e["max_sum"]))
    if a == "pn":
        m = [int(x) for x in e["orders"].split(",")]
        res = pn_hyperplane_check(int(e["n"]), m)
        return {"fano": res.fano, **res.verdict.to_json()}
    if a == "ruled":
        res = parabolic_ruled_check(e["mu_E"], e["mu_F"], int(e["r"]), e["m"], e["mu_Sigma"])
        out = {"sign": res.sign, "factor": res.factor, **res.verdict.to_json()}
        if e.get("flags"):
            flags = [tuple(int(v) for v in f.split(":")) for f in e["flags"].split(",")]
            out["pardeg"] = pardeg(as_rational(e.get("deg") or 0), flags)
        return out
    raise ValueError(f"unknown stability action {a}")


def wps_sweep(max_sum: int) -> dict:
    """All nondecreasing weight tuples of length >= 2 with sum <= max_sum."""
    rows, bad = [], []
    for n in range(2, max_sum + 1):
        for tup in itertools.combinations_with_replacement(range(1, max_sum + 1), n):
            if sum(tup) > max_sum:
                continue
            v = wps_check(list(tup))
            equal = len(set(tup)) == 1
            rows.append({"weights": list(tup), "status": v.status})
            if not equal and not v.unstable:
                bad.append(list(tup))
    return {"max_sum": max_sum, "tuples": len(rows), "non_equal_not_unstable": bad, "rows": rows}


# ------------------------------------------------------------------ numerics

def _embedding(job: JobSpec, k: int):
    X, L = problem_of(job)
    bg = background(X, L, bump=float(job.extra.get("bump") or 0.0))
    return bal.make_embedding(bg, k, resolve_p(job, X))


def balanced_one(job: JobSpec, k: int) -> dict:
    emb = _embedding(job, k)
    quad = quadrature(job)
    trace = bal.t_iterate(emb, quad, max_iters=int(job.extra.get("max_iters") or 60), tol=job.tol)
    report = bal.run_report(emb, trace, quad, with_scal=True)
    if trace.diverged:
        report["error"] = "iteration diverged"
    if job.out is not None and job.extra.get("csv"):
        bal.write_csv(job.out / f"nodes_k{k}.csv", bal.node_rows(trace.best.G, emb, quad))
    return report


def _balanced_worker(args):
    job, k = args
    try:
        return k, balanced_one(job, k), None
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return k, None, f"{type(exc).__name__}: {exc}"


def balanced_job(job: JobSpec) -> dict:
    if not job.ks:
        raise ValueError("--k is required")
    if job.out is not None:
        job.out.mkdir(parents=True, exist_ok=True)
    if job.action == "run":
        if len(job.ks) != 1:
            raise ValueError("balanced run takes a single k; use sweep for ranges")
        report = balanced_one(job, job.ks[0])
        if job.out is not None:
            bal.write_json(job.out / f"run_k{job.ks[0]}.json", report)
        if "error" in report:
            raise NumericFailure(report["error"])
        return report
    if job.action != "sweep":
        raise ValueError(f"unknown balanced action {job.action}")
    if job.extra.get("what", "expansion") == "expansion":
        X, L = problem_of(job)
        bg = background(X, L, bump=float(job.extra.get("bump") or 0.0))
        rep = bal.expansion_check(bg, job.ks, quadrature(job), resolve_p(job, X))
        data = rep.to_json()
        if job.out is not None:
            bal.write_csv(job.out / "expansion.csv", data["rows"])
            bal.write_json(job.out / "expansion.json", data)
        return data
    workers = min(worker_cap(), len(job.ks))
    tasks = [(job, k) for k in job.ks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_balanced_worker, tasks))
    else:
        results = [_balanced_worker(t) for t in tasks]
    rows, failures = [], []
    for k, report, err in results:
        if err is not None:
            failures.append({"k": k, "error": err})
            continue
        if job.out is not None:
            bal.write_json(job.out / f"run_k{k}.json", report)
        rows.append({"k": k, "iterations": report["iterations"], "converged": report["converged"],
                     "residual": report["residuals"][-1], "bergman_dev": report["bergman_dev"]})
    summary = {"rows": rows, "failures": failures}
    if job.out is not None:
        bal.write_csv(job.out / "sweep.csv", rows)
        bal.write_json(job.out / "manifest.json", summary)
    return summary


def bergman_job(job: JobSpec) -> dict:
    if job.action != "check":
        raise ValueError(f"unknown bergman action {job.action}")
    if len(job.ks) != 1:
        raise ValueError("bergman check takes a single k")
    emb = _embedding(job, job.ks[0])
    quad = quadrature(job)
    trace = bal.t_iterate(emb, quad, max_iters=int(job.extra.get("max_iters") or 60), tol=job.tol)
    G = trace.best.G
    fs = bal.fs_map(G, emb, quad)
    _, dev = bal.bergman_kernel(fs, emb, quad)
    return {
        "k": emb.k,
        "iterations": trace.final.iteration,
        "residual": trace.best.residual,
        "converged": trace.converged,
        "bergman_dev": dev,
        "fibre_ratio_dev": bal.fibre_ratio_deviation(fs, emb, quad),
    }


def rr_job(job: JobSpec) -> dict:
    if job.action != "quasi":
        raise ValueError(f"unknown rr action {job.action}")
    cases = []
    if job.extra.get("m"):
        for m in parse_range(job.extra["m"]):
            cases.append((f"P(1,{m})", *weighted_line(m)))
    else:
        cases.append(("curve", *problem_of(job)))
    rows = []
    for name, X, L in cases:
        qp = h0_quasi(X, L)
        avg = qp.periodic_average()
        rows.append({"curve": name, **qp.to_json(), "periodic_average": avg,
                     "average_zero": all(a == 0 for a in avg)})
    return {"rows": rows}


DISPATCH = {"stability": stability_job, "balanced": balanced_job, "bergman": bergman_job, "rr": rr_job}


def run(job: JobSpec) -> tuple[int, dict]:
    try:
        result = DISPATCH[job.command](job)
        return EXIT_OK, result
    except NumericFailure as exc:
        return EXIT_NUMERIC, {"error": str(exc)}
    except OSError as exc:
        return EXIT_IO, {"error": str(exc)}
    except (ValueError, TypeError, KeyError, ZeroDivisionError) as exc:
        return EXIT_INVALID, {"error": f"{type(exc).__name__}: {exc}"}
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return EXIT_NUMERIC, {"error": f"{type(exc).__name__}: {exc}"}


# ------------------------------------------------------------------ argparse

def _common(sp: argparse.ArgumentParser, numeric: bool = False):
    sp.add_argument("--curve", help="curve JSON: {genus, markings:[{label,coord,m}], divisor:[{coord,coeff}]}")
    sp.add_argument("--divisor", help="divisor JSON list, overrides the one in --curve")
    sp.add_argument("--c", help="rational parameter, e.g. 1/2")
    sp.add_argument("--oracle", action="store_true")
    sp.add_argument("--out", help="output directory")
    if numeric:
        sp.add_argument("--k", help="INT or RANGE such as 6..20")
        sp.add_argument("--M", type=int)
        sp.add_argument("--p", type=int, default=5)
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument("--quad", choices=("1d", "2d"), default="1d")
        sp.add_argument("--nodes", type=int, default=96)
        sp.add_argument("--max-iters", type=int, default=60)
        sp.add_argument("--bump", type=float, default=0.0, help="size of a smooth perturbation of the background")
        sp.add_argument("--csv", action="store_true", help="also dump per-node plot data")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orbistab")
    top = ap.add_subparsers(dest="command", required=True)

    st = top.add_parser("stability").add_subparsers(dest="action", required=True)
    for name in ("classify", "futaki"):
        sp = st.add_parser(name)
        _common(sp)
        if name == "futaki":
            sp.add_argument("--point", help="label or coordinate of the degenerated point")
            sp.add_argument("--q", help="multiplicity of the point divisor")
    sp = st.add_parser("index")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--kk", type=int, default=1, help="power with K^-k = O(k r D)")
    sp.add_argument("--r", required=True)
    sp = st.add_parser("wps")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--weights", help="comma separated, e.g. 1,1,2")
    g.add_argument("--max-sum", type=int, help="sweep all tuples with this total or less")
    sp = st.add_parser("pn")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--orders", required=True, help="n+2 comma separated orders")
    sp = st.add_parser("ruled")
    for flag in ("--mu-E", "--mu-F", "--r", "--m", "--mu-Sigma"):
        sp.add_argument(flag, required=True)
    sp.add_argument("--deg", help="degree for the parabolic degree helper")
    sp.add_argument("--flags", help="mult:p:ord,... for the parabolic degree helper")

    bl = top.add_parser("balanced").add_subparsers(dest="action", required=True)
    _common(bl.add_parser("run"), numeric=True)
    sp = bl.add_parser("sweep")
    _common(sp, numeric=True)
    sp.add_argument("--what", choices=("expansion", "run"), default="expansion")

    bk = top.add_parser("bergman").add_subparsers(dest="action", required=True)
    _common(bk.add_parser("check"), numeric=True)

    rr = top.add_parser("rr").add_subparsers(dest="action", required=True)
    sp = rr.add_parser("quasi")
    _common(sp)
    sp.add_argument("--m", help="sweep P(1,m) over an m range instead of --curve")
    return ap


_JOB_FIELDS = {"curve", "divisor", "k", "M", "p", "c", "tol", "quad", "nodes", "out", "oracle", "command", "action"}


def job_from_args(ns: argparse.Namespace) -> JobSpec:
    vals = vars(ns)
    job = JobSpec(ns.command, ns.action)
    if vals.get("curve"):
        data = _read_json(vals["curve"])
        if not isinstance(data, dict):
            raise ValueError("curve file must hold a JSON object")
        job.problem = data
    if vals.get("divisor"):
        job.divisor = _read_json(vals["divisor"])
    if vals.get("k"):
        job.ks = parse_range(vals["k"])
    job.M = vals.get("M")
    job.p = vals.get("p") or 5
    if job.p < 0:
        raise ValueError("p must be non-negative")
    if vals.get("c") is not None:
        job.c = as_rational(vals["c"])
    job.tol = vals.get("tol") or 1e-8
    job.quad = vals.get("quad") or "1d"
    job.nodes = vals.get("nodes") or 96
    job.out = Path(vals["out"]) if vals.get("out") else None
    job.oracle = bool(vals.get("oracle"))
    job.extra = {k: v for k, v in vals.items() if k not in _JOB_FIELDS}
    return job


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        job = job_from_args(ns)
    except OSError as exc:
        print(dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        print(dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return EXIT_INVALID
    code, result = run(job)
    text = dumps(result)
    if code == EXIT_OK:
        print(text)
        if job.out is not None and job.command in ("stability", "rr"):
            try:
                job.out.mkdir(parents=True, exist_ok=True)
                bal.write_json(job.out / f"{job.command}_{job.action}.json", _encode(result))
            except OSError as exc:
                print(dumps({"error": str(exc)}), file=sys.stderr)
                return EXIT_IO
    else:
        print(text, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
