"""Command line entry point: ``divclust {generate,feasible,solve,bench}``.

Every command prints one JSON object per line. Exit codes: 0 success,
2 infeasible instance, 1 any other error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .compose import bicriteria_2k
from .core import MEANS, MEDIAN, DivClustError, InfeasibleError, coverage, make_solution, partition_classes, satisfies
from .data import load_problem, synthetic_problem, write_synthetic
from .feasibility import dp_state_count, find_feasible_picks, pattern_to_facilities
from .fpt import solve_divkmed_3apx, solve_divkmed_fpt
from .heuristics import baseline, kmeanspp_best_of, local_search_ls1, ls0_best_of

log = logging.getLogger("divclust")

ALGORITHMS = ("fpt", "fpt3", "ls1", "bicriteria", "ls0", "kmpp")
ENGINES = ("es", "dp", "lp")

RECORD_SCHEMA = {
    "type": "object",
    "required": ["alg", "cost", "k_star", "zeta_star", "coverage", "facilities", "runtime_ms", "seed"],
    "properties": {
        "alg": {"type": "string"},
        "cost": {"type": "number", "minimum": 0},
        "k_star": {"type": "integer", "minimum": 0},
        "zeta_star": {"type": "number", "minimum": 0},
        "coverage": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "facilities": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "runtime_ms": {"type": "number", "minimum": 0},
        "seed": {"type": ["integer", "null"]},
    },
}

BENCH_SCHEMA = {
    "type": "object",
    "allOf": [RECORD_SCHEMA],
    "required": ["cell", "n", "k", "t"],
    "properties": {"cell": {"type": "integer"}, "n": {"type": "integer"}, "k": {"type": "integer"},
                   "t": {"type": "integer"}},
}

FEASIBLE_SCHEMA = {
    "type": "object",
    "required": ["feasible", "picks", "state_count", "runtime_ms"],
    "properties": {
        "feasible": {"type": "boolean"},
        "picks": {"type": ["array", "null"]},
        "state_count": {"type": ["integer", "null"]},
        "runtime_ms": {"type": "number"},
    },
}


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def solve_problem(problem, alg: str, eps: float = 0.5, seed=None, mode: str = "exact",
                  engine: str = "dp") -> dict:
    """Run one algorithm and build the output record (zeta_star against the baseline)."""
    inst, groups, req = problem.instance, problem.groups, problem.req
    start = time.perf_counter()
    if alg == "fpt":
        sol = solve_divkmed_fpt(inst, groups, req, eps=eps, mode=mode, seed=seed)
    elif alg == "fpt3":
        sol = solve_divkmed_3apx(inst, groups, req, eps=eps, seed=seed)
    elif alg == "ls1":
        sol = local_search_ls1(inst, groups, req, seed=seed, pattern_source="all")
    elif alg == "bicriteria":
        cl = "kmpp" if inst.objective == MEANS else "ls0"
        sol = bicriteria_2k(inst, groups, req, clustering_alg=cl, feas_engine=engine, seed=seed)
    elif alg == "ls0":
        sol = ls0_best_of(inst, req.k, seed=seed)
    elif alg == "kmpp":
        seeded = kmeanspp_best_of(inst.with_objective(MEANS), req.k, seed=seed)
        sol = make_solution(inst, seeded.facilities, groups, req, "kmpp", req.k)
    else:
        raise DivClustError(f"unknown algorithm {alg!r}")
    runtime = (time.perf_counter() - start) * 1000.0
    if alg == "bicriteria":
        zeta = sol.info["zeta_star"]
    else:
        base = baseline(inst, req.k, seed=seed)
        zeta = sol.cost / base.cost if base.cost > 0 else 1.0
    cov = coverage(sol.facilities, groups)
    return {
        "alg": alg,
        "cost": sol.cost,
        "k_star": sol.size,
        "zeta_star": zeta,
        "coverage": [int(c) for c in cov],
        "facilities": [int(f) for f in sol.facilities],
        "runtime_ms": runtime,
        "seed": seed,
        "feasible": bool(satisfies(cov, req.r)),
    }


def run_feasible(problem, engine: str, seed=None) -> dict:
    start = time.perf_counter()
    classes = partition_classes(problem.groups)
    picks, diag = find_feasible_picks(classes, problem.req, engine=engine, seed=seed)
    facilities = None
    if picks is not None:
        facilities = pattern_to_facilities(picks, classes, seed=seed)
    runtime = (time.perf_counter() - start) * 1000.0
    return {
        "feasible": picks is not None,
        "picks": None if picks is None else ["".join(map(str, classes[c].signature)) for c in picks],
        "facilities": facilities,
        "state_count": diag.get("state_count", dp_state_count(problem.req)),
        "engine": diag["engine"],
        "runtime_ms": runtime,
        "seed": seed,
    }


def _bench_cell(args) -> dict:
    cell, n, k, t, dim, blobs, alg, engine, mode, eps, objective, cell_seed = args
    problem = synthetic_problem(n, dim, blobs, t, k, cell_seed, objective=objective)
    try:
        rec = solve_problem(problem, alg, eps=eps, seed=cell_seed, mode=mode, engine=engine)
    except InfeasibleError:
        rec = {"alg": alg, "cost": 0.0, "k_star": 0, "zeta_star": 0.0, "coverage": [], "facilities": [],
               "runtime_ms": 0.0, "seed": cell_seed, "feasible": False, "error": "infeasible"}
    rec.update(cell=cell, n=n, k=k, t=t)
    return rec


def bench_cells(ns, ks, ts, dim=5, blobs=5, alg="bicriteria", engine="dp", mode="exact", eps=0.5,
                objective=MEDIAN, seed=0) -> list[tuple]:
    grid = list(itertools.product(ns, ks, ts))
    seeds = np.random.SeedSequence(seed).generate_state(len(grid)) if grid else []
    return [(i, n, k, t, dim, blobs, alg, engine, mode, eps, objective, int(s))
            for i, ((n, k, t), s) in enumerate(zip(grid, seeds))]


def run_bench(cells: list[tuple], threads: int | None = None) -> list[dict]:
    """One record per grid cell, in cell order; cell seeds derive from (seed, cell index)."""
    if threads is None:
        threads = int(os.environ.get("DIVCLUST_THREADS", "1") or 1)
    if threads <= 1:
        return [_bench_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_bench_cell, cells))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="divclust", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic points.csv + groups.json")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--dim", type=int, default=5)
    g.add_argument("--blobs", type=int, default=5)
    g.add_argument("--t", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--r", type=_ints, default=None, help="comma-separated requirements (default all ones)")
    g.add_argument("--sigma", type=float, default=0.05)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")

    def inputs(p):
        p.add_argument("--groups", required=True)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--points")
        src.add_argument("--matrix")
        p.add_argument("--normalize", choices=["none", "unit-norm"], default="none")
        p.add_argument("--seed", type=int, default=0)

    f = sub.add_parser("feasible", help="decide feasibility with one engine")
    inputs(f)
    f.add_argument("--engine", choices=ENGINES, default="dp")

    s = sub.add_parser("solve", help="run one clustering algorithm")
    inputs(s)
    s.add_argument("--alg", choices=ALGORITHMS, default="bicriteria")
    s.add_argument("--objective", choices=[MEDIAN, MEANS], default=MEDIAN)
    s.add_argument("--epsilon", type=float, default=0.5)
    s.add_argument("--mode", choices=["exact", "greedy"], default="exact")
    s.add_argument("--engine", choices=ENGINES, default="dp", help="feasibility engine for bicriteria")

    b = sub.add_parser("bench", help="sweep a synthetic |U| x k x t grid")
    b.add_argument("--n", type=_ints, default=[1000])
    b.add_argument("--k", type=_ints, default=[5])
    b.add_argument("--t", type=_ints, default=[5])
    b.add_argument("--dim", type=int, default=5)
    b.add_argument("--blobs", type=int, default=5)
    b.add_argument("--alg", choices=ALGORITHMS, default="bicriteria")
    b.add_argument("--engine", choices=ENGINES, default="dp")
    b.add_argument("--mode", choices=["exact", "greedy"], default="exact")
    b.add_argument("--objective", choices=[MEDIAN, MEANS], default=MEDIAN)
    b.add_argument("--epsilon", type=float, default=0.5)
    b.add_argument("--seed", type=int, default=0)
    return ap


def _emit(rec: dict, out) -> None:
    out.write(json.dumps(rec) + "\n")


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            pp, gp = write_synthetic(args.out, args.n, args.dim, args.blobs, args.t, args.k, args.seed,
                                     r=args.r, sigma=args.sigma)
            _emit({"points": str(pp), "groups": str(gp)}, out)
            return 0
        if args.command == "bench":
            cells = bench_cells(args.n, args.k, args.t, args.dim, args.blobs, args.alg, args.engine,
                                args.mode, args.epsilon, args.objective, args.seed)
            for rec in run_bench(cells):
                _emit(rec, out)
            return 0
        if args.points is None and args.matrix is None:
            raise DivClustError("one of --points or --matrix is required")
        objective = getattr(args, "objective", MEDIAN)
        problem = load_problem(args.groups, args.points, args.matrix, objective=objective,
                               normalize=args.normalize)
        if args.command == "feasible":
            rec = run_feasible(problem, args.engine, seed=args.seed)
            _emit(rec, out)
            return 0 if rec["feasible"] else 2
        rec = solve_problem(problem, args.alg, eps=args.epsilon, seed=args.seed, mode=args.mode,
                            engine=args.engine)
        _emit(rec, out)
        return 0
    except InfeasibleError as exc:
        print(f"divclust: {exc}", file=sys.stderr)
        return 2
    except (DivClustError, OSError, ValueError) as exc:
        print(f"divclust: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
