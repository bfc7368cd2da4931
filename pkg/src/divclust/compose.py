"""Bicriteria composition and the Euclidean half-ball picker."""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from .core import (DivClustError, GroupSystem, InfeasibleError, MetricInstance, Requirements, Solution,
                   coverage, evaluate_cost, make_solution, partition_classes, satisfies)
from .feasibility import find_feasible_picks, pattern_to_facilities
from .heuristics import kmeanspp_best_of, ls0_best_of

COMBO_CAP = 10 ** 6


def bicriteria_2k(instance: MetricInstance, groups: GroupSystem, req: Requirements,
                  clustering_alg: str = "ls0", feas_engine: str = "dp", seed=None,
                  cluster: Solution | None = None, restarts: int = 5) -> Solution:
    """Union of an unconstrained clustering and a requirement-satisfying pick.

    The clustering part is skipped when it already satisfies ``r``. Pass
    ``cluster`` to reuse a precomputed clustering solution. ``zeta_star`` is
    cost(S) / cost(clustering part), so it never exceeds 1.
    """
    req.check(groups, instance.n_facilities)
    ss = np.random.SeedSequence(seed)
    cl_seed, feas_seed, pick_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(3))
    if cluster is None:
        if clustering_alg == "ls0":
            cluster = ls0_best_of(instance, req.k, seed=cl_seed, restarts=restarts)
        elif clustering_alg == "kmpp":
            cluster = kmeanspp_best_of(instance, req.k, seed=cl_seed, restarts=restarts)
        else:
            raise DivClustError(f"unknown clustering algorithm {clustering_alg!r}")
    cov = coverage(cluster.facilities, groups)
    info = {"cluster_alg": clustering_alg, "feas_engine": feas_engine}
    if satisfies(cov, req.r):
        S = list(cluster.facilities)
        feas_part: list[int] = []
    else:
        classes = partition_classes(groups)
        picks, diag = find_feasible_picks(classes, req, engine=feas_engine, seed=feas_seed)
        info.update(diag)
        if picks is None:
            raise InfeasibleError("infeasible instance")
        feas_part = pattern_to_facilities(picks, classes, seed=pick_seed)
        S = sorted(set(cluster.facilities) | set(feas_part))
    sol = make_solution(instance, S, groups, req, "bicriteria", 2 * req.k,
                        cluster_part=list(cluster.facilities), feasibility_part=feas_part,
                        cluster_cost=cluster.cost, **info)
    if sol.cost > cluster.cost:
        raise DivClustError("superset cost exceeded the clustering part's cost")
    sol.info["zeta_star"] = sol.cost / cluster.cost if cluster.cost > 0 else 1.0
    return sol


def halfball_pick_3(points: np.ndarray, center: np.ndarray, ids: Sequence[int] | None = None,
                    radius: float | None = None, tol: float = 1e-6) -> list[int]:
    """Pick up to three facilities from a sphere so one lies within 90 degrees of any target.

    f1 is the lowest id; f2 the lowest id with <f - c, f1 - c> < 0; f3 the
    lowest id negative against both. In the plane some pick is within
    sqrt(2) * radius of every input facility.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.size == 0:
        raise DivClustError("no facilities on the sphere")
    c = np.asarray(center, dtype=float)
    ids = list(range(len(P))) if ids is None else [int(i) for i in ids]
    order = np.argsort(ids, kind="stable")
    V = P - c
    norms = np.linalg.norm(V, axis=1)
    lam = float(np.median(norms)) if radius is None else float(radius)
    if np.any(np.abs(norms - lam) > tol * max(1.0, lam)):
        raise DivClustError("facilities are not on a common sphere around the center")
    picks = [int(order[0])]
    for _ in range(2):
        neg = np.all(V @ V[picks].T < 0, axis=1)
        hits = [i for i in order if neg[i]]
        if not hits:
            break
        picks.append(int(hits[0]))
    return [ids[i] for i in picks]


def best_k_of_mk(instance: MetricInstance, groups: GroupSystem | None, req: Requirements | None,
                 pools: Sequence[Sequence[int]], cap: int = COMBO_CAP) -> Solution:
    """Cheapest one-per-pool combination, preferring ones that meet ``r``.

    When no combination satisfies the requirements the cheapest overall is
    returned with ``info["requirements_met"] = False``.
    """
    pools = [sorted(set(int(f) for f in p)) for p in pools]
    if any(not p for p in pools):
        raise DivClustError("empty pool")
    total = math.prod(len(p) for p in pools)
    if total > cap:
        raise DivClustError(f"{total} combinations exceed the cap {cap}")
    k = len(pools)
    best_ok, best_any = None, None
    for combo in itertools.product(*pools):
        S = tuple(sorted(set(combo)))
        cost = evaluate_cost(instance, S)
        ok = True
        if groups is not None and req is not None:
            ok = satisfies(coverage(S, groups), req.r)
        if ok and (best_ok is None or cost < best_ok[0]):
            best_ok = (cost, S)
        if best_any is None or cost < best_any[0]:
            best_any = (cost, S)
    met = best_ok is not None
    cost, S = best_ok if met else best_any
    return make_solution(instance, S, groups, req, "best-k-of-mk", k, requirements_met=met,
                         combinations=total)
