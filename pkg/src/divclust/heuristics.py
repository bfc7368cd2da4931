"""Polynomial-time baselines and pattern-restricted local search."""

from __future__ import annotations

import itertools
import logging
import math
from typing import Sequence

import numpy as np

from .core import (MEANS, CHUNK_ROWS, DivClustError, GroupSystem, InfeasibleError, MetricInstance,
                   Requirements, Solution, make_solution, partition_classes)
from .feasibility import dp_feasible, enumerate_feasible_patterns

log = logging.getLogger(__name__)

EPS_LS = 0.01
MAX_SWAPS = 100_000
RESTARTS = 5


def _spawn(seed, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n) if n > 1 else [np.random.SeedSequence(seed)]


class _SwapEngine:
    """Cost bookkeeping for swap-based local search over a fixed client set."""

    def __init__(self, instance: MetricInstance):
        self.inst = instance
        self.w = np.asarray(instance.weights, dtype=float)
        self.z = instance.power
        cf = instance._cached_cf()
        self.cf = None if cf is None else (cf * cf if self.z == 2 else cf)

    def cols(self, facilities) -> np.ndarray:
        facilities = np.asarray(facilities, dtype=int)
        if self.cf is not None:
            return self.cf[:, facilities]
        d = np.empty((self.inst.n_clients, len(facilities)))
        for lo in range(0, self.inst.n_clients, CHUNK_ROWS):
            ids = np.arange(lo, min(lo + CHUNK_ROWS, self.inst.n_clients))
            d[lo:lo + len(ids)] = self.inst.client_facility(ids, facilities)
        return d * d if self.z == 2 else d

    def cost(self, S) -> float:
        return float(self.w @ self.cols(sorted(S)).min(axis=1))

    def best_single_swap(self, S: list[int], candidates: Sequence[int], out_positions=None):
        """Best (cost, position, facility) over swapping S[pos] for one candidate."""
        DS = self.cols(S)
        cand = np.asarray([f for f in candidates if f not in S], dtype=int)
        if cand.size == 0:
            return math.inf, None, None
        DC = self.cols(cand)
        best = (math.inf, None, None)
        positions = range(len(S)) if out_positions is None else out_positions
        for pos in positions:
            rest = np.delete(DS, pos, axis=1)
            keep = rest.min(axis=1) if rest.shape[1] else np.full(DS.shape[0], np.inf)
            costs = self.w @ np.minimum(keep[:, None], DC)
            i = int(np.argmin(costs))  # ties -> lowest candidate id (cand is sorted)
            if costs[i] < best[0]:
                best = (float(costs[i]), pos, int(cand[i]))
        return best


def local_search_ls0(instance: MetricInstance, k: int, eps_ls: float = EPS_LS, seed=None, p: int = 1,
                     max_swaps: int = MAX_SWAPS) -> Solution:
    """Unconstrained swap local search from a uniform random k-subset.

    Each step applies the best swap of up to ``p`` facilities and is accepted
    only if it cuts the cost by a factor of at least (1 - eps_ls / k).
    """
    if k < 1 or k > instance.n_facilities:
        raise DivClustError("k must lie in [1, |F|]")
    if p < 1:
        raise DivClustError("swap size must be >= 1")
    rng = np.random.default_rng(seed)
    eng = _SwapEngine(instance)
    S = sorted(int(f) for f in rng.choice(instance.n_facilities, size=k, replace=False))
    cost = eng.cost(S)
    history = [cost]
    all_f = np.arange(instance.n_facilities)
    swaps = 0
    while cost > 0 and swaps < max_swaps:
        threshold = (1.0 - eps_ls / k) * cost
        new_cost, pos, f = eng.best_single_swap(S, all_f)
        move = None
        if new_cost <= threshold:
            move = ([S[pos]], [f], new_cost)
        elif p > 1:
            move = _best_multi_swap(eng, S, all_f, p, threshold)
        if move is None:
            break
        out, inn, new_cost = move
        S = sorted(set(S) - set(out) | set(inn))
        cost = new_cost
        history.append(cost)
        swaps += 1
    if swaps >= max_swaps:
        log.warning("LS0 hit the swap cap (%d)", max_swaps)
    tag = "ls0" if p == 1 else f"ls0({p})"
    return make_solution(instance, S, None, None, tag, k, swaps=swaps, cap_hit=swaps >= max_swaps,
                         history=history)


def _best_multi_swap(eng: _SwapEngine, S, all_f, p, threshold):
    """Best swap exchanging q = 2..p facilities; brute force, small instances only."""
    outside = [int(f) for f in all_f if f not in S]
    best = None
    for q in range(2, p + 1):
        for out in itertools.combinations(S, q):
            rest = [f for f in S if f not in out]
            for inn in itertools.combinations(outside, q):
                c = eng.cost(rest + list(inn))
                if c <= threshold and (best is None or c < best[2]):
                    best = (list(out), list(inn), c)
    return best


def ls0_best_of(instance: MetricInstance, k: int, seed=None, restarts: int = RESTARTS, **kw) -> Solution:
    """Minimum-cost LS0 run over ``restarts`` seeds derived from ``seed``."""
    runs = [local_search_ls0(instance, k, seed=s, **kw) for s in _spawn(seed, restarts)]
    return min(runs, key=lambda s: s.cost)


def kmeanspp_seed(instance: MetricInstance, k: int, seed=None) -> Solution:
    """k-means++ (D^2) seeding over the facilities; a baseline for the means objective.

    If fewer than k distinct positions carry mass, the remaining slots are
    filled with the lowest unused facility ids and the solution is flagged.
    """
    if instance.objective != MEANS:
        raise DivClustError("kmeanspp_seed expects a means-objective instance")
    if k < 1 or k > instance.n_facilities:
        raise DivClustError("k must lie in [1, |F|]")
    rng = np.random.default_rng(seed)
    first = int(rng.integers(instance.n_facilities))
    centers = [first]
    dist = instance.nearest_distance(centers)
    w = np.asarray(instance.weights)
    while len(centers) < k:
        p = w * dist ** 2
        total = p.sum()
        if total <= 0:
            break
        c = int(rng.choice(instance.n_clients, p=p / total))
        row = instance.client_facility([c]).ravel()
        row[centers] = np.inf
        f = int(np.argmin(row))
        centers.append(f)
        dist = np.minimum(dist, instance.client_facility(None, [f]).ravel())
    padded = len(centers) < k
    if padded:
        spare = [f for f in range(instance.n_facilities) if f not in centers]
        centers.extend(spare[:k - len(centers)])
    return make_solution(instance, centers, None, None, "kmpp", k, padded=padded)


def kmeanspp_best_of(instance: MetricInstance, k: int, seed=None, restarts: int = RESTARTS) -> Solution:
    runs = [kmeanspp_seed(instance, k, seed=s) for s in _spawn(seed, restarts)]
    return min(runs, key=lambda s: s.cost)


def baseline(instance: MetricInstance, k: int, seed=None, restarts: int = RESTARTS) -> Solution:
    """LS0 for the median objective, k-means++ for means (both best of ``restarts``)."""
    if instance.objective == MEANS:
        return kmeanspp_best_of(instance, k, seed, restarts)
    return ls0_best_of(instance, k, seed, restarts)


def pool_local_search(instance: MetricInstance, pools: Sequence[Sequence[int]], rng: np.random.Generator,
                      max_swaps: int = MAX_SWAPS) -> tuple[list[int], float, int]:
    """One facility per pool; swaps stay inside the pool of the facility swapped out."""
    eng = _SwapEngine(instance)
    S: list[int] = []
    for pool in pools:
        free = [f for f in pool if f not in S]
        if not free:
            raise DivClustError("pool has no facility left for a distinct pick")
        S.append(int(rng.choice(free)))
    cost = eng.cost(S)
    swaps = 0
    while swaps < max_swaps:
        best = (cost, None, None)
        for pos, pool in enumerate(pools):
            c, _, f = eng.best_single_swap(S, sorted(pool), out_positions=[pos])
            if c < best[0]:
                best = (c, pos, f)
        if best[1] is None:
            break
        cost, pos, f = best
        S[pos] = f
        swaps += 1
    return S, cost, swaps


def local_search_ls1(instance: MetricInstance, groups: GroupSystem, req: Requirements, seed=None,
                     pattern_source: str = "all") -> Solution:
    """Pattern-restricted local search, minimum over the chosen patterns."""
    req.check(groups, instance.n_facilities)
    classes = partition_classes(groups)
    if pattern_source in ("all", "es"):
        patterns = [list(p.classes) for p in enumerate_feasible_patterns(classes, req)]
    elif pattern_source == "dp":
        res = dp_feasible(classes, req)
        patterns = [] if not res.feasible else [_pad_picks(res.picks, classes, req.k)]
    else:
        raise DivClustError(f"unknown pattern source {pattern_source!r}")
    if not patterns:
        raise InfeasibleError("infeasible instance")
    rng = np.random.default_rng(seed)
    best = None
    for pat in patterns:
        pools = [classes[c].members for c in pat]
        S, cost, swaps = pool_local_search(instance, pools, rng)
        if best is None or cost < best[1]:
            best = (S, cost, pat)
    S, _, pat = best
    return make_solution(instance, S, groups, req, f"ls1-{pattern_source}", req.k, patterns=len(patterns))


def _pad_picks(picks: list[int], classes, k: int) -> list[int]:
    """Top a DP multiset (which may use fewer than k classes) up to k pools."""
    picks = list(picks)
    used = {c: picks.count(c) for c in set(picks)}
    for c, cl in enumerate(classes):
        while len(picks) < k and used.get(c, 0) < cl.frequency:
            picks.append(c)
            used[c] = used.get(c, 0) + 1
    return sorted(picks)
