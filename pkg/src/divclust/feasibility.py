"""Feasibility engines: exhaustive pattern search (ES), the capped-requirement
dynamic program (DP) and LP randomized rounding (LP)."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import linprog

from .core import (DivClustError, FacilityClass, MetricInstance, Requirements, Solution,
                   coverage, evaluate_cost, satisfies)

log = logging.getLogger(__name__)

ES_BATCH = 1 << 16
LP_ATTEMPTS = 100
LP_TOL = 1e-7


@dataclass(frozen=True)
class ConstraintPattern:
    """A k-multiset of classes, stored as sorted class indices."""

    classes: tuple[int, ...]
    signatures: tuple[tuple[int, ...], ...]
    aggregate: tuple[int, ...]

    def multiplicity(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for c in self.classes:
            out[c] = out.get(c, 0) + 1
        return out

    def feasible(self, r: Sequence[int]) -> bool:
        return satisfies(self.aggregate, r)


def _signature_matrix(classes: Sequence[FacilityClass], t: int) -> np.ndarray:
    if not classes:
        return np.zeros((0, t), dtype=np.int64)
    return np.array([c.signature for c in classes], dtype=np.int64).reshape(len(classes), t)


def make_pattern(indices: Sequence[int], classes: Sequence[FacilityClass], t: int) -> ConstraintPattern:
    idx = tuple(sorted(int(i) for i in indices))
    sigs = tuple(classes[i].signature for i in idx)
    agg = tuple(int(x) for x in np.sum(np.array(sigs, dtype=np.int64).reshape(len(sigs), t), axis=0))
    return ConstraintPattern(idx, sigs, agg)


def _multiset_batches(n_classes: int, k: int, batch: int) -> Iterator[np.ndarray]:
    it = itertools.combinations_with_replacement(range(n_classes), k)
    while True:
        flat = np.fromiter(itertools.chain.from_iterable(itertools.islice(it, batch)), dtype=np.int64)
        if flat.size == 0:
            return
        yield flat.reshape(-1, k)


def iter_feasible_patterns(classes: Sequence[FacilityClass], req: Requirements,
                           batch: int = ES_BATCH) -> Iterator[ConstraintPattern]:
    """Stream feasible patterns in canonical order, ``batch`` multisets at a time."""
    t = req.t
    A = _signature_matrix(classes, t)
    r = np.asarray(req.r, dtype=np.int64)
    freq = np.array([c.frequency for c in classes], dtype=np.int64)
    capped = np.flatnonzero(freq < req.k)
    for B in _multiset_batches(len(classes), req.k, batch):
        ok = np.all(A[B].sum(axis=1) >= r, axis=1)
        for c in capped:
            if not ok.any():
                break
            ok &= (B == c).sum(axis=1) <= freq[c]
        for row in B[ok]:
            yield make_pattern(row, classes, t)


def enumerate_feasible_patterns(classes: Sequence[FacilityClass], req: Requirements,
                                first_only: bool = False, batch: int = ES_BATCH) -> list[ConstraintPattern]:
    """All k-multisets of classes whose signature sum dominates ``r`` and whose
    per-class multiplicities respect class frequencies.

    With ``first_only`` the stream stops at the first hit (the bicriteria path
    only needs one pattern).
    """
    out = []
    for p in iter_feasible_patterns(classes, req, batch=batch):
        out.append(p)
        if first_only:
            break
    return out


# -- dynamic program ------------------------------------------------------------


def dp_state_count(req: Requirements | Sequence[int]) -> int:
    r = req.r if isinstance(req, Requirements) else req
    return math.prod(int(x) + 1 for x in r)


@dataclass
class DPResult:
    feasible: bool
    picks: list[int] | None
    min_count: float
    state_count: int
    items: list[int] = field(default_factory=list)
    table: np.ndarray | None = None


def _state_maps(classes: Sequence[FacilityClass], r: Sequence[int]):
    """For each distinct signature, the flat index of max(eta - gamma, 0) for every state."""
    dims = [x + 1 for x in r]
    grids = np.indices(dims).reshape(len(dims), -1) if dims else np.zeros((0, 1), dtype=int)
    maps = {}
    for c in classes:
        if c.signature in maps:
            continue
        g = np.asarray(c.signature, dtype=np.int64).reshape(-1, 1)
        shifted = np.maximum(grids - g, 0)
        maps[c.signature] = np.ravel_multi_index(shifted, dims) if dims else np.zeros(1, dtype=np.int64)
    return maps


def dp_feasible(classes: Sequence[FacilityClass], req: Requirements, keep_table: bool = False) -> DPResult:
    """Decide feasibility with the capped set-multicover recursion.

    Every class is copied min(frequency, k) times; table entry ``A[i, eta]`` is
    the fewest copies among the first ``i`` summing to at least ``eta``
    (coordinates of ``eta - gamma`` are floored at zero). Only two layers are
    live; a bit per (item, state) records whether the item was taken so a
    witness multiset can be recovered.
    """
    r = list(req.r)
    n_states = dp_state_count(r)
    items = [i for i, c in enumerate(classes) for _ in range(min(c.frequency, req.k))]
    maps = _state_maps(classes, r)
    inf = req.k + 1
    dtype = np.int16 if inf < np.iinfo(np.int16).max else np.int32
    layer = np.full(n_states, inf, dtype=dtype)
    layer[0] = 0
    took = np.zeros((len(items), (n_states + 7) // 8), dtype=np.uint8)
    table = [layer.copy()] if keep_table else None
    for i, ci in enumerate(items):
        src = maps[classes[ci].signature]
        cand = layer[src] + 1
        better = cand < layer
        if better.any():
            took[i] = np.packbits(better)
            layer = np.where(better, cand, layer).astype(dtype)
        if keep_table:
            table.append(layer.copy())
    target = n_states - 1
    best = int(layer[target])
    feasible = best <= req.k
    picks = None
    if feasible:
        picks = []
        state = target
        for i in range(len(items) - 1, -1, -1):
            if state == 0:
                break
            if (took[i, state >> 3] >> (7 - (state & 7))) & 1:
                picks.append(items[i])
                state = int(maps[classes[items[i]].signature][state])
        if state != 0:
            raise DivClustError("DP back-pointer walk did not reach the zero state")
        picks.sort()
    return DPResult(feasible, picks, best if feasible else math.inf, n_states, items,
                    np.array(table) if keep_table else None)


# -- linear program ------------------------------------------------------------


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None


def lp_solve_fractional(classes: Sequence[FacilityClass], req: Requirements,
                        objective: np.ndarray | None = None) -> LPResult:
    """Any x with sum_E x_E gamma_E >= r, sum x <= k, 0 <= x_E <= frequency(E)."""
    m = len(classes)
    if m == 0:
        return LPResult("feasible" if not any(req.r) else "infeasible", np.zeros(0) if not any(req.r) else None)
    A = _signature_matrix(classes, req.t).T.astype(float)
    A_ub = np.vstack([-A, np.ones((1, m))])
    b_ub = np.concatenate([-np.asarray(req.r, dtype=float), [float(req.k)]])
    c = np.zeros(m) if objective is None else np.asarray(objective, dtype=float)
    bounds = [(0.0, float(cl.frequency)) for cl in classes]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        return LPResult("infeasible", None)
    x = np.clip(res.x, 0.0, [b[1] for b in bounds])
    if np.any(A @ x < np.asarray(req.r) - LP_TOL) or x.sum() > req.k + LP_TOL:
        raise DivClustError("LP solver returned a point outside the feasible region")
    return LPResult("feasible", x)


def randomized_round(x: np.ndarray, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """floor(x_i) with probability 1 - frac(x_i), ceil(x_i) otherwise.

    Entries within 1e-9 of an integer are treated as that integer. With
    ``size`` the result has a leading axis of independent draws.
    """
    x = np.asarray(x, dtype=float)
    near = np.abs(x - np.rint(x)) < 1e-9
    x = np.where(near, np.rint(x), x)
    lo = np.floor(x)
    frac = x - lo
    shape = x.shape if size is None else (size,) + x.shape
    up = rng.random(shape) < frac
    return (lo + up).astype(np.int64)


def lp_round(x: np.ndarray, classes: Sequence[FacilityClass], req: Requirements,
             rng: np.random.Generator) -> list[int] | None:
    """One rounding attempt; returns the class multiset if it is feasible and within budget."""
    xr = randomized_round(x, rng)
    A = _signature_matrix(classes, req.t)
    agg = xr @ A if len(classes) else np.zeros(req.t, dtype=np.int64)
    freq = np.array([c.frequency for c in classes], dtype=np.int64)
    if xr.sum() > req.k or np.any(agg < np.asarray(req.r)) or np.any(xr > freq):
        return None
    return [i for i, n in enumerate(xr) for _ in range(int(n))]


@dataclass
class LPFeasibility:
    status: str  # "feasible", "infeasible" or "rounding-failed"
    picks: list[int] | None
    attempts: int
    x: np.ndarray | None


def lp_feasible(classes: Sequence[FacilityClass], req: Requirements, seed=None,
                attempts: int = LP_ATTEMPTS) -> LPFeasibility:
    """Solve the LP and round until a feasible multiset appears or the budget runs out.

    After half the budget the LP is re-solved with a random objective in
    [0, 1]^m before each further attempt, which moves the fractional point.
    """
    rng = np.random.default_rng(seed)
    res = lp_solve_fractional(classes, req)
    if res.status == "infeasible":
        return LPFeasibility("infeasible", None, 0, None)
    x = res.x
    for a in range(attempts):
        if a >= attempts // 2 and a > 0:
            x = lp_solve_fractional(classes, req, objective=rng.random(len(classes))).x
        picks = lp_round(x, classes, req, rng)
        if picks is not None:
            return LPFeasibility("feasible", picks, a + 1, x)
    log.info("LP rounding failed after %d attempts", attempts)
    return LPFeasibility("rounding-failed", None, attempts, x)


# -- materialisation -------------------------------------------------------------


def pattern_to_facilities(picks: Sequence[int] | ConstraintPattern, classes: Sequence[FacilityClass],
                          seed=None) -> list[int]:
    """One distinct facility per multiset element, drawn uniformly from its class."""
    idx = picks.classes if isinstance(picks, ConstraintPattern) else picks
    rng = np.random.default_rng(seed)
    counts: dict[int, int] = {}
    for c in idx:
        counts[int(c)] = counts.get(int(c), 0) + 1
    chosen = []
    for c in sorted(counts):
        members = classes[c].members
        if counts[c] > len(members):
            raise DivClustError(f"class {classes[c].signature} used {counts[c]} times but has "
                                f"{len(members)} facilities")
        chosen.extend(int(f) for f in rng.choice(members, size=counts[c], replace=False))
    return sorted(chosen)


def pattern_to_solution(picks, classes: Sequence[FacilityClass], instance: MetricInstance, groups,
                        req: Requirements, seed=None, algorithm: str = "pattern") -> Solution:
    S = pattern_to_facilities(picks, classes, seed)
    cov = coverage(S, groups)
    cost = evaluate_cost(instance, S) if S else math.inf
    return Solution(tuple(S), cost, cov, algorithm, satisfies(cov, req.r) and len(S) <= req.k, req.k)


def find_feasible_picks(classes: Sequence[FacilityClass], req: Requirements, engine: str = "dp",
                        seed=None, attempts: int = LP_ATTEMPTS) -> tuple[list[int] | None, dict]:
    """Run one engine; returns (picks or None if infeasible, diagnostics)."""
    if engine == "dp":
        res = dp_feasible(classes, req)
        return res.picks, {"engine": "dp", "state_count": res.state_count}
    if engine == "es":
        pats = enumerate_feasible_patterns(classes, req, first_only=True)
        return (list(pats[0].classes) if pats else None), {"engine": "es"}
    if engine == "lp":
        res = lp_feasible(classes, req, seed=seed, attempts=attempts)
        info = {"engine": "lp", "lp_status": res.status, "lp_attempts": res.attempts}
        if res.status == "rounding-failed":
            dp = dp_feasible(classes, req)
            info.update(engine="lp+dp", state_count=dp.state_count)
            return dp.picks, info
        return res.picks, info
    raise DivClustError(f"unknown feasibility engine {engine!r}")
