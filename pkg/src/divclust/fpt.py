"""Parameterized approximation for diversity-aware k-median / k-means.

The outer loop enumerates feasible constraint patterns; each pattern becomes a
k-median instance with one facility allowed per pool (a k-partition matroid).
That instance is solved by guessing, per pool, a leader client and a
discretised radius, attaching a fictitious facility at distance 2*radius from
the candidate ball, and maximising the resulting monotone submodular
``improv`` function one-facility-per-pool.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (MEANS, DivClustError, GroupSystem, InfeasibleError, MetricInstance, Requirements,
                   Solution, WeightedClientSet, check_facility_ids, evaluate_cost, make_solution,
                   partition_classes)
from .coreset import build_coreset
from .feasibility import enumerate_feasible_patterns

log = logging.getLogger(__name__)

EXACT = "exact"
GREEDY = "greedy"
ARBITRARY = "arbitrary"
MODES = (EXACT, GREEDY, ARBITRARY)

PRODUCT_CAP = 10 ** 6
COMBO_CHUNK = 4096


def discretize(a: float, eta: float) -> int:
    """Smallest integer e >= 0 with (1 + eta)^e >= a."""
    if a < 1:
        raise DivClustError(f"discretize needs a >= 1, got {a}")
    if eta <= 0:
        raise DivClustError("eta must be positive")
    return int(discretize_array(np.array([a], dtype=float), eta)[0])


def discretize_array(a: np.ndarray, eta: float) -> np.ndarray:
    """Elementwise :func:`discretize` for an array of values >= 1."""
    a = np.asarray(a, dtype=float)
    base = 1.0 + eta
    e = np.ceil(np.log(a) / math.log(base)).astype(np.int64)
    np.maximum(e, 0, out=e)
    # float log can land one step off either way
    e += base ** e < a
    e -= (e > 0) & (base ** (e - 1) >= a)
    return e


def bucket_of(d: np.ndarray, eta: float) -> np.ndarray:
    """Radius exponent of each distance; distances below 1 share bucket 0."""
    return discretize_array(np.maximum(d, 1.0), eta)


def candidate_set(instance: MetricInstance, pool: Sequence[int], leader: int, exponent: int,
                  eta: float) -> tuple[int, ...]:
    """Members of ``pool`` whose distance to client ``leader`` falls in bucket ``exponent``."""
    pool = np.asarray(sorted(pool), dtype=int)
    if pool.size == 0:
        return ()
    b = bucket_of(instance.client_facility([leader], pool).ravel(), eta)
    return tuple(int(f) for f in pool[b == exponent])


# -- fictitious facilities ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FictitiousExtension:
    """Candidate sets Pi_j and one fictitious facility per set.

    d(F'_j, v) = 2 radius_j + min_{f in Pi_j} d(f, v) for every point v, so
    members of Pi_j sit at exactly 2 radius_j.
    """

    instance: MetricInstance
    candidates: tuple[tuple[int, ...], ...]
    radii: tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.candidates)

    def client_distances(self, client_ids) -> np.ndarray:
        """(len(client_ids), k) matrix of d(c, F'_j)."""
        ids = np.asarray(client_ids, dtype=int)
        out = np.empty((len(ids), self.k))
        for j, (pi, lam) in enumerate(zip(self.candidates, self.radii)):
            out[:, j] = 2.0 * lam + self.instance.client_facility(ids, list(pi)).min(axis=1)
        return out

    def metric_matrix(self) -> np.ndarray:
        """Distances over the whole universe plus the k fictitious points.

        Fictitious-to-fictitious distances use the shortest path through the
        candidate sets: 2 r_i + 2 r_j + d(Pi_i, Pi_j).
        """
        inst = self.instance
        n = inst.n_points
        U = np.arange(n)
        base = inst.universe_dist(U, U)
        fic = np.empty((self.k, n))
        for j, (pi, lam) in enumerate(zip(self.candidates, self.radii)):
            members = inst.facility_index[list(pi)]
            fic[j] = 2.0 * lam + inst.universe_dist(members, U).min(axis=0)
        ff = np.zeros((self.k, self.k))
        for i in range(self.k):
            for j in range(self.k):
                if i != j:
                    mi = inst.facility_index[list(self.candidates[i])]
                    mj = inst.facility_index[list(self.candidates[j])]
                    ff[i, j] = 2 * self.radii[i] + 2 * self.radii[j] + inst.universe_dist(mi, mj).min()
        top = np.hstack([base, fic.T])
        bottom = np.hstack([fic, ff])
        return np.vstack([top, bottom])


def extend_with_fictitious(instance: MetricInstance, candidates: Sequence[Sequence[int]],
                           radii: Sequence[float]) -> FictitiousExtension:
    if len(candidates) != len(radii):
        raise DivClustError("one radius per candidate set required")
    cands = tuple(tuple(sorted(int(f) for f in pi)) for pi in candidates)
    if any(len(pi) == 0 for pi in cands):
        raise DivClustError("empty candidate set")
    return FictitiousExtension(instance, cands, tuple(float(r) for r in radii))


def _powered(d: np.ndarray, z: int) -> np.ndarray:
    return d * d if z == 2 else d


def improv(S, ext: FictitiousExtension, clients: WeightedClientSet) -> float:
    """cost(C', F') - cost(C', F' ∪ S)."""
    inst = ext.instance
    z = inst.power
    fic = _powered(ext.client_distances(clients.ids).min(axis=1), z)
    base = float(np.dot(clients.weights, fic))
    S = check_facility_ids(inst, S)
    if S.size == 0:
        return 0.0
    both = np.minimum(fic, _powered(inst.client_facility(clients.ids, S).min(axis=1), z))
    return base - float(np.dot(clients.weights, both))


# -- one-per-pool maximisation ---------------------------------------------------------


def _match(sets: Sequence[Sequence[int]], chosen: Sequence[int]) -> list[int] | None:
    """Assign every chosen facility to a distinct pool containing it.

    Returns pool index per chosen facility, or None if impossible (Kuhn's
    augmenting paths; k is tiny).
    """
    owner: dict[int, int] = {}

    def try_place(i: int, seen: set) -> bool:
        f = chosen[i]
        for j, pi in enumerate(sets):
            if j in seen or f not in pi:
                continue
            seen.add(j)
            if j not in owner or try_place(owner[j], seen):
                owner[j] = i
                return True
        return False

    for i in range(len(chosen)):
        if not try_place(i, set()):
            return None
    out = [0] * len(chosen)
    for j, i in owner.items():
        out[i] = j
    return out


def _by_pool(sets, chosen) -> tuple[int, ...] | None:
    m = _match(sets, chosen)
    if m is None or len(chosen) != len(sets):
        return None
    out = [0] * len(sets)
    for f, j in zip(chosen, m):
        out[j] = f
    return tuple(out)


def lex_first_selection(sets: Sequence[Sequence[int]]) -> tuple[int, ...] | None:
    """Lowest-id pick per pool with distinct facilities (backtracking over pools in order)."""
    sets = [sorted(pi) for pi in sets]
    picked: list[int] = []

    def rec(j: int) -> bool:
        if j == len(sets):
            return True
        for f in sets[j]:
            if f not in picked:
                picked.append(f)
                if rec(j + 1):
                    return True
                picked.pop()
        return False

    return tuple(picked) if rec(0) else None


class _Scorer:
    """Powered client x facility distances over a fixed client set."""

    def __init__(self, dz: np.ndarray, cols: dict[int, int], weights: np.ndarray):
        self.dz = dz
        self.cols = cols
        self.w = weights

    def sel_cost(self, sel, base=None) -> float:
        d = self.dz[:, [self.cols[f] for f in sel]].min(axis=1)
        if base is not None:
            d = np.minimum(d, base)
        return float(np.dot(self.w, d))

    def best_product(self, sets, base, cap) -> tuple[tuple[int, ...] | None, float]:
        """Exact min of cost(F' ∪ S) over one-per-pool selections of distinct facilities."""
        sizes = [len(pi) for pi in sets]
        if math.prod(sizes) > cap:
            raise DivClustError(f"candidate product {math.prod(sizes)} exceeds cap {cap}; use greedy mode")
        col_sets = [np.array([self.cols[f] for f in pi]) for pi in sets]
        combos = np.array(list(itertools.product(*col_sets)), dtype=np.int64).reshape(-1, len(sets))
        if len(sets) > 1:
            srt = np.sort(combos, axis=1)
            combos = combos[np.all(srt[:, 1:] != srt[:, :-1], axis=1)]
        if len(combos) == 0:
            return None, math.inf
        best_val, best_row = math.inf, None
        for lo in range(0, len(combos), COMBO_CHUNK):
            chunk = combos[lo:lo + COMBO_CHUNK]
            d = self.dz[:, chunk].min(axis=2)  # (n, P)
            d = np.minimum(d, base[:, None])
            vals = self.w @ d
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val, best_row = float(vals[i]), chunk[i]
        inv = {c: f for f, c in self.cols.items()}
        return tuple(inv[int(c)] for c in best_row), best_val

    def greedy(self, sets, base) -> tuple[int, ...] | None:
        """Greedy over the transversal matroid of the candidate sets (factor 1/2)."""
        cand = sorted(set().union(*[set(pi) for pi in sets]))
        cidx = np.array([self.cols[f] for f in cand])
        cur = base.copy()
        chosen: list[int] = []
        for _ in range(len(sets)):
            gains = self.w @ (cur[:, None] - np.minimum(cur[:, None], self.dz[:, cidx]))
            # highest gain first, lowest id among ties
            order = np.lexsort((np.arange(len(cand)), -gains))
            for i in order:
                f = cand[i]
                if f in chosen:
                    continue
                if _match(sets, chosen + [f]) is not None:
                    chosen.append(f)
                    cur = np.minimum(cur, self.dz[:, cidx[i]])
                    break
            else:
                return None
        return _by_pool(sets, chosen)


def _scorer_for(ext: FictitiousExtension, clients: WeightedClientSet):
    inst = ext.instance
    union = sorted(set().union(*[set(pi) for pi in ext.candidates]))
    dz = _powered(inst.client_facility(clients.ids, union), inst.power)
    scorer = _Scorer(dz, {f: i for i, f in enumerate(union)}, np.asarray(clients.weights))
    base = _powered(ext.client_distances(clients.ids).min(axis=1), inst.power)
    return scorer, base


def maximize_improv(ext: FictitiousExtension, clients: WeightedClientSet, mode: str = EXACT,
                    product_cap: int = PRODUCT_CAP) -> tuple[tuple[int, ...], float]:
    """One distinct facility per candidate set maximising ``improv``.

    Returns the selection (aligned with ``ext.candidates``) and its improv value.
    """
    scorer, base = _scorer_for(ext, clients)
    fic_cost = float(np.dot(scorer.w, base))
    if mode == EXACT:
        sel, val = scorer.best_product(ext.candidates, base, product_cap)
    elif mode == GREEDY:
        sel = scorer.greedy(ext.candidates, base)
        val = scorer.sel_cost(sel, base) if sel is not None else math.inf
    elif mode == ARBITRARY:
        sel = lex_first_selection(ext.candidates)
        val = scorer.sel_cost(sel, base) if sel is not None else math.inf
    else:
        raise DivClustError(f"unknown mode {mode!r}")
    if sel is None:
        raise DivClustError("candidate sets admit no distinct one-per-set selection")
    return sel, fic_cost - val


# -- k-median with a k-partition matroid ---------------------------------------------


@dataclass(frozen=True)
class PartitionInstance:
    """k facility pools (possibly sharing members when a class is used twice)
    and the clients to serve."""

    pools: tuple[tuple[int, ...], ...]
    clients: WeightedClientSet

    @property
    def k(self) -> int:
        return len(self.pools)


@dataclass
class _PoolGuess:
    members: tuple[int, ...]
    exponent: int
    radius: float
    fic: np.ndarray  # powered d(c, F'_j) per client


def eta_for(eps_prime: float, objective: str) -> float:
    return math.e * eps_prime / (16.0 if objective == MEANS else 2.0)


def _pool_guesses(D: np.ndarray, cols: dict[int, int], pool: Sequence[int], eta: float, scale: float,
                  nearest: np.ndarray, prune: bool, z: int) -> list[_PoolGuess]:
    pcols = np.array([cols[f] for f in pool])
    B = bucket_of(D[:, pcols] * scale, eta)
    pool_arr = np.asarray(pool)
    seen: dict[tuple, _PoolGuess] = {}
    if prune:
        pairs = [(c, B[c, i]) for i in range(len(pool)) for c in np.flatnonzero(nearest[:, pcols[i]])]
    else:
        pairs = [(c, e) for c in range(D.shape[0]) for e in np.unique(B[c])]
    for c, e in pairs:
        members = tuple(int(f) for f in pool_arr[B[c] == e])
        key = (members, int(e))
        if key in seen:
            continue
        radius = 0.0 if e == 0 else (1.0 + eta) ** int(e) / scale
        mcols = [cols[f] for f in members]
        fic = _powered(2.0 * radius + D[:, mcols].min(axis=1), z)
        seen[key] = _PoolGuess(members, int(e), radius, fic)
    return sorted(seen.values(), key=lambda g: (g.exponent, g.members))


def solve_kmed_kpm(instance: MetricInstance, pinst: PartitionInstance, eps_prime: float,
                   mode: str = EXACT, prune: bool = True, product_cap: int = PRODUCT_CAP) -> Solution:
    """Leader/radius enumeration for k-median with one facility per pool.

    Distances are rescaled so the smallest nonzero client-facility distance is
    2; bucket 0 then holds exactly the zero distances and gets radius 0.
    With ``prune`` a (leader, bucket) guess for pool j is kept only if the
    leader is a nearest client of some member of the resulting candidate set,
    which every optimal solution's own guess satisfies.

    ``cost`` of the returned solution is measured on ``pinst.clients``.
    """
    if mode not in MODES:
        raise DivClustError(f"unknown mode {mode!r}")
    if eps_prime <= 0:
        raise DivClustError("eps' must be positive")
    pools = [tuple(sorted(p)) for p in pinst.pools]
    if any(len(p) == 0 for p in pools):
        raise DivClustError("empty pool")
    clients = pinst.clients
    z = instance.power
    union = sorted(set().union(*[set(p) for p in pools]))
    cols = {f: i for i, f in enumerate(union)}
    D = instance.client_facility(clients.ids, union)
    w = np.asarray(clients.weights, dtype=float)
    eta = eta_for(eps_prime, instance.objective)
    nonzero = D[D > 0]
    scale = 2.0 / nonzero.min() if nonzero.size else 1.0
    nearest = D <= D.min(axis=0, keepdims=True)
    scorer = _Scorer(_powered(D, z), cols, w)

    options = [_pool_guesses(D, cols, p, eta, scale, nearest, prune, z) for p in pools]
    best_cost, best_sel, best_guess = math.inf, None, None
    memo: dict[tuple[int, ...], float] = {}
    n_guesses = 0
    for guess in itertools.product(*options):
        n_guesses += 1
        sets = [g.members for g in guess]
        base = guess[0].fic
        for g in guess[1:]:
            base = np.minimum(base, g.fic)
        if mode == EXACT:
            sel, _ = scorer.best_product(sets, base, product_cap)
        elif mode == GREEDY:
            sel = scorer.greedy(sets, base)
        else:
            sel = lex_first_selection(sets)
        if sel is None:
            continue
        key = tuple(sorted(sel))
        cost = memo.get(key)
        if cost is None:
            cost = memo[key] = scorer.sel_cost(sel)
        if cost < best_cost:
            best_cost, best_sel, best_guess = cost, sel, guess
    if best_sel is None:
        raise DivClustError("every leader/radius guess was rejected")
    info = {"pool_picks": list(best_sel), "guesses": n_guesses, "eta": eta,
            "radii": [g.radius for g in best_guess]}
    return Solution(tuple(sorted(best_sel)), best_cost, (), f"kpm-{mode}", True, len(pools), info)


# -- full pipeline ----------------------------------------------------------------------


def _pipeline(instance: MetricInstance, groups: GroupSystem, req: Requirements, eps: float, mode: str,
              seed, coreset: WeightedClientSet | None, prune: bool, algorithm: str,
              product_cap: int = PRODUCT_CAP) -> Solution:
    if not 0 < eps <= 0.5:
        raise DivClustError("eps must lie in (0, 1/2]")
    req.check(groups, instance.n_facilities)
    classes = partition_classes(groups)
    patterns = enumerate_feasible_patterns(classes, req)
    if not patterns:
        raise InfeasibleError("infeasible instance")
    if coreset is None:
        coreset = build_coreset(instance, req.k, nu=eps / 16, delta=0.1, seed=seed)
    best, best_cost = None, math.inf
    for pat in patterns:
        pinst = PartitionInstance(tuple(classes[c].members for c in pat.classes), coreset)
        sol = solve_kmed_kpm(instance, pinst, eps / 4, mode=mode, prune=prune, product_cap=product_cap)
        full = evaluate_cost(instance, sol.facilities)
        if full < best_cost:
            best, best_cost = (sol, pat), full
    sol, pat = best
    return make_solution(instance, sol.facilities, groups, req, algorithm, req.k,
                         pattern=[list(s) for s in pat.signatures], coreset_size=len(coreset),
                         coreset_cost=sol.cost, patterns=len(patterns))


def solve_divkmed_fpt(instance: MetricInstance, groups: GroupSystem, req: Requirements, eps: float = 0.5,
                      mode: str = EXACT, seed=None, coreset: WeightedClientSet | None = None,
                      prune: bool = True, product_cap: int = PRODUCT_CAP) -> Solution:
    """Pattern enumeration + one-per-pool submodular maximisation.

    ``mode="exact"`` maximises improv exactly per guess, ``"greedy"`` uses the
    1/2-approximate greedy. Pass ``coreset`` to reuse a client sample;
    otherwise one with nu = eps/16 is built from ``seed``.
    """
    if mode not in (EXACT, GREEDY):
        raise DivClustError("mode must be 'exact' or 'greedy'")
    return _pipeline(instance, groups, req, eps, mode, seed, coreset, prune, f"fpt-{mode}", product_cap)


def solve_divkmed_3apx(instance: MetricInstance, groups: GroupSystem, req: Requirements, eps: float = 0.5,
                       seed=None, coreset: WeightedClientSet | None = None, prune: bool = True) -> Solution:
    """Same pipeline, but each candidate set contributes its lowest-id facility."""
    return _pipeline(instance, groups, req, eps, ARBITRARY, seed, coreset, prune, "fpt3")
