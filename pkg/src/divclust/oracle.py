"""Brute-force ground truth for desk-scale instances.

Nothing here reuses the solver code paths except :func:`evaluate_cost`'s
distance oracle; every routine enumerates its whole search space.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from .core import (DivClustError, FacilityClass, GroupSystem, MetricInstance, Requirements, Solution,
                   WeightedClientSet, coverage)

SUBSET_CAP = 10 ** 7
CHUNK = 1 << 15


def _combination_chunks(n: int, k: int):
    it = itertools.combinations(range(n), k)
    while True:
        flat = np.fromiter(itertools.chain.from_iterable(itertools.islice(it, CHUNK)), dtype=np.int64)
        if flat.size == 0:
            return
        yield flat.reshape(-1, k)


def exact_divkmed(instance: MetricInstance, groups: GroupSystem, req: Requirements,
                  cap: int = SUBSET_CAP) -> Solution | None:
    """Cheapest k-subset meeting the requirements, or None if there is none."""
    n, k = instance.n_facilities, req.k
    total = math.comb(n, k)
    if total > cap:
        raise DivClustError(f"C({n},{k}) = {total} subsets exceed the oracle cap {cap}")
    M = groups.membership.astype(np.int64)
    r = np.asarray(req.r)
    D = instance.client_facility()
    if instance.objective == "means":
        D = D * D
    w = np.asarray(instance.weights)
    best_cost, best = math.inf, None
    for S in _combination_chunks(n, k):
        ok = np.all(M[S].sum(axis=1) >= r, axis=1)
        S = S[ok]
        if len(S) == 0:
            continue
        costs = w @ D[:, S].min(axis=2)
        i = int(np.argmin(costs))  # lexicographic order makes this the id-smallest tie
        if costs[i] < best_cost:
            best_cost, best = float(costs[i]), tuple(int(f) for f in S[i])
    if best is None:
        return None
    return Solution(best, best_cost, coverage(best, groups), "oracle", True, k)


def feasible_subset_exists(groups: GroupSystem, req: Requirements, cap: int = SUBSET_CAP) -> bool:
    """Brute-force existence of a k-subset of facilities with coverage >= r."""
    n, k = groups.n_facilities, req.k
    if math.comb(n, k) > cap:
        raise DivClustError("subset count exceeds the oracle cap")
    M = groups.membership.astype(np.int64)
    r = np.asarray(req.r)
    # every k-subset = a (k-q)-prefix followed by a q-suffix of larger ids; suffix sums are tabulated
    q = min(k, 3)
    tail = np.array(list(itertools.combinations(range(n), q)), dtype=np.int64).reshape(-1, q)
    tail_cov = M[tail].sum(axis=1)
    first = tail[:, 0]
    for prefix in itertools.combinations(range(n), k - q):
        lo = int(np.searchsorted(first, prefix[-1] + 1)) if prefix else 0
        need = r - M[list(prefix)].sum(axis=0) if prefix else r
        if np.any(np.all(tail_cov[lo:] >= need, axis=1)):
            return True
    return False


def exact_feasible_multisets(classes: Sequence[FacilityClass], req: Requirements,
                             cap: int = SUBSET_CAP) -> tuple[int, list[tuple[int, ...]]]:
    """Enumerate multiplicity vectors (m_E <= frequency, sum = k); keep those meeting r.

    Multisets are returned as sorted tuples of class indices.
    """
    m, k = len(classes), req.k
    if m == 0:
        return 0, []
    if math.comb(m + k - 1, k) > cap:
        raise DivClustError("multiset count exceeds the oracle cap")
    out = []
    counts = [0] * m

    def rec(i: int, left: int):
        if i == m - 1:
            if left <= classes[i].frequency:
                counts[i] = left
                agg = [0] * req.t
                for c, n in enumerate(counts):
                    for g in range(req.t):
                        agg[g] += n * classes[c].signature[g]
                if all(a >= b for a, b in zip(agg, req.r)):
                    out.append(tuple(c for c in range(m) for _ in range(counts[c])))
            return
        for n in range(min(left, classes[i].frequency) + 1):
            counts[i] = n
            rec(i + 1, left - n)
        counts[i] = 0

    rec(0, k)
    out.sort()
    return len(out), out


def exact_submodular_max(ext, clients: WeightedClientSet, cap: int = SUBSET_CAP):
    """Maximise cost(C', F') - cost(C', F' ∪ S) over distinct one-per-set picks.

    Distances are recomputed pointwise from the instance, independent of the
    vectorised scorer used by the solver.
    """
    inst = ext.instance
    sizes = [len(pi) for pi in ext.candidates]
    if math.prod(sizes) > cap:
        raise DivClustError("candidate product exceeds the oracle cap")
    z = 2 if inst.objective == "means" else 1
    ids = [int(c) for c in clients.ids]
    w = [float(x) for x in clients.weights]

    def d(c, f):
        return float(inst.client_facility([c], [f])[0, 0])

    fic = []
    for c in ids:
        fic.append(min(2 * lam + min(d(c, f) for f in pi) for pi, lam in zip(ext.candidates, ext.radii)))
    base = sum(wc * dc ** z for wc, dc in zip(w, fic))
    best_val, best = -math.inf, None
    for combo in itertools.product(*ext.candidates):
        if len(set(combo)) < len(combo):
            continue
        val = base - sum(wc * min(dc, min(d(c, f) for f in combo)) ** z for c, wc, dc in zip(ids, w, fic))
        if val > best_val:
            best_val, best = val, combo
    return best, best_val
