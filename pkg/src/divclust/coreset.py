"""Sensitivity-sampling coresets for the k-median / k-means objectives."""

from __future__ import annotations

import math

import numpy as np

from .core import MEANS, DivClustError, MetricInstance, WeightedClientSet

C0 = 20.0


def coreset_size(instance: MetricInstance, k: int, nu: float, c0: float = C0) -> int:
    """Target sample size: c0 k D / nu^2 (median) or c0 k D^3 / nu^4 (means).

    Explicit-matrix instances have no dimension; log |U| stands in for D.
    """
    D = instance.dim if instance.dim is not None else max(1.0, math.log(instance.n_points))
    if instance.objective == MEANS:
        m = c0 * k * D ** 3 / nu ** 4
    else:
        m = c0 * k * D / nu ** 2
    return int(math.ceil(m))


def d2_centers(instance: MetricInstance, m: int, rng: np.random.Generator,
               power: int | None = None) -> np.ndarray:
    """Pick ``m`` facility ids by D^z sampling on the (weighted) clients.

    Each draw picks a client with probability proportional to w_c d(c, A)^z and
    adds the facility nearest to it.
    """
    z = instance.power if power is None else power
    w = np.asarray(instance.weights)
    first_client = rng.choice(instance.n_clients, p=w / w.sum())
    nearest = instance.client_facility([first_client]).ravel()
    centers = [int(np.argmin(nearest))]
    dist = instance.nearest_distance(centers)
    while len(centers) < m:
        p = w * dist ** z
        total = p.sum()
        if total <= 0:
            break
        c = rng.choice(instance.n_clients, p=p / total)
        f = int(np.argmin(instance.client_facility([c]).ravel()))
        if f in centers:
            break
        centers.append(f)
        dist = np.minimum(dist, instance.client_facility(None, [f]).ravel())
    return np.asarray(centers, dtype=int)


def build_coreset(instance: MetricInstance, k: int, nu: float, delta: float, seed=None,
                  c0: float = C0, size: int | None = None) -> WeightedClientSet:
    """Importance-sample a weighted client subset.

    A bicriteria center set of 2k facilities comes from D^z seeding. Client c
    gets sensitivity s(c) = w_c d(c,A)^z / cost(A) + w_c / W(cluster(c)) and is
    drawn with probability s(c) / sum(s); a draw carries weight
    sum(s) w_c / (m s(c)), and repeated draws are merged. When the target size
    reaches |C| the full client set is returned with its own weights.
    """
    if not 0 < nu <= 0.5:
        raise DivClustError("nu must lie in (0, 1/2]")
    if not 0 < delta < 0.5:
        raise DivClustError("delta must lie in (0, 1/2)")
    m = coreset_size(instance, k, nu, c0) if size is None else int(size)
    n = instance.n_clients
    if m >= n:
        return WeightedClientSet(np.arange(n), np.asarray(instance.weights, dtype=float).copy(),
                                 nu=0.0, delta=delta, seed=seed)
    rng = np.random.default_rng(seed)
    z = instance.power
    w = np.asarray(instance.weights, dtype=float)
    A = d2_centers(instance, 2 * k, rng)
    # cluster label = nearest center, ties to the lowest facility id
    A = np.sort(A)
    dist = np.empty(n)
    label = np.empty(n, dtype=int)
    for lo in range(0, n, 2048):
        block = instance.client_facility(np.arange(lo, min(lo + 2048, n)), A)
        label[lo:lo + len(block)] = np.argmin(block, axis=1)
        dist[lo:lo + len(block)] = block.min(axis=1)
    dz = dist ** z
    cost_a = float(np.dot(w, dz))
    cluster_weight = np.bincount(label, weights=w, minlength=len(A))
    s = w / cluster_weight[label]
    if cost_a > 0:
        s = s + w * dz / cost_a
    total = s.sum()
    draws = rng.choice(n, size=m, replace=True, p=s / total)
    ids, counts = np.unique(draws, return_counts=True)
    weights = counts * total * w[ids] / (m * s[ids])
    return WeightedClientSet(ids, weights, nu=nu, delta=delta, seed=seed)
