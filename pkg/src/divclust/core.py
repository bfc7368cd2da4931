"""Instance model, facility classes and cost evaluation.

Clients and facilities live in separate id spaces (``0..n_clients-1`` and
``0..n_facilities-1``). Both index into a shared universe of points, so a
client and a facility may alias the same location.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

MEDIAN = "median"
MEANS = "means"
OBJECTIVES = (MEDIAN, MEANS)

# universe size below which the client x facility matrix is cached
CACHE_THRESHOLD = 4096
# rows per block when distances are computed on the fly
CHUNK_ROWS = 2048


class DivClustError(Exception):
    """Base class for library errors."""


class InfeasibleError(DivClustError):
    """No facility selection satisfies the group requirements."""


@dataclass(frozen=True, eq=False)
class MetricInstance:
    """Clients, facilities and a distance oracle.

    Use :meth:`from_points` or :meth:`from_matrix` rather than the raw
    constructor.
    """

    client_index: np.ndarray
    facility_index: np.ndarray
    weights: np.ndarray
    objective: str = MEDIAN
    points: np.ndarray | None = None
    matrix: np.ndarray | None = None
    cache_threshold: int = CACHE_THRESHOLD
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_points(cls, clients, facilities=None, weights=None, objective=MEDIAN,
                    cache_threshold=CACHE_THRESHOLD) -> "MetricInstance":
        """Euclidean instance. ``facilities=None`` makes every client a facility."""
        clients = np.atleast_2d(np.asarray(clients, dtype=float))
        if facilities is None:
            points = clients
            cidx = np.arange(len(clients))
            fidx = cidx.copy()
        else:
            facilities = np.atleast_2d(np.asarray(facilities, dtype=float))
            if facilities.shape[1] != clients.shape[1]:
                raise DivClustError("clients and facilities differ in dimension")
            points = np.vstack([clients, facilities])
            cidx = np.arange(len(clients))
            fidx = np.arange(len(clients), len(points))
        return cls._build(cidx, fidx, weights, objective, points=points,
                          cache_threshold=cache_threshold)

    @classmethod
    def from_matrix(cls, matrix, clients=None, facilities=None, weights=None,
                    objective=MEDIAN, tol=1e-9) -> "MetricInstance":
        """Explicit-metric instance; ``clients``/``facilities`` are row indices."""
        matrix = np.asarray(matrix, dtype=float)
        validate_metric(matrix, tol=tol)
        n = len(matrix)
        cidx = np.arange(n) if clients is None else np.asarray(clients, dtype=int)
        fidx = np.arange(n) if facilities is None else np.asarray(facilities, dtype=int)
        if cidx.size and (cidx.min() < 0 or cidx.max() >= n):
            raise DivClustError("client row index out of range")
        if fidx.size and (fidx.min() < 0 or fidx.max() >= n):
            raise DivClustError("facility row index out of range")
        return cls._build(cidx, fidx, weights, objective, matrix=matrix)

    @classmethod
    def _build(cls, cidx, fidx, weights, objective, **kw):
        if objective not in OBJECTIVES:
            raise DivClustError(f"unknown objective {objective!r}")
        if len(cidx) == 0 or len(fidx) == 0:
            raise DivClustError("instance needs at least one client and one facility")
        if weights is None:
            w = np.ones(len(cidx))
        else:
            w = np.asarray(weights, dtype=float)
            if w.shape != (len(cidx),):
                raise DivClustError("one weight per client required")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise DivClustError("client weights must be positive and finite")
        for a in (cidx, fidx, w):
            a.setflags(write=False)
        return cls(client_index=cidx, facility_index=fidx, weights=w, objective=objective, **kw)

    def with_objective(self, objective: str) -> "MetricInstance":
        return MetricInstance._build(self.client_index, self.facility_index, self.weights,
                                     objective, points=self.points, matrix=self.matrix,
                                     cache_threshold=self.cache_threshold)

    @property
    def n_clients(self) -> int:
        return len(self.client_index)

    @property
    def n_facilities(self) -> int:
        return len(self.facility_index)

    @property
    def n_points(self) -> int:
        return len(self.points) if self.points is not None else len(self.matrix)

    @property
    def distance_source(self) -> str:
        return "euclidean-L2" if self.points is not None else "explicit-matrix"

    @property
    def dim(self) -> int | None:
        return None if self.points is None else self.points.shape[1]

    @property
    def power(self) -> int:
        return 2 if self.objective == MEANS else 1

    # -- distances -------------------------------------------------------

    def universe_dist(self, a, b) -> np.ndarray:
        """Distances between universe points ``a`` (rows) and ``b`` (columns)."""
        a = np.asarray(a, dtype=int)
        b = np.asarray(b, dtype=int)
        if self.matrix is not None:
            return self.matrix[np.ix_(a, b)]
        return cdist(self.points[a], self.points[b])

    def _cached_cf(self) -> np.ndarray | None:
        if self.matrix is None and self.n_clients + self.n_facilities > self.cache_threshold:
            return None
        cf = self._cache.get("cf")
        if cf is None:
            cf = self.universe_dist(self.client_index, self.facility_index)
            cf.setflags(write=False)
            self._cache["cf"] = cf
        return cf

    def client_facility(self, clients=None, facilities=None) -> np.ndarray:
        """Client x facility distance block (ids, not universe indices)."""
        cf = self._cached_cf()
        c = np.arange(self.n_clients) if clients is None else np.asarray(clients, dtype=int)
        f = np.arange(self.n_facilities) if facilities is None else np.asarray(facilities, dtype=int)
        if cf is not None:
            return cf[np.ix_(c, f)]
        return self.universe_dist(self.client_index[c], self.facility_index[f])

    def facility_facility(self, a=None, b=None) -> np.ndarray:
        a = np.arange(self.n_facilities) if a is None else np.asarray(a, dtype=int)
        b = a if b is None else np.asarray(b, dtype=int)
        return self.universe_dist(self.facility_index[a], self.facility_index[b])

    def client_client(self, a=None, b=None) -> np.ndarray:
        a = np.arange(self.n_clients) if a is None else np.asarray(a, dtype=int)
        b = a if b is None else np.asarray(b, dtype=int)
        return self.universe_dist(self.client_index[a], self.client_index[b])

    def nearest_distance(self, S, clients=None) -> np.ndarray:
        """d(c, S) for every client (or the given client ids), computed in row blocks."""
        S = check_facility_ids(self, S)
        c = np.arange(self.n_clients) if clients is None else np.asarray(clients, dtype=int)
        out = np.empty(len(c))
        for lo in range(0, len(c), CHUNK_ROWS):
            block = self.client_facility(c[lo:lo + CHUNK_ROWS], S)
            out[lo:lo + CHUNK_ROWS] = block.min(axis=1)
        return out

    def aspect_ratio(self) -> float:
        """Max over min nonzero client-facility distance (inf if all zero)."""
        hi, lo = 0.0, math.inf
        for start in range(0, self.n_clients, CHUNK_ROWS):
            block = self.client_facility(np.arange(start, min(start + CHUNK_ROWS, self.n_clients)))
            hi = max(hi, float(block.max()))
            nz = block[block > 0]
            if nz.size:
                lo = min(lo, float(nz.min()))
        return hi / lo if lo < math.inf else math.inf


def validate_metric(matrix: np.ndarray, tol: float = 1e-9) -> None:
    """Raise unless ``matrix`` is a square, symmetric, zero-diagonal metric."""
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DivClustError("distance matrix must be square")
    if not np.all(np.isfinite(matrix)) or np.any(matrix < 0):
        raise DivClustError("distances must be finite and nonnegative")
    if np.any(np.abs(np.diag(matrix)) > tol):
        raise DivClustError("distance matrix needs a zero diagonal")
    if np.any(np.abs(matrix - matrix.T) > tol):
        raise DivClustError("distance matrix must be symmetric")
    for k in range(len(matrix)):
        if np.any(matrix > matrix[:, k:k + 1] + matrix[k:k + 1, :] + tol):
            raise DivClustError("distance matrix violates the triangle inequality")


def check_facility_ids(instance: MetricInstance, S) -> np.ndarray:
    S = np.asarray(sorted(set(int(f) for f in S)), dtype=int)
    if S.size and (S[0] < 0 or S[-1] >= instance.n_facilities):
        raise DivClustError(f"unknown facility id in {S.tolist()}")
    return S


@dataclass(frozen=True)
class WeightedClientSet:
    """A weighted subset of client ids (e.g. a coreset)."""

    ids: np.ndarray
    weights: np.ndarray
    nu: float = 0.0
    delta: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if len(self.ids) != len(self.weights):
            raise DivClustError("ids and weights differ in length")
        if np.any(~np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise DivClustError("coreset weights must be positive and finite")

    def __len__(self):
        return len(self.ids)

    @classmethod
    def full(cls, instance: MetricInstance) -> "WeightedClientSet":
        return cls(ids=np.arange(instance.n_clients), weights=np.asarray(instance.weights))


def evaluate_cost(instance: MetricInstance, S, clients: WeightedClientSet | None = None) -> float:
    """Weighted k-median (sum of d) or k-means (sum of d^2) cost of ``S``."""
    S = check_facility_ids(instance, S)
    if S.size == 0:
        raise DivClustError("empty solution")
    if clients is None:
        d = instance.nearest_distance(S)
        w = instance.weights
    else:
        d = instance.nearest_distance(S, clients.ids)
        w = clients.weights
    if instance.objective == MEANS:
        d = d * d
    return float(np.dot(w, d))


def assign(instance: MetricInstance, S) -> np.ndarray:
    """Nearest facility id of every client; ties go to the lowest id."""
    S = check_facility_ids(instance, S)
    if S.size == 0:
        raise DivClustError("empty solution")
    out = np.empty(instance.n_clients, dtype=int)
    for lo in range(0, instance.n_clients, CHUNK_ROWS):
        ids = np.arange(lo, min(lo + CHUNK_ROWS, instance.n_clients))
        out[lo:lo + len(ids)] = S[np.argmin(instance.client_facility(ids, S), axis=1)]
    return out


# -- groups -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroupSystem:
    """Boolean membership matrix, one row (characteristic vector) per facility."""

    membership: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.membership, dtype=bool)
        if m.ndim != 2 or m.shape[1] < 1:
            raise DivClustError("membership must be (n_facilities, t) with t >= 1")
        m.setflags(write=False)
        object.__setattr__(self, "membership", m)

    @classmethod
    def from_lists(cls, groups: Sequence[Iterable[int]], n_facilities: int) -> "GroupSystem":
        m = np.zeros((n_facilities, len(groups)), dtype=bool)
        for i, g in enumerate(groups):
            g = list(g)
            if g and (min(g) < 0 or max(g) >= n_facilities):
                raise DivClustError(f"group {i} references an unknown facility")
            m[g, i] = True
        return cls(m)

    @property
    def t(self) -> int:
        return self.membership.shape[1]

    @property
    def n_facilities(self) -> int:
        return self.membership.shape[0]

    def groups(self) -> list[list[int]]:
        return [np.flatnonzero(self.membership[:, i]).tolist() for i in range(self.t)]

    def signature(self, f: int) -> tuple[int, ...]:
        return tuple(int(b) for b in self.membership[f])


@dataclass(frozen=True)
class Requirements:
    r: tuple[int, ...]
    k: int

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(int(x) for x in self.r))
        if self.k < 1:
            raise DivClustError("k must be positive")
        if any(x < 0 or x > self.k for x in self.r):
            raise DivClustError("requirements must lie in [0, k]")

    @property
    def t(self) -> int:
        return len(self.r)

    @property
    def rmax(self) -> int:
        return max(self.r, default=0)

    def check(self, groups: GroupSystem, n_facilities: int | None = None) -> None:
        if self.t != groups.t:
            raise DivClustError(f"requirement vector has {self.t} entries, expected {groups.t}")
        n = groups.n_facilities if n_facilities is None else n_facilities
        if self.k > n:
            raise DivClustError("k exceeds the number of facilities")


def coverage(S, groups: GroupSystem) -> tuple[int, ...]:
    """|S ∩ G_i| for every group i."""
    S = [int(f) for f in S]
    if any(f < 0 or f >= groups.n_facilities for f in S):
        raise DivClustError("unknown facility id")
    if not S:
        return (0,) * groups.t
    return tuple(int(x) for x in groups.membership[S].sum(axis=0))


def satisfies(cov: Sequence[int], r: Sequence[int]) -> bool:
    return all(c >= x for c, x in zip(cov, r))


# -- facility classes ---------------------------------------------------------


@dataclass(frozen=True)
class FacilityClass:
    signature: tuple[int, ...]
    members: tuple[int, ...]

    @property
    def frequency(self) -> int:
        return len(self.members)


def partition_classes(groups: GroupSystem, facilities: Iterable[int] | None = None) -> list[FacilityClass]:
    """Split facilities by characteristic vector, sorted lexicographically by signature."""
    ids = np.arange(groups.n_facilities) if facilities is None else np.unique(
        np.fromiter((int(f) for f in facilities), dtype=int))
    if ids.size == 0:
        return []
    if ids[0] < 0 or ids[-1] >= groups.n_facilities:
        raise DivClustError("unknown facility id")
    sig, inverse = np.unique(groups.membership[ids], axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(sig) + 1))
    out = [FacilityClass(tuple(int(b) for b in row), tuple(int(f) for f in ids[order[bounds[i]:bounds[i + 1]]]))
           for i, row in enumerate(sig)]
    # np.unique sorts False < True row-wise, which is already lexicographic; keep it explicit
    out.sort(key=lambda c: c.signature)
    return out


# -- solutions ----------------------------------------------------------------


@dataclass(frozen=True)
class Solution:
    facilities: tuple[int, ...]
    cost: float
    coverage: tuple[int, ...]
    algorithm: str
    feasible: bool
    budget: int
    info: dict = field(default_factory=dict, compare=False)

    @property
    def size(self) -> int:
        return len(self.facilities)

    def record(self) -> dict:
        """JSON-ready dict; ``info`` entries are merged in."""
        rec = {
            "alg": self.algorithm,
            "cost": self.cost,
            "k_star": self.size,
            "coverage": list(self.coverage),
            "facilities": list(self.facilities),
            "feasible": self.feasible,
        }
        rec.update(self.info)
        return rec


def make_solution(instance: MetricInstance, S, groups: GroupSystem | None, req: Requirements | None,
                  algorithm: str, budget: int | None = None, **info) -> Solution:
    S = tuple(int(f) for f in check_facility_ids(instance, S))
    cost = evaluate_cost(instance, S) if S else math.inf
    if groups is not None:
        cov = coverage(S, groups)
    else:
        cov = ()
    if budget is None:
        budget = req.k if req is not None else len(S)
    feasible = len(S) <= budget and (req is None or satisfies(cov, req.r))
    return Solution(S, cost, cov, algorithm, feasible, budget, dict(info))
