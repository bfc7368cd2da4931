import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from divclust import (GroupSystem, MetricInstance, Requirements, coverage, dp_feasible, enumerate_feasible_patterns,
                      evaluate_cost, feasible_subset_exists, partition_classes, pattern_to_facilities, satisfies)
from divclust.feasibility import randomized_round

SETTINGS = settings(max_examples=60, deadline=None)


@st.composite
def group_systems(draw, max_n=14, max_t=4):
    n = draw(st.integers(1, max_n))
    t = draw(st.integers(1, max_t))
    M = draw(arrays(bool, (n, t)))
    return GroupSystem(M)


@st.composite
def problems(draw):
    gs = draw(group_systems())
    k = draw(st.integers(1, min(5, gs.n_facilities)))
    r = tuple(draw(st.integers(0, k)) for _ in range(gs.t))
    return gs, Requirements(r, k)


@st.composite
def point_sets(draw):
    n = draw(st.integers(2, 15))
    pts = draw(arrays(float, (n, 2), elements=st.floats(-100, 100, allow_nan=False, width=32)))
    return pts


@SETTINGS
@given(point_sets(), st.data())
def test_cost_monotone_under_superset(pts, data):
    inst = MetricInstance.from_points(pts)
    n = len(pts)
    S = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    extra = data.draw(st.sets(st.integers(0, n - 1)))
    for obj in ("median", "means"):
        i = inst.with_objective(obj)
        assert evaluate_cost(i, S | extra) <= evaluate_cost(i, S) + 1e-9


@SETTINGS
@given(group_systems(), st.data())
def test_coverage_additive(gs, data):
    ids = list(range(gs.n_facilities))
    S1 = data.draw(st.sets(st.sampled_from(ids)))
    S2 = data.draw(st.sets(st.sampled_from(ids))) - S1
    assert coverage(S1 | S2, gs) == tuple(a + b for a, b in zip(coverage(S1, gs), coverage(S2, gs)))


@SETTINGS
@given(group_systems())
def test_classes_partition_facilities(gs):
    cl = partition_classes(gs)
    members = sorted(f for c in cl for f in c.members)
    assert members == list(range(gs.n_facilities))
    assert len(cl) <= 2 ** gs.t
    assert [c.signature for c in cl] == sorted(c.signature for c in cl)
    for c in cl:
        assert all(gs.signature(f) == c.signature for f in c.members)


@SETTINGS
@given(problems())
def test_feasibility_triple_agreement(prob):
    gs, req = prob
    cl = partition_classes(gs)
    dp = dp_feasible(cl, req)
    es = enumerate_feasible_patterns(cl, req)
    assert dp.feasible == bool(es) == feasible_subset_exists(gs, req)
    for p in es:
        assert satisfies(p.aggregate, req.r)
        assert all(n <= cl[c].frequency for c, n in p.multiplicity().items())
    if dp.feasible:
        S = pattern_to_facilities(dp.picks, cl, seed=0)
        assert len(S) == len(set(S)) <= req.k
        assert satisfies(coverage(S, gs), req.r)


@SETTINGS
@given(arrays(float, 6, elements=st.floats(0, 10, allow_nan=False)), st.integers(0, 2 ** 32 - 1))
def test_rounding_stays_adjacent(x, seed):
    xr = randomized_round(x, np.random.default_rng(seed), size=50)
    assert np.all((xr == np.floor(x)) | (xr == np.ceil(x)) | (np.abs(x - np.rint(x)) < 1e-9))


@SETTINGS
@given(group_systems(), st.randoms(use_true_random=False))
def test_classes_order_invariant(gs, rnd):
    perm = list(range(gs.n_facilities))
    rnd.shuffle(perm)
    a = partition_classes(gs)
    b = partition_classes(GroupSystem(gs.membership[perm]))
    assert [c.signature for c in a] == [c.signature for c in b]
    assert [sorted(perm[f] for f in c.members) for c in b] == [list(c.members) for c in a]
