import itertools
import math

import numpy as np
import pytest

from divclust import (DivClustError, GroupSystem, InfeasibleError, MetricInstance, Requirements,
                      WeightedClientSet, candidate_set, discretize, evaluate_cost, exact_divkmed,
                      exact_submodular_max, extend_with_fictitious, improv, maximize_improv, solve_divkmed_3apx,
                      solve_divkmed_fpt, solve_kmed_kpm)
from corpus import random_extension
from divclust.fpt import PartitionInstance, bucket_of, discretize_array, eta_for, lex_first_selection


# -- discretisation ---------------------------------------------------------------------


@pytest.mark.parametrize("a,eta,e", [(1, 0.3, 0), (8, 1, 3), (10, 0.5, 6), (2, 1, 1), (2.0001, 1, 2)])
def test_discretize_values(a, eta, e):
    assert discretize(a, eta) == e


def test_discretize_minimality():
    rng = np.random.default_rng(0)
    a = 1 + rng.random(2000) * 1e4
    for eta in (0.05, 0.17, 0.5, 1.0):
        e = discretize_array(a, eta)
        assert np.all((1 + eta) ** e >= a)
        assert np.all((e == 0) | ((1 + eta) ** (e - 1.0) < a))


def test_discretize_rejects_small():
    with pytest.raises(DivClustError):
        discretize(0.5, 1.0)


def test_unit_line_buckets():
    inst = MetricInstance.from_points([[0.0]], facilities=[[0.9], [2.1], [4.2]])
    buckets = {e: candidate_set(inst, [0, 1, 2], 0, e, 1.0) for e in range(5)}
    assert {e: b for e, b in buckets.items() if b} == {0: (0,), 2: (1,), 3: (2,)}
    assert bucket_of(np.array([0.2, 1.0]), 1.0).tolist() == [0, 0]


def test_candidate_set_whole_pool():
    inst = MetricInstance.from_points([[0.0, 0.0]], facilities=[[3.0, 0.0], [0.0, 3.0], [-3.0, 0.0]])
    assert candidate_set(inst, [0, 1, 2], 0, discretize(3.0, 0.5), 0.5) == (0, 1, 2)


# -- fictitious extension -------------------------------------------------------------


def test_fictitious_distances():
    inst = MetricInstance.from_points([[0.0], [5.0], [7.0]])
    ext = extend_with_fictitious(inst, [[0]], [2.0])
    d = ext.client_distances([0, 1, 2])[:, 0]
    assert d.tolist() == [4.0, 9.0, 11.0]  # 2 lambda on the member, 2 lambda + 5 at distance 5


def test_extension_is_metric():
    rng = np.random.default_rng(1)
    for _ in range(30):
        _, ext = random_extension(rng, n_points=int(rng.integers(3, 10)))
        M = ext.metric_matrix()
        assert np.allclose(M, M.T) and np.all(np.diag(M) == 0)
        # M[i,j] <= M[i,l] + M[l,j] for all i, j, l
        viol = M[:, None, :] > M[:, :, None] + M[None, :, :] + 1e-9
        assert not viol.any()


def test_improv_monotone_submodular_exhaustive():
    rng = np.random.default_rng(2)
    for _ in range(10):
        inst, ext = random_extension(rng, n_points=8)
        cl = WeightedClientSet.full(inst)
        ground = list(range(8))
        val = {}
        for r in range(len(ground) + 1):
            for S in itertools.combinations(ground, r):
                val[S] = improv(S, ext, cl)
        assert val[()] == 0.0
        for S, v in val.items():
            assert v >= -1e-9
            for x in ground:
                if x in S:
                    continue
                Sx = tuple(sorted(S + (x,)))
                assert val[Sx] >= v - 1e-9
        # diminishing returns on a sample of chains S ⊆ T
        for _ in range(300):
            T = tuple(sorted(rng.choice(8, size=int(rng.integers(0, 7)), replace=False).tolist()))
            S = tuple(f for f in T if rng.random() < 0.5)
            outside = [f for f in ground if f not in T]
            if not outside:
                continue
            x = outside[int(rng.integers(len(outside)))]
            gs = val[tuple(sorted(S + (x,)))] - val[S]
            gt = val[tuple(sorted(T + (x,)))] - val[T]
            assert gs >= gt - 1e-9


# -- maximisation -------------------------------------------------------------------------


def test_exact_matches_oracle_and_greedy_half():
    rng = np.random.default_rng(3)
    for _ in range(60):
        inst, ext = random_extension(rng, n_points=12)
        cl = WeightedClientSet.full(inst)
        sel_e, val_e = maximize_improv(ext, cl, "exact")
        combo, val_o = exact_submodular_max(ext, cl)
        assert val_e == pytest.approx(val_o, rel=1e-12, abs=1e-12)
        assert len(set(sel_e)) == ext.k and all(f in pi for f, pi in zip(sel_e, ext.candidates))
        sel_g, val_g = maximize_improv(ext, cl, "greedy")
        assert len(set(sel_g)) == ext.k and all(f in pi for f, pi in zip(sel_g, ext.candidates))
        assert val_g >= 0.5 * val_e - 1e-9
        assert improv(sel_e, ext, cl) == pytest.approx(val_e, rel=1e-9, abs=1e-9)


def test_single_pool_modes_agree():
    rng = np.random.default_rng(4)
    for _ in range(20):
        inst, ext = random_extension(rng, n_points=10, k=1)
        cl = WeightedClientSet.full(inst)
        (se, ve), (sg, vg) = maximize_improv(ext, cl, "exact"), maximize_improv(ext, cl, "greedy")
        assert se == sg and ve == pytest.approx(vg, rel=1e-12)


def test_identical_facilities_equal_value():
    inst = MetricInstance.from_points(np.vstack([np.zeros((4, 2)), np.ones((3, 2))]))
    ext = extend_with_fictitious(inst, [[0, 1], [2, 3]], [0.5, 0.5])
    cl = WeightedClientSet.full(inst)
    vals = {improv(S, ext, cl) for S in itertools.product([0, 1], [2, 3]) if len(set(S)) == 2}
    assert len(vals) == 1


def test_shared_pools_pick_distinct():
    inst = MetricInstance.from_points(np.array([[0.0], [0.1], [5.0]]))
    ext = extend_with_fictitious(inst, [[0, 1], [0, 1]], [1.0, 1.0])
    cl = WeightedClientSet.full(inst)
    for mode in ("exact", "greedy", "arbitrary"):
        sel, _ = maximize_improv(ext, cl, mode)
        assert sorted(sel) == [0, 1]
    assert lex_first_selection([[0], [0]]) is None


def test_product_cap():
    inst = MetricInstance.from_points(np.random.default_rng(0).random((30, 2)))
    ext = extend_with_fictitious(inst, [list(range(10)), list(range(10, 20)), list(range(20, 30))], [1, 1, 1])
    with pytest.raises(DivClustError, match="greedy"):
        maximize_improv(ext, WeightedClientSet.full(inst), "exact", product_cap=100)


# -- k-median with a partition matroid ----------------------------------------------------


def test_eta():
    assert eta_for(0.125, "median") == pytest.approx(math.e * 0.125 / 2)
    assert eta_for(0.125, "means") == pytest.approx(math.e * 0.125 / 16)


def test_kpm_single_facility():
    inst = MetricInstance.from_points(np.random.default_rng(5).random((8, 2)))
    pinst = PartitionInstance(((3,),), WeightedClientSet.full(inst))
    sol = solve_kmed_kpm(inst, pinst, 0.125)
    assert sol.facilities == (3,)
    assert sol.cost == pytest.approx(evaluate_cost(inst, [3]))


def test_kpm_matches_pool_brute_force():
    rng = np.random.default_rng(6)
    for _ in range(20):
        n = int(rng.integers(6, 14))
        inst = MetricInstance.from_points(rng.random((n, 2)))
        perm = rng.permutation(n)
        k = int(rng.integers(1, 4))
        pools = [tuple(sorted(p.tolist())) for p in np.array_split(perm, k)]
        pinst = PartitionInstance(tuple(pools), WeightedClientSet.full(inst))
        opt = min(evaluate_cost(inst, S) for S in itertools.product(*pools))
        for mode, bound in (("exact", 1 + 2 / math.e + 0.125), ("greedy", 2.125), ("arbitrary", 3.125)):
            sol = solve_kmed_kpm(inst, pinst, 0.125, mode=mode)
            assert opt - 1e-9 <= sol.cost <= bound * opt + 1e-9


# -- full pipeline ---------------------------------------------------------------------------


def small_problem(seed, n=14, t=2, k=3, r=None):
    rng = np.random.default_rng(seed)
    inst = MetricInstance.from_points(rng.random((n, 2)))
    gs = GroupSystem(rng.random((n, t)) < 0.4)
    r = (1,) * t if r is None else r
    return inst, gs, Requirements(r, k)


def test_fpt_plain_kmedian():
    for seed in range(5):
        inst, gs, req = small_problem(seed, t=1, r=(0,))
        opt = exact_divkmed(inst, gs, req).cost
        sol = solve_divkmed_fpt(inst, gs, req, eps=0.5, seed=seed)
        assert sol.cost <= (1 + 2 / math.e + 0.5) * opt + 1e-9
        assert sol.size == 3 and sol.feasible


def test_fpt_output_contract():
    for seed in range(8):
        inst, gs, req = small_problem(seed)
        if exact_divkmed(inst, gs, req) is None:
            with pytest.raises(InfeasibleError, match="infeasible instance"):
                solve_divkmed_fpt(inst, gs, req)
            continue
        for sol in (solve_divkmed_fpt(inst, gs, req, seed=seed), solve_divkmed_fpt(inst, gs, req, mode="greedy"),
                    solve_divkmed_3apx(inst, gs, req, seed=seed)):
            assert sol.size == req.k
            assert all(c >= r for c, r in zip(sol.coverage, req.r))
            assert sol.feasible


def test_infeasible_raises():
    inst = MetricInstance.from_points(np.random.default_rng(0).random((5, 2)))
    gs = GroupSystem(np.array([[1], [0], [0], [0], [0]], dtype=bool))
    with pytest.raises(InfeasibleError):
        solve_divkmed_fpt(inst, gs, Requirements((2,), 2))
    with pytest.raises(InfeasibleError):
        solve_divkmed_3apx(inst, gs, Requirements((2,), 2))


def test_3apx_all_facilities_cost_zero():
    inst = MetricInstance.from_points(np.random.default_rng(1).random((5, 2)))
    gs = GroupSystem(np.zeros((5, 2), dtype=bool))
    sol = solve_divkmed_3apx(inst, gs, Requirements((0, 0), 5))
    assert sol.cost == 0.0 and sol.size == 5


def test_eps_range():
    inst, gs, req = small_problem(0)
    with pytest.raises(DivClustError):
        solve_divkmed_fpt(inst, gs, req, eps=0.8)


def test_fpt_sampled_coreset_path():
    rng = np.random.default_rng(7)
    inst = MetricInstance.from_points(rng.random((400, 2)))
    gs = GroupSystem(rng.random((400, 2)) < 0.3)
    req = Requirements((1, 1), 2)
    from divclust import build_coreset
    cs = build_coreset(inst, 2, 0.5 / 16, 0.1, seed=1, size=40)
    a = solve_divkmed_3apx(inst, gs, req, coreset=cs)
    b = solve_divkmed_3apx(inst, gs, req, coreset=cs)
    assert a == b and a.feasible and a.info["coreset_size"] == len(cs)


def test_fpt_deterministic():
    inst, gs, req = small_problem(3)
    assert solve_divkmed_fpt(inst, gs, req, seed=4).record() == solve_divkmed_fpt(inst, gs, req, seed=4).record()
