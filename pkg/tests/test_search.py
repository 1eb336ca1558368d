import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from offgrid.data import pairwise_sq_distances, percentile_sq_distance
from offgrid.kernel import rbf_kernel, reparametrize_exact
from offgrid.kkm import Partition, assign_step, kkm_run, probe_changes, random_partition
from offgrid.search import (
    NewtonDivergence,
    NotConvergedError,
    SearchTrace,
    binary_search_critical,
    bisection_driver,
    critical_search,
    evaluate_sigmas,
    grid_sigmas,
    hierarchical_search,
    mknn_sigmas,
    newton_critical,
    newton_critical_min,
    newton_g,
    offgrid_driver,
    resolve_sigma0,
    sigma_lower_bound,
)

from conftest import blobs, converged_instance


# lower bound


def test_lower_bound_value():
    X = np.arange(100.0)[:, None]  # d_min = 1
    b = sigma_lower_bound(pairwise_sq_distances(X))
    assert b.sigma == pytest.approx(float(1 / mpmath.log(300)), rel=1e-15)
    assert round(b.sigma, 6) == 0.175322
    assert b.d_min == 1.0 and b.n == 100 and not b.degenerate


def test_lower_bound_degenerate():
    b = sigma_lower_bound(pairwise_sq_distances(np.array([[0.0], [0.0], [1.0]])))
    assert b.sigma == 0.0 and b.degenerate
    with pytest.raises(ValueError):
        sigma_lower_bound(np.zeros((1, 1)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 200), st.integers(1, 6), st.integers(2, 5))
def test_lower_bound_no_reassignment(seed, n, d, k):
    r = np.random.default_rng(seed)
    D = pairwise_sq_distances(r.normal(size=(n, d)))
    b = sigma_lower_bound(D)
    if b.degenerate:
        return
    P = random_partition(n, min(k, n), r)
    assert assign_step(rbf_kernel(D, b.sigma), P)[1] == 0


def test_resolve_sigma0():
    D = pairwise_sq_distances(np.arange(10.0)[:, None])
    assert resolve_sigma0(D, "percentile:1") == percentile_sq_distance(D, 1)
    assert resolve_sigma0(D, "theorem1") == sigma_lower_bound(D).sigma
    assert resolve_sigma0(D, "2.5") == 2.5
    assert resolve_sigma0(D, 3) == 3.0
    with pytest.raises(ValueError):
        resolve_sigma0(D, "-1")
    with pytest.raises(ValueError):
        resolve_sigma0(pairwise_sq_distances(np.zeros((3, 1))), "theorem1")


# critical search


def test_far_pairs_never_change():
    X = np.array([[0.0], [1.0], [100.0], [101.0]])
    D = pairwise_sq_distances(X)
    P = Partition([0, 0, 1, 1], 2)
    K = rbf_kernel(D, 0.5)
    assert not probe_changes(K, P)[0]
    res = critical_search(K, P, 12)
    assert not res.found and res.K_next is None and res.exponent is None
    # confirm on a geometric bandwidth scan up to 1e8
    for s in np.geomspace(0.5, 1e8, 200):
        assert not probe_changes(rbf_kernel(D, s), P)[0]


def test_depth_one_changes_at_half():
    D, K, P = converged_instance(60, 2, 3, 0, quantile=1.0)
    half = reparametrize_exact(K, 2 * K.bandwidth)
    if not probe_changes(half, P)[0]:
        pytest.skip("instance does not change at the first dyadic step")
    res = critical_search(K, P, 1)
    assert res.found and res.exponent.value == Fraction(1, 2)
    assert res.sigma_next == 2 * K.bandwidth
    assert res.probes == 1


def test_not_converged_is_rejected():
    X, _ = blobs(30, 2, 2, 1)
    K = rbf_kernel(pairwise_sq_distances(X), 5.0)
    P = random_partition(30, 2, 0)
    assert probe_changes(K, P)[0]
    with pytest.raises(NotConvergedError):
        critical_search(K, P, 5)
    with pytest.raises(ValueError):
        critical_search(K, P, 0, check_converged=False)
    with pytest.raises(ValueError):
        critical_search(K, P, 3, "bogus", check_converged=False)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("depth", [3, 8, 16])
def test_operation_accounting_and_bracketing(seed, depth):
    D, K, P = converged_instance(40, 2, 2, seed)
    res = critical_search(K, P, depth)
    c = res.counter
    assert (c.sqrts, c.hadamards, c.probes, c.check_probes) == (depth, depth, depth, 1)
    if not res.found:
        return
    e = res.exponent.value
    assert 0 < e <= 1
    assert res.upper - e == Fraction(1, 2**depth)
    assert res.K_next.exponent == e
    assert probe_changes(res.K_next, P)[0]
    above = reparametrize_exact(K, K.bandwidth / float(res.upper))
    assert not probe_changes(above, P)[0]
    np.testing.assert_allclose(res.K_next.entries, K.entries ** float(e), rtol=1e-10)
    assert res.sigma_next == pytest.approx(K.bandwidth / float(e), rel=1e-15)


@pytest.mark.parametrize("seed", range(6))
def test_envelope_against_bisection_oracle(seed):
    D, K, P = converged_instance(40, 2, 2, seed)
    oracle = binary_search_critical(D, K.bandwidth, P, 1e-9, K=K)
    for depth in (6, 12):
        res = critical_search(K, P, depth)
        assert res.found == oracle.found
        if not res.found:
            continue
        exact = reparametrize_exact(K, oracle.sigma).entries
        mask = K.entries >= 1e-8
        eps = (1 / K.entries[mask].min()) ** (2.0**-depth) - 1
        ratio = res.K_next.entries[mask] / exact[mask]
        assert np.all(ratio <= 1 + eps) and np.all(ratio >= 1 - eps)


@pytest.mark.parametrize("policy", ["movers", "margin"])
def test_restricted_policies(policy):
    D, K, P = converged_instance(80, 2, 3, 3)
    full = critical_search(K, P, 10)
    res = critical_search(K, P, 10, policy, margin_fraction=0.5, validate=True)
    assert res.counter.probes == 10
    assert res.found == full.found
    # disagreements are reported, not hidden
    assert res.counter.validation_disagreements >= 0
    if res.counter.validation_disagreements == 0 and full.found:
        assert res.exponent == full.exponent


def test_k_one_never_changes():
    D, _, _ = converged_instance(30, 2, 2, 0)
    K = rbf_kernel(D, 1.0)
    P = Partition(np.zeros(30, dtype=int), 1)
    assert not critical_search(K, P, 10).found


# drivers


def test_driver_from_lower_bound_starts_inert():
    X, y = blobs(50, 2, 2, 3)
    D = pairwise_sq_distances(X)
    trace = offgrid_driver(D, 2, sigma_lower_bound(D).sigma, 3, max_steps=10, seed=0, labels=y)
    assert trace.steps[0].kkm_iterations == 1
    assert trace.steps[0].assignment == random_partition(50, 2, 0).assignment.tolist()


def test_driver_k_one_single_step():
    X, _ = blobs(20, 2, 2, 3)
    trace = offgrid_driver(pairwise_sq_distances(X), 1, 1.0, 4, seed=0)
    assert len(trace.steps) == 1 and trace.stop_reason == "no change found"


@pytest.mark.parametrize("seed", range(4))
def test_driver_trace_invariants(seed):
    X, y = blobs(80, 2, 3, seed)
    D = pairwise_sq_distances(X)
    trace = offgrid_driver(D, 3, percentile_sq_distance(D, 1), 4, max_steps=30, seed=seed, labels=y)
    sigmas = trace.sigmas
    assert all(b > a for a, b in zip(sigmas, sigmas[1:]))
    assert all(s.assignment != t.assignment for s, t in zip(trace.steps, trace.steps[1:]))
    assert all(s.nmi is not None and 0 <= s.nmi <= 1 for s in trace.steps)
    assert trace.stop_reason in {"no change found", "sigma cap reached", "max steps", "kkm did not converge"}
    roundtrip = SearchTrace.from_dict(trace.as_dict())
    assert roundtrip.as_dict() == trace.as_dict()


def test_driver_respects_cap_and_max_steps():
    X, _ = blobs(60, 2, 3, 2)
    D = pairwise_sq_distances(X)
    s0 = percentile_sq_distance(D, 1)
    trace = offgrid_driver(D, 3, s0, 2, seed=0, sigma_cap=4 * s0)
    assert all(s <= 4 * s0 for s in trace.sigmas)
    assert len(offgrid_driver(D, 3, s0, 2, max_steps=2, seed=0).steps) <= 2


def test_hierarchical_single_depth_equals_driver():
    X, y = blobs(60, 2, 3, 5)
    D = pairwise_sq_distances(X)
    s0 = percentile_sq_distance(D, 1)
    a = hierarchical_search(D, 3, s0, (1,), seed=4, labels=y)
    b = offgrid_driver(D, 3, s0, 1, seed=4, labels=y)
    strip = lambda t: [dict(s.as_dict(), wall_time_ms=0) for s in t.steps]
    assert strip(a) == strip(b)


def test_hierarchical_schedule_validation():
    D = pairwise_sq_distances(np.arange(5.0)[:, None])
    for bad in [(), (2, 1), (1, 1)]:
        with pytest.raises(ValueError):
            hierarchical_search(D, 2, 1.0, bad, seed=0)


@pytest.mark.parametrize("seed", range(20))
def test_refinement_never_worse(seed):
    X, y = blobs(60, 2, 3, seed % 5)
    D = pairwise_sq_distances(X)
    s0 = percentile_sq_distance(D, 1)
    coarse = hierarchical_search(D, 3, s0, (1,), seed=seed)
    fine = hierarchical_search(D, 3, s0, (1, 2), seed=seed)
    assert fine.best_cnnc() <= coarse.best_cnnc()
    assert all(b > a for a, b in zip(fine.sigmas, fine.sigmas[1:]))


# baselines


def two_cluster_instance(seed, n=6):
    r = np.random.default_rng(seed)
    X = np.r_[r.normal(0, 0.3, (n // 2, 2)), r.normal(2.0, 0.3, (n - n // 2, 2))]
    D = pairwise_sq_distances(X)
    K = rbf_kernel(D, percentile_sq_distance(D, 5))
    P = kkm_run(K, random_partition(n, 2, seed)).partition
    return D, K, P


@pytest.mark.parametrize("seed", range(5))
def test_newton_derivative_finite_difference(seed):
    D, K, P = two_cluster_instance(seed, 10)
    L = -D
    for x in range(P.n):
        s = K.bandwidth * 1.7
        h = 1e-6 * s
        _, dg = newton_g(L, P, x, s)
        g_plus, _ = newton_g(L, P, x, s + h)
        g_minus, _ = newton_g(L, P, x, s - h)
        fd = (g_plus - g_minus) / (2 * h)
        assert dg == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_newton_g_positive_at_converged_sigma():
    D, K, P = two_cluster_instance(1, 10)
    for x in range(P.n):
        g, _ = newton_g(-D, P, x, K.bandwidth)
        assert g >= 0


def test_newton_matches_dyadic_on_six_points():
    hits = 0
    for seed in range(30):
        D, K, P = two_cluster_instance(seed)
        res = critical_search(K, P, 20)
        if not res.found:
            continue
        try:
            root = newton_critical_min(K, P, D=D)
        except NewtonDivergence:
            continue
        # dense scan oracle: the partition is stable just below and changes just above
        assert root == pytest.approx(res.sigma_next, rel=1e-3)
        assert not probe_changes(rbf_kernel(D, root * (1 - 1e-3)), P)[0]
        assert probe_changes(rbf_kernel(D, root * (1 + 1e-3)), P)[0]
        hits += 1
    assert hits >= 3


def test_newton_errors():
    D, K, P = two_cluster_instance(2)
    with pytest.raises(ValueError):
        newton_critical(K, Partition(np.zeros(6, dtype=int), 2), 0)
    with pytest.raises(ValueError):
        newton_critical(K, Partition([0, 1, 2, 0, 1, 2], 3), 0)
    with pytest.raises(NewtonDivergence):
        newton_critical(K, P, 0, max_iters=1, sigma_init=K.bandwidth * 1.5, D=D)
    far = pairwise_sq_distances(np.array([[0.0], [1.0], [100.0], [101.0]]))
    Kf = rbf_kernel(far, 0.5)
    with pytest.raises(NewtonDivergence):
        newton_critical_min(Kf, Partition([0, 0, 1, 1], 2), D=far)


def test_binary_search_immediate_and_not_found():
    D, K, P = two_cluster_instance(3)
    r = binary_search_critical(D, 1.0, P, 1e-3, 1.0005)
    assert r.found and r.sigma == pytest.approx(1.00025) and r.probes == 0
    far = pairwise_sq_distances(np.array([[0.0], [1.0], [100.0], [101.0]]))
    r = binary_search_critical(far, 0.5, Partition([0, 0, 1, 1], 2), 1e-3)
    assert not r.found and r.sigma is None


@pytest.mark.parametrize("seed", range(5))
def test_binary_search_agrees_with_dyadic(seed):
    D, K, P = converged_instance(40, 2, 2, seed)
    res = critical_search(K, P, 20)
    bis = binary_search_critical(D, K.bandwidth, P, 1e-9 * K.bandwidth, K=K)
    assert res.found == bis.found
    if res.found:
        assert bis.sigma == pytest.approx(res.sigma_next, rel=1e-4)
        assert bis.hi - bis.lo < 1e-9 * K.bandwidth


def test_bisection_driver_trace():
    X, y = blobs(50, 2, 2, 0)
    D = pairwise_sq_distances(X)
    trace = bisection_driver(D, 2, percentile_sq_distance(D, 1), 1e-3, max_steps=6, seed=1, labels=y)
    assert trace.method == "binsearch"
    assert all(b > a for a, b in zip(trace.sigmas, trace.sigmas[1:]))


def test_mknn_hand_example():
    D = pairwise_sq_distances(np.array([[0.0], [1.0], [3.0]]))
    sig = mknn_sigmas(D)
    assert sig[0] == pytest.approx(32 / 9)
    # n = 3: floor(2 (ln 3 + 1)) = 4, truncated to n - 1 = 2
    assert math.floor(2 * (math.log(3) + 1)) == 4
    assert len(sig) == 2
    with pytest.raises(ValueError):
        mknn_sigmas(D[:2, :2])


def test_mknn_range_and_duplicates(caplog):
    D = pairwise_sq_distances(np.random.default_rng(0).normal(size=(2000, 1))[:300])
    assert len(mknn_sigmas(D)) <= math.floor(2 * (math.log(300) + 1))
    assert len(mknn_sigmas(D, 2.0)) <= math.floor(2 * (math.log2(300) + 1))
    dup = pairwise_sq_distances(np.array([[0.0], [0.0], [1.0], [1.0], [5.0], [5.0]]))
    sig = mknn_sigmas(dup)
    assert all(s > 0 for s in sig)
    assert "dropping" in caplog.text


def test_grid_sigmas():
    g = grid_sigmas()
    assert len(g) == 13 and g[0] == 1e-6 and g[-1] == 1e6
    assert all(b / a == pytest.approx(10) for a, b in zip(g, g[1:]))


def test_grid_below_bound_is_one_iteration():
    X, _ = blobs(60, 3, 3, 1)
    D = pairwise_sq_distances(X)
    trace = evaluate_sigmas(D, 3, grid_sigmas(), random_partition(60, 3, 0))
    bound = sigma_lower_bound(D).sigma
    low = [s for s in trace.steps if s.sigma <= bound]
    assert low and all(s.kkm_iterations == 1 for s in low)
