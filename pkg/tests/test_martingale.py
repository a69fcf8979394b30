import math

import numpy as np
import pytest

from ewens_pitman.asymptotics import f_ij, gamma_matrix_quadrature
from ewens_pitman.errors import DomainError, StateError
from ewens_pitman.martingale import (
    MartingaleState,
    a_coefficients,
    advance,
    conditional_increment_cov,
    increasing_process_limit_check,
    run_martingale,
    step_probabilities,
)
from ewens_pitman.partition import ModelParams, PartitionCounts, SeedSpec, step, transition_probabilities


def enumerated_increment_cov(state, params):
    """Covariance of Delta over every possible next seating, weighted exactly."""
    d = params.d
    a = a_coefficients(state.h + 1, params)
    p, q = step_probabilities(state, params)
    p_new, join = transition_probabilities(state, params)
    outcomes = [(p_new, np.eye(d + 1)[0] + np.eye(d + 1)[1])]
    for r, w in join.items():
        xi = np.zeros(d + 1)
        if r <= d:
            xi[r] -= 1
        if r + 1 <= d:
            xi[r + 1] += 1
        outcomes.append((w, xi))
    deltas = [(w, a * (xi - (p - q))) for w, xi in outcomes]
    mean = sum(w * dl for w, dl in deltas)
    second = sum(w * np.outer(dl, dl) for w, dl in deltas)
    return second - np.outer(mean, mean), mean


def test_cov_example_and_oracle():
    params = ModelParams.linear(0.0, 1.0, 2, d=1)
    state = PartitionCounts(1, 1, {1: 1})
    cov = conditional_increment_cov(state, params)
    assert cov[0, 1] == pytest.approx(2 / 3, rel=1e-14)
    ref, mean = enumerated_increment_cov(state, params)
    assert np.allclose(cov, ref, rtol=1e-13, atol=1e-15)
    assert np.allclose(mean, 0, atol=1e-15)


def test_cov_entry_13_vanishes_without_small_blocks():
    params = ModelParams.linear(0.3, 1.0, 20, d=2)
    state = PartitionCounts.from_block_sizes([3, 4])
    assert conditional_increment_cov(state, params)[0, 2] == 0.0
    # with K_2 = 0 but K_1 > 0 the entry is -a_0 a_2 p_0 p_2, not zero
    state = PartitionCounts.from_block_sizes([1, 3])
    cov = conditional_increment_cov(state, params)
    ref, _ = enumerated_increment_cov(state, params)
    assert cov[0, 2] < 0 and cov[0, 2] == pytest.approx(ref[0, 2], rel=1e-12)


def test_cov_matches_enumeration_on_random_states():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        n = int(rng.integers(20, 200))
        h = int(rng.integers(1, n))
        sizes, left = [], h
        while left:
            s = int(min(left, rng.geometric(0.4)))
            sizes.append(s)
            left -= s
        d = int(rng.integers(1, 5))
        params = ModelParams.linear(float(rng.uniform(0, 0.95)), float(rng.uniform(0.2, 3)), n, d)
        state = PartitionCounts.from_block_sizes(sizes)
        cov = conditional_increment_cov(state, params)
        ref, mean = enumerated_increment_cov(state, params)
        scale = np.abs(ref).max()
        assert np.abs(cov - ref).max() <= 1e-12 * scale
        assert np.abs(mean).max() <= 1e-12 * np.abs(a_coefficients(h + 1, params)).max()
        assert np.all(np.diag(cov) >= 0)


def test_advance_tracks_identity_and_matches_kernel():
    params = ModelParams.linear(0.45, 0.7, 2000, d=3)
    seed = SeedSpec(3, 1)
    u = iter(seed.uniforms(params.n))
    state, mart = PartitionCounts(), MartingaleState.empty(3)
    new, xi = step(state, params, lambda: next(u))
    mart = advance(mart, state, params, xi)
    assert mart.h == 1 and np.all(mart.a == 1) and np.all(mart.A == 0)
    assert mart.M.tolist() == [1, 1, 0, 0]
    state = new
    prev_a0 = 1.0
    for _ in range(params.n - 1):
        new, xi = step(state, params, lambda: next(u))
        mart = advance(mart, state, params, xi)
        assert mart.a[0] < prev_a0
        prev_a0 = mart.a[0]
        assert np.linalg.eigvalsh(mart.increasing_process).min() >= -1e-9
        state = new
    run = run_martingale(params, seed)
    assert np.allclose(mart.increasing_process, run.increasing_process, rtol=1e-12)
    assert np.allclose(mart.M, run.M, rtol=1e-10, atol=1e-10)
    assert np.array_equal(mart.K, run.K)
    assert np.allclose(a_coefficients(params.n, params), run.a, rtol=1e-12)
    assert run.max_identity_error <= 1e-10


def test_advance_rejects_mismatched_state():
    params = ModelParams.linear(0.2, 1.0, 10)
    with pytest.raises(StateError):
        advance(MartingaleState.empty(1), PartitionCounts(1, 1, {1: 1}), params, np.array([1, 1]))


def test_fixed_theta_weights_need_room():
    with pytest.raises(DomainError):
        a_coefficients(5, ModelParams.fixed(0.0, 0.5, 10, d=3))


def test_a_limit_and_lindeberg_bound():
    n, lam, alpha, d = 10**6, 1.0, 0.0, 2
    params = ModelParams.linear(alpha, lam, n, d)
    run = run_martingale(params, SeedSpec(8))
    assert run.a[1] == pytest.approx(2.0, abs=0.01)
    assert run.a[0] == 1.0
    bound = ((lam + 1) / lam) ** (4 * (d - alpha))
    for h in (1, 10, 1000, n // 2, n):
        assert np.max(a_coefficients(h, params) ** 4) <= bound + 1e-9


def test_empirical_martingale_property():
    n, h, R = 100, 60, 10**4
    params = ModelParams.linear(0.5, 1.0, n, d=2)
    deltas, ks = [], []
    for i in range(R):
        run = run_martingale(params, SeedSpec(17, i), delta_at=h)
        deltas.append(run.delta)
        ks.append(run.state_before_delta[0])
    deltas, ks = np.array(deltas), np.array(ks)
    edges = np.quantile(ks, [0, 0.25, 0.5, 0.75, 1.0])
    bins = np.clip(np.searchsorted(edges, ks, side="right") - 1, 0, 3)
    for b in range(4):
        sel = deltas[bins == b]
        if len(sel) < 100:
            continue
        se = sel.std(axis=0, ddof=1) / math.sqrt(len(sel))
        assert np.all(np.abs(sel.mean(axis=0)) <= 4 * se + 1e-15)


def test_limit_check_single_seed():
    params = ModelParams.linear(0.0, 1.0, 10**6, d=1)
    rep = increasing_process_limit_check(params, [SeedSpec(21)])
    g = rep.gamma
    assert g[0, 0] == pytest.approx(math.log(2) - 0.5, abs=1e-12)
    ip = rep.rel_dev[0]
    assert ip[0, 0] <= 0.02 and ip[1, 1] <= 0.02
    assert rep.max_identity_error <= 1e-10
    assert '"n_pass": 1' in rep.to_json()
    with pytest.raises(DomainError):
        increasing_process_limit_check(ModelParams.linear(0.0, 1.0, 500, d=1), [SeedSpec(1)])


def test_riemann_integrand_converges():
    alpha, lam, d = 0.0, 1.0, 2
    xs = np.linspace(0.1, 1.0, 10)
    limit = np.array([[[f_ij(i, j, alpha, lam, x) for j in range(1, d + 2)] for i in range(1, d + 2)] for x in xs])
    better = 0
    for k in range(20):
        sup = []
        for n in (10**3, 10**5):
            run = run_martingale(ModelParams.linear(alpha, lam, n, d), SeedSpec(5, k), xs)
            sup.append(np.abs(run.F - limit).max())
        better += sup[1] <= sup[0]
    assert better >= 16


def test_running_process_csv():
    params = ModelParams.linear(0.0, 1.0, 10**4, d=1)
    run = run_martingale(params, SeedSpec(2), (0.5, 1.0))
    lines = run.to_csv().splitlines()
    assert lines[0] == "h,entry,value"
    assert len(lines) == 1 + 2 * 3 * 2
    last = {row.split(",")[1]: float(row.split(",")[2]) for row in lines if row.startswith("10000,")}
    assert last["increasing_process_11/n"] <= run.increasing_process[0, 0] / params.n
    g = gamma_matrix_quadrature(1, 0.0, 1.0)
    assert last["increasing_process_22/n"] == pytest.approx(g[1, 1], rel=0.05)
