import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdpconc.core import (
    FiniteHorizonPolicy,
    MdpModel,
    StationaryPolicy,
    absorbing_pair_model,
    cycle_model,
    enumerate_policies,
    random_model,
    swap_model,
    symmetric_model,
)
from mdpconc.errors import EmptyVector
from mdpconc.solvers import solve_aroe, solve_arpe, solve_fhpe
from mdpconc.stats import (
    FiniteHorizonDispersion,
    conditional_std,
    diameter,
    discounted_dispersion,
    dispersion,
    fh_dispersion,
    hitting_times,
    max_abs_deviation,
    sigma_process,
    span,
)


@pytest.mark.parametrize("v, expected", [((1, 0), 1.0), ((2.5, 2.5, 2.5), 0.0), ((3, -2, 5), 7.0)])
def test_span_examples(v, expected):
    assert span(v) == expected
    assert span(np.asarray(v, float) + 11.3) == pytest.approx(expected, abs=1e-12)


def test_span_empty():
    with pytest.raises(EmptyVector):
        span([])


def test_k_and_sigma_symmetric(sym):
    assert max_abs_deviation(sym, (0, 0), [1.0, 0.0]) == pytest.approx(0.5)
    assert conditional_std(sym, (0, 0), [1.0, 0.0]) == pytest.approx([0.5, 0.5])
    assert max_abs_deviation(sym, (0, 0), [4.0, 4.0]) == 0.0
    assert np.all(conditional_std(sym, (0, 0), [4.0, 4.0]) == 0.0)


def test_k_deterministic_chain_uses_all_states():
    m = cycle_model(3)
    v = np.array([0.0, 2.0, 5.0])
    succ = np.array([1, 2, 0])
    expected = np.max(np.abs(v[None, :] - v[succ][:, None]))
    assert max_abs_deviation(m, (0, 0, 0), v) == pytest.approx(expected)
    assert np.all(conditional_std(m, (0, 0, 0), v) == 0.0)
    # restricted to the support the deviation vanishes
    assert max_abs_deviation(m, (0, 0, 0), v, support_only=True) == 0.0


def test_support_only_never_exceeds_literal():
    m = random_model(5, 2, seed=4)
    v = np.random.default_rng(0).normal(size=5)
    for pi in [(0,) * 5, (1,) * 5]:
        assert max_abs_deviation(m, pi, v, support_only=True) <= max_abs_deviation(m, pi, v)


def test_sigma_two_pass_is_stable():
    m = symmetric_model()
    v = np.array([1e9 + 1.0, 1e9])
    assert conditional_std(m, (0, 0), v) == pytest.approx([0.5, 0.5], abs=1e-12)


def test_diameter_examples():
    assert diameter(cycle_model(4)) == pytest.approx(3.0, abs=1e-12)
    assert diameter(swap_model()) == pytest.approx(1.0, abs=1e-12)
    assert diameter(symmetric_model()) == pytest.approx(2.0, abs=1e-9)
    assert diameter(MdpModel(np.ones((1, 1, 1)), [[0.0]], 1.0)) == 0.0


@pytest.mark.parametrize("seed", range(6))
def test_diameter_pi_matches_vi(seed):
    m = random_model(4, 2, 1.0, "communicating", seed)
    assert diameter(m, method="pi") == pytest.approx(diameter(m, method="vi"), rel=1e-8)


def test_diameter_unreachable_is_infinite():
    m = absorbing_pair_model()
    assert diameter(m) == np.inf
    assert hitting_times(m, 1)[0] == np.inf


def test_diameter_avoids_improper_actions():
    # action 1 in state 0 may fall into a trap (state 2); the optimum must avoid it
    P = np.zeros((3, 2, 3))
    P[0, 0] = [0.5, 0.5, 0.0]
    P[0, 1] = [0.0, 0.9, 0.1]
    P[1, :, 0] = 1.0
    P[2, :, 2] = 1.0
    t = hitting_times(MdpModel(P, np.zeros((3, 2)), 1.0), 1)
    assert t[0] == pytest.approx(2.0)
    assert t[2] == np.inf


def test_diameter_relabeling():
    m = random_model(4, 2, 1.0, "communicating", 7)
    perm = np.array([2, 0, 3, 1])
    P = m.transition[perm][:, :, perm]
    m2 = MdpModel(P, m.reward[perm], 1.0)
    assert diameter(m2) == pytest.approx(diameter(m), rel=1e-10)


def test_sigma_process_examples():
    assert np.all(sigma_process([0, 1, 0, 1], [0.0, 0.0]) == 0.0)
    assert sigma_process([0] * 9, [0.5, 0.5])[8] == pytest.approx(2.0)
    sp = sigma_process(np.arange(101) % 2, [0.5, 0.5])
    assert sp[0] == 0.0 and sp[100] == pytest.approx(25.0)
    assert np.all(np.diff(sp) >= 0)


def _check_sigma_k_h(m, pi):
    sol = solve_arpe(m, pi)
    d = dispersion(m, pi, sol.v)
    assert np.all(d.sigma <= d.k_dev + 1e-12)
    assert d.k_dev <= d.h_span + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**31),
       st.sampled_from(["unichain", "communicating"]))
def test_sigma_below_k_below_h(n, a, seed, structure):
    m = random_model(n, a, 1.0, structure, seed)
    pi = StationaryPolicy(np.random.default_rng(seed).integers(0, a, n))
    if structure == "communicating":
        try:
            solve_arpe(m, pi)
        except Exception:
            return
    _check_sigma_k_h(m, pi)


@pytest.mark.parametrize("seed", range(10))
def test_span_below_diameter_for_optimal_policy(seed):
    m = random_model(4, 2, 1.0, "communicating", seed)
    sol = solve_aroe(m)
    d = dispersion(m, sol.policy, sol.v_star, with_diameter=True)
    assert d.k_dev <= d.h_span + 1e-12
    assert d.h_span <= d.d_rmax + 1e-6


def test_diameter_bound_fails_for_suboptimal_policy():
    # the sticky action makes the span of a poor policy exceed D * r_max
    P = np.zeros((2, 2, 2))
    P[:, 0] = [[0.99, 0.01], [0.01, 0.99]]
    P[0, 1] = [0.0, 1.0]
    P[1, 1] = [1.0, 0.0]
    m = MdpModel(P, [[1.0, 1.0], [0.0, 0.0]], 1.0)
    d = dispersion(m, (0, 0), solve_arpe(m, (0, 0)).v, with_diameter=True)
    assert d.diameter == pytest.approx(1.0)
    assert d.h_span == pytest.approx(50.0)
    assert d.h_span > d.d_rmax


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(-100, 100))
def test_shift_invariance(seed, c):
    m = random_model(4, 2, seed=seed)
    pi = (0, 1, 1, 0)
    v = solve_arpe(m, pi).v
    a, b = dispersion(m, pi, v), dispersion(m, pi, v + c)
    assert a.h_span == pytest.approx(b.h_span, abs=1e-12)
    assert a.k_dev == pytest.approx(b.k_dev, abs=1e-12)
    assert np.allclose(a.sigma, b.sigma, atol=1e-12)


def test_dispersion_to_dict(sym):
    d = dispersion(sym, (0, 0), [1.0, 0.0], with_diameter=True)
    out = d.to_dict()
    assert out["H"] == 1.0 and out["K"] == 0.5 and out["sigma"] == [0.5, 0.5]
    assert out["D"] == pytest.approx(2.0) and out["D_rmax"] == pytest.approx(2.0)
    assert dispersion(absorbing_pair_model(), (0, 0), [1.0, 0.0], with_diameter=True).d_rmax is None


def test_discounted_dispersion_symmetric():
    k, h = discounted_dispersion(symmetric_model(), (0, 0), 0.5)
    assert h == pytest.approx(1.0) and k == pytest.approx(0.5)


def test_fh_dispersion_constant_reward():
    m = random_model(3, 2, seed=1)
    m = MdpModel(m.transition, np.full((3, 2), 0.5), 1.0)
    pol = FiniteHorizonPolicy.repeat(StationaryPolicy((0, 1, 0)), 4)
    fd = fh_dispersion(m, pol, solve_fhpe(m, pol))
    assert np.allclose(fd.k_per_stage, 0.0, atol=1e-12)
    assert all(fd.g(T) == 0.0 for T in range(6))


def test_g_equal_stages():
    fd = FiniteHorizonDispersion(np.array([2.0] * 6 + [0.0]), np.ones(7))
    for T in range(1, 6):
        assert fd.g(T) == pytest.approx(T)


def test_fh_dispersion_swap_brute_force():
    m = swap_model([[1.0, 1.0], [0.0, 0.0]])
    pol = FiniteHorizonPolicy.repeat(StationaryPolicy((0, 0)), 1)
    sol = solve_fhpe(m, pol)
    fd = fh_dispersion(m, pol, sol)
    assert sol.v[1] == pytest.approx([1.0, 0.0])
    v1 = sol.v[1]
    succ = [1, 0]
    brute = max(abs(v1[sp] - v1[succ[s]]) for s in range(2) for sp in range(2))
    assert fd.k_per_stage[1] == pytest.approx(brute) == pytest.approx(1.0)
    assert fd.k_per_stage[2] == 0.0 and fd.horizon == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 8))
def test_fh_running_maxima_and_g(seed, h):
    m = random_model(3, 2, seed=seed)
    rng = np.random.default_rng(seed)
    pol = FiniteHorizonPolicy([StationaryPolicy(rng.integers(0, 2, 3)) for _ in range(h + 1)])
    fd = fh_dispersion(m, pol, solve_fhpe(m, pol))
    kb = [fd.k_bar(T) for T in range(h + 2)]
    hb = [fd.h_bar(T) for T in range(h + 2)]
    assert np.all(np.diff(kb) >= 0) and np.all(np.diff(hb) >= 0)
    for T in range(h + 2):
        assert 0.0 <= fd.g(T) <= T + 1e-12
