import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdpconc.bounds import (
    ALL_KINDS,
    KINDS,
    BoundRequest,
    azuma_centered,
    azuma_uncentered,
    disc_bounds,
    disc_threshold,
    disc_two_policy,
    evaluate,
    f_gamma,
    f_gamma_limit,
    fh_bounds,
    fh_threshold,
    fh_two_policy,
    lil_centered,
    lil_threshold,
    lil_uncentered,
    policy_independent,
    regret_gap,
    regret_gap_model,
    two_optimal,
    two_policy,
    vanishing_discount_check,
)
from mdpconc.core import symmetric_model
from mdpconc.errors import DomainError, HorizonExceeded, InfiniteDiameter, KZero
from mdpconc.stats import FiniteHorizonDispersion

E = math.e


def fhd(ks, hs=None):
    ks = np.append(np.asarray(ks, float), 0.0)
    hs = np.ones_like(ks) if hs is None else np.append(np.asarray(hs, float), 0.0)
    return FiniteHorizonDispersion(ks, hs)


# -- average reward ---------------------------------------------------------


def test_azuma_centered_examples():
    assert azuma_centered(1.0, 8, 2 / E).value == pytest.approx(4.0)
    assert azuma_centered(0.0, 123, 0.01).value == 0.0
    r = azuma_centered(0.5, 500, 0.05)
    assert r.value == pytest.approx(0.5 * math.sqrt(1000 * math.log(40)))
    assert r.value == pytest.approx(30.36, abs=0.01)
    assert r.applicable and r.threshold_T0 is None


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_delta_domain(delta):
    with pytest.raises(DomainError):
        azuma_centered(1.0, 10, delta)


def test_T_domain():
    with pytest.raises(DomainError):
        azuma_centered(1.0, 0, 0.1)


def test_lil_centered_examples():
    with pytest.raises(DomainError):
        lil_centered(173.0, 5, 4 / E)  # delta > 1
    assert lil_threshold(173.0, 4 * math.exp(-1.5)) == 2
    assert lil_threshold(173.0, 0.5) == math.ceil(math.log(8.0))
    assert lil_threshold(173.0, 0.5) == 3
    r = lil_centered(1.0, 100, 0.1)
    expected = math.sqrt(300 * (2 * math.log(math.log(150)) + math.log(20)))
    assert r.value == pytest.approx(expected)
    assert r.value == pytest.approx(43.19, abs=0.01)
    assert r.threshold_T0 == math.ceil(173 * math.log(40))
    assert not r.applicable and r.value > 0


def test_lil_conservative_threshold():
    assert lil_threshold(0.5, 0.1, conservative=False) == math.ceil(346 * math.log(40))
    assert lil_threshold(0.5, 0.1, conservative=True) == math.ceil(692 * math.log(40))
    r = lil_centered(0.5, 10, 0.1, conservative=True)
    assert "K^2" in r.notes


def test_lil_k_zero():
    with pytest.raises(KZero):
        lil_centered(0.0, 10, 0.1)


def test_lil_small_T_uses_k_squared_branch():
    # 1.5 T <= e, so the log log term is skipped
    assert lil_centered(3.0, 1, 0.1).value == pytest.approx(9.0)
    K, T = 0.1, 2
    assert lil_centered(K, T, 0.1).value == pytest.approx(
        max(K * math.sqrt(3 * T * (2 * math.log(math.log(3.0)) + math.log(20))), K * K))


def test_uncentered_examples():
    assert azuma_uncentered(1.0, 1.0, 8, 2 / E).value == pytest.approx(5.0)
    assert azuma_uncentered(0.5, 1.0, 500, 0.05).value == pytest.approx(31.36, abs=0.01)
    assert azuma_uncentered(0.7, 0.0, 9, 0.2).value == azuma_centered(0.7, 9, 0.2).value
    a = lil_uncentered(0.7, 2.0, 900, 0.2)
    b = lil_centered(0.7, 900, 0.2)
    assert a.value == pytest.approx(b.value + 2.0) and a.threshold_T0 == b.threshold_T0


def test_policy_independent():
    assert policy_independent(1.0, 1.0, 8, 2 / E).value == pytest.approx(5.0)
    for kind in ("azuma", "lil"):
        a = policy_independent(2.0, 0.5, 77, 0.05, kind)
        b = policy_independent(1.0, 1.0, 77, 0.05, kind)
        assert a.value == b.value and a.threshold_T0 == b.threshold_T0
    with pytest.raises(InfiniteDiameter):
        policy_independent(float("inf"), 1.0, 8, 0.1)


def test_policy_independent_consistency():
    c = 3.0 * 0.25
    assert policy_independent(3.0, 0.25, 40, 0.1).value == azuma_uncentered(c, c, 40, 0.1).value
    assert (policy_independent(3.0, 0.25, 40, 0.1, "lil").value
            == lil_uncentered(c, c, 40, 0.1).value)


def test_two_policy():
    # ln(4/delta) = 4: each half is sqrt(2*2*4) + 1 = 5
    assert two_policy(1, 1, 1, 1, 2, 4 * math.exp(-4)).value == pytest.approx(10.0)
    single = azuma_uncentered(0.3, 0.8, 50, 0.1 / 2).value
    assert two_policy(0.3, 0.8, 0.3, 0.8, 50, 0.1).value == pytest.approx(2 * single)
    r = two_policy(0.3, 0.8, 0.6, 0.8, 50, 0.1, "lil")
    assert r.threshold_T0 == math.ceil(173 / 0.3 * math.log(80))


def test_two_optimal():
    # ln(4/delta) = 4 with delta = 4 e^-4: 2 * (sqrt(2*2*4) + 1) = 10
    assert two_optimal(1.0, 1.0, 2, 4 * math.exp(-4)).value == pytest.approx(10.0)
    assert (two_optimal(0.4, 0.9, 30, 0.1).value
            == pytest.approx(two_policy(0.4, 0.9, 0.4, 0.9, 30, 0.1).value))
    r = two_optimal(0.4, 0.9, 30, 0.1, "lil")
    assert r.threshold_T0 == math.ceil(173 / 0.4 * math.log(80))


def test_regret_gap():
    assert regret_gap(1.0, 1.0, 8, 2 / E).value == pytest.approx(5.0)
    assert regret_gap_model(1.0, 1.0, 8, 2 / E).value == policy_independent(1.0, 1.0, 8, 2 / E).value
    assert regret_gap(0.5, 1.0, 10, 0.1, "lil").threshold_T0 == math.ceil(346 * math.log(40))


# -- discounted -------------------------------------------------------------


def test_f_gamma():
    assert f_gamma(0.5, 1) == pytest.approx(0.25)
    assert f_gamma(0.5, 0) == 0.0
    assert f_gamma(0.7, 10_000) == pytest.approx(f_gamma_limit(0.7))
    assert f_gamma_limit(0.7) == pytest.approx(0.49 / 0.51)
    direct = math.fsum(0.99 ** (2 * t) for t in range(1, 101))
    assert abs(f_gamma(0.99, 100) - direct) <= 1e-12


def test_disc_examples():
    assert disc_bounds(1.0, 0.5, 1.0, 1, 2 / E).value == pytest.approx(math.sqrt(0.5))
    base = disc_bounds(0.3, 0.9, 1.0, 50, 0.1).value
    unc = disc_bounds(0.3, 0.9, 1.0, 50, 0.1, uncentered=True).value
    assert unc - base == pytest.approx(0.9**50 / 0.1)
    assert unc - base == pytest.approx(0.0515, abs=1e-4)


def test_disc_never_applicable():
    r = disc_bounds(0.5, 0.9, 1.0, 10_000, 0.1, "lil")
    assert not r.applicable and r.threshold_T0 is None
    assert disc_threshold(0.5, 0.9, 0.1) is None


def test_disc_threshold_first_crossing():
    K, g, d = 1.0, 0.9999, 0.1
    T0 = disc_threshold(K, g, d)
    c = 173 / K * math.log(4 / d)
    assert f_gamma(g, T0) > c >= f_gamma(g, T0 - 1)
    assert disc_bounds(K, g, 1.0, T0, d, "lil").applicable
    assert not disc_bounds(K, g, 1.0, T0 - 1, d, "lil").applicable
    assert disc_threshold(K, g, d, conservative=True) == T0  # K = 1


def test_disc_two_policy():
    a = disc_two_policy(0.3, 0.3, 0.95, 40, 0.1).value
    assert a == pytest.approx(2 * disc_bounds(0.3, 0.95, None, 40, 0.05).value)
    r = disc_two_policy(0.3, 0.0, 0.95, 40, 0.1, "lil")
    assert not r.applicable


def test_disc_gamma_domain():
    for g in (0.0, 1.0, 1.2):
        with pytest.raises(DomainError):
            disc_bounds(1.0, g, 1.0, 5, 0.1)


# -- finite horizon ---------------------------------------------------------


def test_fh_constant_stages_match_stationary():
    d = fhd([0.7] * 11)
    for T in (1, 5, 10):
        assert fh_bounds(d, T, 0.05).value == azuma_centered(0.7, T, 0.05).value


def test_fh_zero_stages():
    d = fhd([0.0] * 5)
    assert fh_bounds(d, 4, 0.1).value == 0.0
    r = fh_bounds(d, 4, 0.1, "lil")
    assert not r.applicable and r.threshold_T0 is None


def test_fh_staircase():
    d = fhd([0, 1, 2, 3])
    assert d.g(3) == pytest.approx(14 / 9)
    delta = 0.1
    assert fh_bounds(d, 3, delta).value == pytest.approx(3 * math.sqrt(2 * 14 / 9 * math.log(2 / delta)))


def test_fh_uncentered():
    d = fhd([0, 1, 2, 3], [5, 4, 3, 1])
    r = fh_bounds(d, 3, 0.1, uncentered=True)
    assert r.value == pytest.approx(3 * math.sqrt(6 * math.log(20)) + 5)


def test_fh_horizon_exceeded():
    d = fhd([1, 1, 1])
    fh_bounds(d, 3, 0.1)
    with pytest.raises(HorizonExceeded):
        fh_bounds(d, 4, 0.1)


def test_fh_threshold():
    h = 3000
    d = fhd([1.0] * (h + 1))
    c = 173 * math.log(40)
    assert fh_threshold(d, 0.1) == math.ceil(c)
    assert fh_bounds(d, math.ceil(c), 0.1, "lil").applicable
    assert not fh_bounds(d, math.ceil(c) - 1, 0.1, "lil").applicable
    # K_t = 2 gives the same g but a larger K_t^2 sum
    d2 = fhd([2.0] * (h + 1))
    assert fh_threshold(d2, 0.1) == math.ceil(c)
    assert fh_threshold(d2, 0.1, conservative=True) == math.ceil(c / 4)


def test_fh_two_policy():
    d = fhd([0.5] * 21)
    assert fh_two_policy(d, d, 20, 0.1).value == pytest.approx(
        2 * fh_bounds(d, 20, 0.05).value)


# -- properties -------------------------------------------------------------


def _request(kind, T, delta, K, H):
    fh = fhd([K] * 400, [H] * 400)
    return BoundRequest(kind, T, delta, K=K, H=H, K2=K * 0.5, H2=H, D=H / 0.5, r_max=0.5,
                        gamma=0.99, fh=fh, fh2=fh)


MONOTONE_IN_T = [k for k in ALL_KINDS if not k.startswith("disc_uncentered")]


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(MONOTONE_IN_T), st.integers(1, 390), st.floats(0.001, 0.5),
       st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_monotone_in_T_and_delta(kind, T, delta, K, H):
    req = _request(kind, T, delta, K, H)
    a = evaluate(req)
    b = evaluate(req.with_T(T + 1))
    assert b.value >= a.value - 1e-12 * max(1.0, a.value)
    c = evaluate(BoundRequest(**{**req.__dict__, "delta": delta / 2}))
    assert c.value >= a.value - 1e-12 * max(1.0, a.value)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([k for k in ALL_KINDS if "azuma" in k and "uncentered" not in k]),
       st.integers(1, 300), st.floats(0.01, 0.5), st.floats(0.05, 3.0), st.floats(0.1, 10.0))
def test_scale_covariance(kind, T, delta, K, c):
    a = evaluate(_request(kind, T, delta, K, K))
    b = evaluate(_request(kind, T, delta, c * K, c * K))
    assert b.value == pytest.approx(c * a.value, rel=1e-10)


def test_every_kind_evaluates():
    for kind in ALL_KINDS:
        r = evaluate(_request(kind, 50, 0.1, 0.5, 1.0))
        assert r.value >= 0.0 and isinstance(r.applicable, bool)
        assert r.to_dict()["notes"]
    assert len(KINDS) == 24


def test_missing_parameter():
    with pytest.raises(DomainError):
        evaluate(BoundRequest("two_policy_azuma", 10, 0.1, K=1.0, H=1.0))
    with pytest.raises(DomainError):
        BoundRequest("nope", 10, 0.1)


def test_vanishing_discount_asymmetric():
    from mdpconc.core import cycle_model
    m = cycle_model(3, [1.0, 0.0, 0.5])
    rep = vanishing_discount_check(m, (0, 0, 0), 10, 0.1, (0.9, 0.99, 0.999))
    assert rep.f_gap_decreasing and rep.k_gap_decreasing and rep.azuma_gap_decreasing
    assert rep.final_relative_gap < 0.02


def test_vanishing_discount_symmetric():
    rep = vanishing_discount_check(symmetric_model(), (0, 0), 10, 0.1, (0.9, 0.99, 0.999))
    assert rep.f_gap_decreasing and rep.azuma_gap_decreasing
    assert rep.final_relative_gap < 0.02
    # K_gamma is already equal to K here, so the K gap is identically zero
    assert all(row.k_gap == pytest.approx(0.0, abs=1e-12) for row in rep.rows)
