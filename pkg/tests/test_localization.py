from __future__ import annotations

import math

import numpy as np
import pytest

from multicoag import (
    CriticalityError,
    HypothesisError,
    ModelSpec,
    SpecValidationError,
    as_simplex_point,
    empirical_rate,
    gamma,
    gamma_gradient,
    gelation_time,
    minimize_gamma,
    sigma,
)
from conftest import random_interior_simplex


def test_sigma_examples(m1_spec, stoch_spec):
    assert np.allclose(sigma(m1_spec, [1.0]), [1.0])
    assert np.allclose(sigma(stoch_spec, [0.5, 0.5]), [0.5, 0.5])
    # rho = e_k selects row k: sigma_l = A_kl p_l
    got = sigma(stoch_spec, [1.0, 0.0])
    assert np.allclose(got, stoch_spec.A[0] * stoch_spec.p)


def test_gamma_closed_form_m1(m1_spec):
    for t in (0.2, 0.5, 0.8):
        assert gamma(m1_spec, t, [1.0]) == pytest.approx(t - 1.0 - math.log(t), rel=1e-14)
    assert gamma(m1_spec, 1.0, [1.0]) == pytest.approx(0.0, abs=1e-15)


def test_gamma_hand_value_stochastic(stoch_spec):
    got = gamma(stoch_spec, 0.5, [0.5, 0.5])
    assert got == pytest.approx(math.log(2.0) - 0.5, rel=1e-14)


def test_gamma_unreachable_direction_signals():
    spec = ModelSpec(m=3, A=[[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0]],
                     p=[0.4, 0.4, 0.2])
    with pytest.raises(HypothesisError):
        gamma(spec, 0.2, [0.3, 0.3, 0.4])


def test_gamma_boundary_zero_coordinate():
    spec = ModelSpec(m=2, A=[[1.0, 1.0], [1.0, 1.0]], p=[0.5, 0.5])
    # rho_l = 0 contributes only its arrival rate (0 ln 0 = 0)
    v = gamma(spec, 0.4, as_simplex_point([1.0, 0.0], 2, interior=False))
    s = sigma(spec, [1.0, 0.0])
    expect = 1.0 * math.log(1.0 / (0.4 * s[0])) + 0.4 * s.sum() - 1.0
    assert v == pytest.approx(expect, rel=1e-13)


def test_as_simplex_point_validation():
    rho = as_simplex_point([0.2, 0.8 + 5e-10], 2)
    assert rho.sum() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(SpecValidationError):
        as_simplex_point([0.2, 0.9], 2)
    with pytest.raises(SpecValidationError):
        as_simplex_point([1.0, 0.0], 2, interior=True)
    with pytest.raises(SpecValidationError):
        as_simplex_point([0.5, 0.5, 0.0], 2)


def raw_rate(spec, t, rho):
    """Rate-function formula on the positive orthant (no simplex constraint).

    Coordinate-wise finite differences must step off the simplex, so the
    oracle evaluates the formula directly.
    """
    rho = np.asarray(rho, dtype=float)
    s = sigma(spec, rho / rho.sum()) * rho.sum()  # sigma is linear in rho
    return float(np.sum(rho * np.log(rho / (t * s)) + t * s) - 1.0)


def test_gamma_equals_raw_formula_on_simplex(m3_spec):
    rng = np.random.default_rng(29)
    for _ in range(20):
        rho = random_interior_simplex(rng, 3)
        t = float(rng.uniform(0.1, 0.9)) * gelation_time(m3_spec).T_c
        assert gamma(m3_spec, t, rho) == pytest.approx(raw_rate(m3_spec, t, rho), rel=1e-13)


def test_gradient_matches_central_differences(m3_spec, asym2_spec):
    rng = np.random.default_rng(17)
    h = 1e-6
    for spec in (m3_spec, asym2_spec):
        tc = gelation_time(spec).T_c
        for _ in range(20):
            t = float(rng.uniform(0.2, 0.9)) * tc
            rho = random_interior_simplex(rng, spec.m, floor=0.05)
            grad = gamma_gradient(spec, t, rho)
            for j in range(spec.m):
                e = np.zeros(spec.m)
                e[j] = h
                fd = (raw_rate(spec, t, rho + e) - raw_rate(spec, t, rho - e)) / (2 * h)
                assert abs(grad[j] - fd) <= 1e-6


def test_minimize_gamma_m1(m1_spec):
    res = minimize_gamma(m1_spec, 0.5)
    assert res.converged
    assert np.allclose(res.rho_star, [1.0])
    assert res.gamma_min == pytest.approx(0.5 - 1.0 - math.log(0.5), rel=1e-14)


def test_minimize_gamma_stochastic_pinned(stoch_spec):
    tc = gelation_time(stoch_spec).T_c
    for frac in (0.25, 0.5, 0.75):
        res = minimize_gamma(stoch_spec, frac * tc)
        assert res.converged and not res.boundary_minimum
        assert np.max(np.abs(res.rho_star - 0.5)) < 1e-8


def test_minimizer_moves_with_time(asym2_spec):
    tc = gelation_time(asym2_spec).T_c
    lo = minimize_gamma(asym2_spec, 0.3 * tc)
    hi = minimize_gamma(asym2_spec, 0.9 * tc)
    assert np.linalg.norm(lo.rho_star - hi.rho_star) > 1e-4


def test_minimize_gamma_guards(stoch_spec):
    with pytest.raises(CriticalityError):
        minimize_gamma(stoch_spec, 1.5)  # T_c = 1 here
    zero_p = ModelSpec(m=2, A=[[1.0, 1.0], [1.0, 1.0]], p=[1.0, 0.0])
    with pytest.raises(HypothesisError):
        minimize_gamma(zero_p, 0.2)


def test_optimizer_certificate(m3_spec):
    tc = gelation_time(m3_spec).T_c
    res = minimize_gamma(m3_spec, 0.5 * tc)
    rng = np.random.default_rng(23)
    best = res.gamma_min
    for _ in range(10_000):
        probe = random_interior_simplex(rng, 3, floor=1e-6)
        assert best <= gamma(m3_spec, 0.5 * tc, probe) + 1e-10


def test_minimum_nonnegative_and_decreasing_toward_gel(m3_spec, asym2_spec):
    for spec in (m3_spec, asym2_spec):
        tc = gelation_time(spec).T_c
        values = [minimize_gamma(spec, f * tc).gamma_min for f in (0.5, 0.9, 0.99)]
        assert all(v > -1e-12 for v in values)
        assert values[0] > values[1] > values[2]


def test_empirical_rate_m1(m1_spec):
    target = 0.5 - 1.0 - math.log(0.5)
    seq = empirical_rate(m1_spec, 0.5, [1.0], [50, 100, 200, 400])
    rates = [r for _, r in seq.points]
    assert rates == sorted(rates, reverse=True)
    assert all(r > target for r in rates)
    # finite-size gap shrinks like log N / N
    d1 = rates[0] - rates[1]
    d2 = rates[1] - rates[2]
    assert 1.4 <= d1 / d2 <= 1.9
    assert abs(seq.extrapolated - target) < 1e-3


def test_empirical_rate_bipartite_monotone(bip_spec):
    target = gamma(bip_spec, 1.0, [0.5, 0.5])
    seq = empirical_rate(bip_spec, 1.0, [0.5, 0.5], [20, 40, 80])
    gaps = [r - target for _, r in seq.points]
    assert all(g > 0.0 for g in gaps)
    assert gaps[0] > gaps[1] > gaps[2]
    assert abs(seq.extrapolated - target) < 5e-3


def test_empirical_rate_requires_integer_compositions(bip_spec):
    with pytest.raises(SpecValidationError):
        empirical_rate(bip_spec, 1.0, [0.5, 0.5], [25])


def test_rate_running_fit_needs_three_points(m1_spec):
    seq = empirical_rate(m1_spec, 0.5, [1.0], [50, 100, 200])
    assert seq.running[0] is None and seq.running[1] is None
    assert seq.running[2] is not None


def test_localization_result_json(stoch_spec):
    res = minimize_gamma(stoch_spec, 0.5)
    d = res.to_dict()
    assert set(d) >= {"rho_star", "gamma_min", "grad_norm"}
    assert isinstance(d["rho_star"], list)
