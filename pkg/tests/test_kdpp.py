"""Diagonal k-DPP marginals: exact route vs subset enumeration, the nu
solver vs long bisection, and the logistic approximation."""

import math

import numpy as np
import pytest

from cvaropt import (
    EXACT_THRESHOLD,
    InfeasibleConstraintError,
    Marginals,
    approx_marginals,
    elementary_symmetric,
    exact_marginals,
    marginals,
    solve_nu,
    tv_distance,
)
from oracles import bisect_nu, enum_esp, enum_marginals

W123 = np.log(np.array([1.0, 2.0, 3.0]))


# ---------------------------------------------------------------- ESPs


def test_esp_123():
    log_e = elementary_symmetric(W123, 2)
    assert math.exp(log_e[0]) == pytest.approx(1.0)
    assert math.exp(log_e[1]) == pytest.approx(6.0, rel=1e-12)
    assert math.exp(log_e[2]) == pytest.approx(11.0, rel=1e-12)


def test_esp_counts_binomial():
    # unit weights: e_k = C(n, k)
    n = 20
    log_e = elementary_symmetric(np.zeros(n), n)
    for k in range(n + 1):
        assert math.exp(log_e[k]) == pytest.approx(math.comb(n, k), rel=1e-10)


def test_esp_order_zero():
    assert elementary_symmetric(np.log([5.0, 7.0]), 0)[0] == 0.0  # log e_0 = 1


def test_esp_matches_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(2, 11))
        log_w = rng.normal(0.0, 1.5, n)
        k = int(rng.integers(1, n + 1))
        got = math.exp(elementary_symmetric(log_w, k)[k])
        want = enum_esp(np.exp(log_w), k)
        assert got == pytest.approx(want, rel=1e-10)


def test_esp_ignores_zero_weights():
    log_w = np.array([math.log(2.0), -np.inf, math.log(3.0)])
    log_e = elementary_symmetric(log_w, 2)
    assert math.exp(log_e[2]) == pytest.approx(6.0, rel=1e-12)


# ---------------------------------------------------------- exact marginals


def test_exact_marginals_123():
    got = exact_marginals(W123, 2)
    np.testing.assert_allclose(got.p, [5 / 11, 8 / 11, 9 / 11], atol=1e-12)
    assert got.k == 2


def test_exact_marginals_uniform_symmetry():
    for n, k in ((6, 2), (9, 4), (40, 13)):
        got = exact_marginals(np.zeros(n), k)
        np.testing.assert_allclose(got.p, np.full(n, k / n), atol=1e-10)


def test_exact_marginals_saturated():
    got = exact_marginals(np.log([1.0, 4.0, 0.25]), 3)
    np.testing.assert_allclose(got.p, 1.0)


def test_exact_marginals_zero_weight_entry():
    log_w = np.array([0.0, -np.inf, 0.0, 0.0])
    got = exact_marginals(log_w, 3)
    assert got.p[1] == 0.0
    np.testing.assert_allclose(got.p[[0, 2, 3]], 1.0)


def test_exact_marginals_infeasible():
    with pytest.raises(InfeasibleConstraintError):
        exact_marginals(np.zeros(5), 6)
    with pytest.raises(InfeasibleConstraintError):
        exact_marginals(np.zeros(5), 0)
    with pytest.raises(InfeasibleConstraintError):
        exact_marginals(np.array([0.0, -np.inf]), 2)


def test_exact_marginals_vs_enumeration():
    """Random weights, every (n, k) with n <= 10: per-entry agreement with
    the longdouble subset-enumeration oracle."""
    rng = np.random.default_rng(4)
    worst = 0.0
    for n in range(1, 11):
        for k in range(1, n + 1):
            for _ in range(4):
                log_w = rng.normal(0.0, 2.0, n)
                got = exact_marginals(log_w, k).p
                want = enum_marginals(np.exp(log_w.astype(np.longdouble)), k)
                worst = max(worst, float(np.abs(got - want).max()))
    assert worst <= 1e-10, f"worst enumeration gap {worst:.3g}"


def test_exact_marginals_extreme_spread():
    # one item dominating by e^600 forces the log-domain route
    log_w = np.array([600.0, 0.0, 0.0, 0.0, -5.0])
    got = exact_marginals(log_w, 2).p
    want = enum_marginals(np.exp(np.asarray(log_w, dtype=np.longdouble)), 2)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_exact_marginal_sums_large_n():
    rng = np.random.default_rng(9)
    for n in (500, 2000, 5000):
        log_w = rng.normal(0.0, 1.0, n)
        k = max(1, n // 10)
        p = exact_marginals(log_w, k).p
        assert abs(p.sum() - k) <= 1e-8
        assert p.min() >= 0.0 and p.max() <= 1.0


def test_marginals_type_validation():
    with pytest.raises(ValueError):
        Marginals(np.array([0.5, 0.6]), 2)  # sums to 1.1, not 2
    with pytest.raises(ValueError):
        Marginals(np.array([1.5, 0.5]), 2)  # entry above 1
    with pytest.raises(ValueError):
        exact_marginals(np.array([0.0, np.nan]), 1)
    with pytest.raises(ValueError):
        exact_marginals(np.array([0.0, np.inf]), 1)


# ----------------------------------------------------------------- solve_nu


def test_solve_nu_uniform_closed_form():
    # uniform weights force e^nu = k / (n - k)
    sol = solve_nu(np.zeros(4), 2)
    assert abs(sol.nu - 0.0) <= 1e-8
    sol = solve_nu(np.zeros(4), 1)
    assert abs(sol.nu - math.log(1 / 3)) <= 1e-8
    sol = solve_nu(np.zeros(10), 3)
    assert abs(sol.nu - math.log(3 / 7)) <= 1e-8


def test_solve_nu_123_vs_bisection_oracle():
    sol = solve_nu(W123, 2)
    assert abs(sol.residual) <= 1e-10
    assert abs(sol.nu - bisect_nu(W123, 2)) <= 1e-9


def test_solve_nu_random_residuals():
    rng = np.random.default_rng(14)
    for _ in range(100):
        n = int(rng.integers(3, 80))
        k = int(rng.integers(1, n))
        sol = solve_nu(rng.normal(0.0, 2.0, n), k)
        assert abs(sol.residual) <= 1e-10


def test_solve_nu_monotone_map():
    """The constraint map nu -> sum sigmoid(log w + nu) - k changes sign
    exactly once across any bracket (strictly increasing)."""
    log_w = np.random.default_rng(21).normal(0.0, 1.0, 12)
    k = 4
    sol = solve_nu(log_w, k)

    def g(nu):
        return float((1.0 / (1.0 + np.exp(-(log_w + nu)))).sum() - k)

    assert g(sol.nu - 1.0) < 0.0 < g(sol.nu + 1.0)


def test_solve_nu_infeasible():
    with pytest.raises(InfeasibleConstraintError):
        solve_nu(np.zeros(4), 4)  # needs k < positive count


# ------------------------------------------------------------ approximation


def test_approx_uniform_is_exact():
    got = approx_marginals(np.zeros(12), 3)
    np.testing.assert_allclose(got.p, 0.25, atol=1e-9)


def test_approx_two_point_gap():
    # n=2, k=1, w=(1,3): exact marginals (1/4, 3/4); the logistic form
    # cannot match them, and renormalization splits the gap evenly.
    log_w = np.log([1.0, 3.0])
    exact = exact_marginals(log_w, 1)
    approx = approx_marginals(log_w, 1)
    np.testing.assert_allclose(exact.p, [0.25, 0.75], atol=1e-12)
    assert abs(approx.p.sum() - 1.0) <= 1e-12
    gap = tv_distance(exact, approx)
    assert 0.0 < gap < 0.5


def test_approx_sums_to_k():
    rng = np.random.default_rng(31)
    for _ in range(20):
        n = int(rng.integers(4, 200))
        k = int(rng.integers(1, n))
        got = approx_marginals(rng.normal(0.0, 1.5, n), k)
        assert abs(got.p.sum() - k) <= 1e-9


def test_dispatch_threshold():
    rng = np.random.default_rng(8)
    log_w = rng.normal(0.0, 1.0, EXACT_THRESHOLD)
    exact = marginals(log_w, 5)
    np.testing.assert_allclose(exact.p, exact_marginals(log_w, 5).p)
    log_w = rng.normal(0.0, 1.0, EXACT_THRESHOLD + 1)
    approx = marginals(log_w, 5)
    np.testing.assert_allclose(approx.p, approx_marginals(log_w, 5).p)
    # saturated k stays on the exact path regardless of size
    sat = marginals(np.zeros(EXACT_THRESHOLD + 10), EXACT_THRESHOLD + 10)
    np.testing.assert_allclose(sat.p, 1.0)


# -------------------------------------------------------------- tv_distance


def test_tv_identity():
    m = exact_marginals(W123, 2)
    assert tv_distance(m, m) == 0.0


def test_tv_disjoint_singletons():
    a = Marginals(np.array([1.0, 0.0]), 1)
    b = Marginals(np.array([0.0, 1.0]), 1)
    assert tv_distance(a, b) == 1.0


def test_tv_123_frozen_value():
    """TV between enumeration-backed exact marginals and the logistic
    approximation for w=(1,2,3), k=2. The oracle value is recomputed from
    first principles here rather than hard-coded."""
    exact_p = enum_marginals(np.array([1.0, 2.0, 3.0]), 2)
    nu = bisect_nu(W123, 2)
    approx_p = 1.0 / (1.0 + np.exp(-(W123 + nu)))
    approx_p *= 2 / approx_p.sum()
    want = 0.5 * np.abs(exact_p - approx_p).sum() / 2
    got = tv_distance(exact_marginals(W123, 2), approx_marginals(W123, 2))
    assert got == pytest.approx(want, abs=1e-10)


def test_tv_shape_mismatch():
    with pytest.raises(ValueError):
        tv_distance(exact_marginals(W123, 2), exact_marginals(np.zeros(4), 2))
    with pytest.raises(ValueError):
        tv_distance(exact_marginals(W123, 1), exact_marginals(W123, 2))
