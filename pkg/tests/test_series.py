import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtl.errors import NonFiniteError, RadiusError
from mtl.series import (MultiSeries, PowerSeries1D, Term, TildeSeries, compose, derivative,
                        erf_indicator, evaluate, indicator_degree, scale_shift_input,
                        series_product, series_sum, tilde)

coeff_lists = st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=8)
EXP20 = PowerSeries1D([1 / math.factorial(k) for k in range(21)])


# tilde ----------------------------------------------------------------------

def test_tilde_univariate_takes_absolute_values():
    assert tilde(PowerSeries1D([1, -2, 3])).coeffs.tolist() == [1, 2, 3]


def test_tilde_single_term_hand_expansion():
    s = MultiSeries((Term(-0.5, (2.0, 3.0)),), dim=3)
    assert tilde(s).coeffs.tolist() == [0, 0, 3.0]


def test_tilde_of_empty_series_is_zero():
    assert tilde(MultiSeries((), dim=2)).coeffs.tolist() == [0.0]


def test_term_rejects_nonpositive_norms():
    with pytest.raises(ValueError):
        Term(1.0, (1.0, 0.0))


def test_multiseries_evaluation_matches_direct_product():
    b1, b2 = np.array([1.0, 2.0]), np.array([0.5, -1.0])
    s = MultiSeries.from_univariate([0, 0, 1], b1) + MultiSeries.constant(2.0, 2) * 1.0
    s = s + MultiSeries((Term(3.0, (np.linalg.norm(b1), np.linalg.norm(b2)), (tuple(b1), tuple(b2))),), 2)
    x = np.array([0.3, -0.4])
    assert s(x) == pytest.approx((b1 @ x) ** 2 + 2 + 3 * (b1 @ x) * (b2 @ x))


def test_merged_combines_identical_direction_multisets():
    b = np.array([1.0, 0.0])
    s = MultiSeries.from_univariate([0, 1], b)
    m = (s * s + s * s * -1.0).merged()
    assert m.terms == ()
    two = (s + s).merged()
    assert len(two.terms) == 1 and two.terms[0].coeff == 2.0


# evaluation and calculus ----------------------------------------------------

def test_eval_examples():
    assert evaluate(PowerSeries1D([1, 1, 1]), 1.0) == 3
    assert evaluate(PowerSeries1D([0, 1]), 0.5) == 0.5
    assert abs(evaluate(EXP20, 1.0) - math.e) < 1e-12


def test_eval_overflow_is_flagged():
    with pytest.raises(NonFiniteError):
        evaluate(PowerSeries1D([0] * 300 + [1e300]), 10.0)


def test_derivative_examples():
    assert derivative(PowerSeries1D([1, 2, 3])).coeffs.tolist() == [2, 6]
    assert derivative(PowerSeries1D([5])).coeffs.tolist() == [0]
    assert abs(evaluate(derivative(EXP20), 1.0) - math.e) < 1e-10


def test_product_sum_compose_examples():
    y = PowerSeries1D([0, 1])
    assert series_product(y, y).coeffs.tolist() == [0, 0, 1]
    g = PowerSeries1D([1, -2, 0.5])
    s = series_sum(tilde(g), tilde(PowerSeries1D(-g.coeffs)))
    assert np.array_equal(s.coeffs, 2 * tilde(g).coeffs)
    assert compose(PowerSeries1D([0, 0, 1]), PowerSeries1D([1, 1])) == PowerSeries1D([1, 2, 1])


def test_compose_checks_radius():
    outer = PowerSeries1D([1, 1, 1], radius=1.0)
    with pytest.raises(RadiusError):
        compose(outer, PowerSeries1D([1.5, 1]))


def test_degree_cap_truncates():
    y = PowerSeries1D([1, 1])
    assert len(series_product(y, y, degree_cap=1).coeffs) == 2


def test_scale_shift_input_examples():
    f = TildeSeries([0, 1])
    assert evaluate(scale_shift_input(f, 2.0, shifted=True), 1.0) == 4
    g = TildeSeries([1, 2, 3])
    assert scale_shift_input(g, 1.0) == g
    assert scale_shift_input(TildeSeries([1]), 7.0) == TildeSeries([1])


def test_json_round_trip():
    g = PowerSeries1D([1, -2.5, 3])
    assert PowerSeries1D.from_json(g.to_json()) == g


@settings(max_examples=60, deadline=None)
@given(coeff_lists, coeff_lists, st.floats(0, 2))
def test_tilde_product_and_sum_are_dominated(a, b, y):
    A, B = PowerSeries1D(a), PowerSeries1D(b)
    ta, tb = tilde(A)(y), tilde(B)(y)
    assert tilde(series_product(A, B))(y) <= ta * tb * (1 + 1e-12) + 1e-12
    assert tilde(series_sum(A, B))(y) <= (ta + tb) * (1 + 1e-12) + 1e-12


@settings(max_examples=60, deadline=None)
@given(coeff_lists, st.floats(0, 3), st.floats(0, 3))
def test_tilde_is_monotone(a, y1, y2):
    t = tilde(PowerSeries1D(a))
    lo, hi = sorted((y1, y2))
    assert t(lo) <= t(hi)


# erf indicator --------------------------------------------------------------

def test_indicator_is_half_at_threshold():
    for alpha in (0.0, 0.3, -0.3):
        ind = erf_indicator(0.2, 1e-3, alpha)
        assert ind(alpha) == pytest.approx(0.5, abs=1e-12)


def test_indicator_two_sided_bound():
    ind = erf_indicator(0.2, 1e-3, 0.0)
    assert ind(0.5) >= 1 - 1e-2
    assert ind(-0.5) <= 1e-2


def test_indicator_grid_scan():
    eps = 1e-3
    ind = erf_indicator(0.2, eps, 0.0)
    x = np.concatenate([np.linspace(-1, -0.1, 5000), np.linspace(0.1, 1, 5000)])
    err = np.abs(ind(x) - (x > 0))
    assert err.max() <= 10 * eps


def test_indicator_degree_is_odd_and_grows_like_inverse_square_margin():
    d1 = indicator_degree(0.5, 1e-2)
    d2 = indicator_degree(0.25, 1e-2)
    assert d1 % 2 == 1 and d2 % 2 == 1
    assert 3.5 <= d2 / d1 <= 4.5
    assert indicator_degree(0.5, 1e-3) > d1


def test_indicator_scan_error_shrinks_with_eps():
    x = np.linspace(-1, 1, 4001)
    x = x[np.abs(x) >= 0.25]
    errs = []
    for eps in (1e-1, 1e-2, 1e-3):
        err = np.abs(erf_indicator(0.5, eps)(x) - (x > 0)).max()
        assert err <= 10 * eps
        errs.append(err)
    assert errs[0] > errs[1] > errs[2]


def test_indicator_rejects_bad_parameters():
    with pytest.raises(ValueError):
        erf_indicator(0.0, 1e-2)
    with pytest.raises(ValueError):
        erf_indicator(0.2, 1.5)
    with pytest.raises(ValueError):
        erf_indicator(0.2, 1e-2, alpha=1.0)


def test_small_indicator_materialises_to_matching_series():
    # float re-expansion in powers of x cancels; the error is measured in units
    # of the shifted tilde sum, which is the scale of that cancellation
    ind = erf_indicator(1.0, 1e-2, 0.2)
    s = ind.as_series()
    assert s.degree == ind.degree
    x = np.linspace(-1, 1, 41)
    scale = np.array([math.exp(ind.log_tilde(abs(v))[0]) for v in x])
    assert np.all(np.abs(s(x) - ind(x)) <= 1e-14 * scale)
    near = np.linspace(0.0, 0.4, 9)
    assert np.allclose(s(near), ind(near), atol=1e-9)
