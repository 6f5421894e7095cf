import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtl import bounds as B
from mtl.errors import RadiusError
from mtl.series import MultiSeries, PowerSeries1D, Term, TildeSeries

EXP = TildeSeries([1 / math.factorial(k) for k in range(25)])


def test_learn_bound_invariants():
    b = B.LearnBound.from_sqrt(3.0)
    assert b.M == pytest.approx(9.0, rel=1e-9)
    with pytest.raises(ValueError):
        B.LearnBound.from_sqrt(-1.0)
    assert B.LearnBound.from_sqrt(0.0).M == 0.0


def test_univariate_bound_examples():
    assert B.univariate_bound(TildeSeries([0, 1]), 1.0).sqrt_M == pytest.approx(1.0)
    assert B.univariate_bound(EXP, 1.0).sqrt_M == pytest.approx(math.e + 1, rel=1e-9)
    assert B.univariate_bound(TildeSeries([2.5]), 0.7).sqrt_M == pytest.approx(2.5)


def test_univariate_bound_radius_violation():
    with pytest.raises(RadiusError):
        B.univariate_bound(PowerSeries1D([1, 1, 1], radius=1.0), 1.0)


def test_multivariate_bound_examples():
    # values pass through log sqrt M, so equality is up to rounding
    assert B.multivariate_bound(MultiSeries((Term(1.0, (1.0, 1.0)),))).sqrt_M == pytest.approx(2)
    assert B.multivariate_bound(MultiSeries(())).sqrt_M == 0
    s = MultiSeries((Term(1.0, (2.0,)), Term(3.0, ())))
    assert B.multivariate_bound(s).sqrt_M == pytest.approx(5, rel=1e-14)


def test_univariate_matches_one_direction_multiseries():
    g = PowerSeries1D([0.3, -1.0, 0.5, 0.25])
    ms = MultiSeries.from_univariate(g, [0.6, 0.8])
    assert B.univariate_bound(g, 1.0).sqrt_M == pytest.approx(B.multivariate_bound(ms).sqrt_M)


def test_low_degree_bound_examples():
    assert B.low_degree_bound(TildeSeries([1, 1]), 1).M == pytest.approx(2)
    assert B.low_degree_bound(TildeSeries([4]), 0).M == 0
    with pytest.raises(ValueError):
        B.low_degree_bound(TildeSeries([0, 0, 1]), 1)


def test_kernel_series_bound_examples():
    relu = B.relu_rate(4)
    assert B.kernel_series_bound([0, 1], [None, 1.0], relu).sqrt_M == pytest.approx(1)
    gauss = [math.exp(-1) / math.factorial(k) for k in range(3)]   # b_k^{-1/2} = e^{1/2} sqrt(k!)
    assert B.kernel_series_bound([0, 0, 1], [None, None, 1.0], gauss).sqrt_M == \
        pytest.approx(math.exp(0.5) * math.sqrt(2))
    assert B.kernel_series_bound([0, 0, 0], [1, 1, 1], relu).sqrt_M == 0
    with pytest.raises(ValueError):
        B.kernel_series_bound([0, 1], [1, 1], [1, 0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=6), st.floats(0.1, 2))
def test_kernel_series_relu_specialisation(a, beta):
    b = B.kernel_series_bound(a, [beta] * len(a), B.relu_rate(len(a))).sqrt_M
    # b_0 = inf, so the constant term costs nothing
    direct = sum(k * abs(ak) * beta**k for k, ak in enumerate(a) if k > 0)
    assert b == pytest.approx(direct, rel=1e-12, abs=1e-300)


def test_product_rule_examples():
    y = TildeSeries([0, 1])
    assert B.product_rule_bound(y, y).sqrt_M == 2
    g = TildeSeries([0.5, 2, 1])
    assert B.product_rule_bound(g, TildeSeries([1])).sqrt_M == pytest.approx(
        B.multivariate_bound(g).sqrt_M)
    assert B.product_rule_bound(TildeSeries([2]), TildeSeries([3])).sqrt_M == 6


def test_chain_rule_examples():
    h = TildeSeries([0.2, 0.5, 0.1])
    assert B.chain_rule_bound(TildeSeries([0, 1]), h).sqrt_M == pytest.approx(
        B.multivariate_bound(h).sqrt_M)
    g = TildeSeries([0.1, 1, 0.3])
    assert B.chain_rule_bound(g, TildeSeries([0, 1])).sqrt_M == pytest.approx(
        B.multivariate_bound(g).sqrt_M)
    assert B.chain_rule_bound(TildeSeries([0, 0, 1]), TildeSeries([0, 1])).sqrt_M == 2


def test_chain_rule_radius_violation():
    with pytest.raises(RadiusError):
        B.chain_rule_bound(TildeSeries([1, 1], radius=1.0), TildeSeries([0.5, 0.6]))


def test_sample_complexity_examples():
    q = B.ComplexityQuery(0.1, math.exp(-1), 1.0)
    assert B.sample_complexity(B.LearnBound.from_M(1.0), q) == 200
    assert B.sample_complexity(B.LearnBound.from_M(0.0), B.ComplexityQuery(1.0, 1.0)) == 0
    b = B.LearnBound.from_M(7.0)
    n1 = B.sample_complexity(b, B.ComplexityQuery(0.05, 0.1))
    n2 = B.sample_complexity(b, B.ComplexityQuery(0.1, 0.1))
    assert abs(n1 / 4 - n2) <= 1


def test_complexity_query_ranges():
    for bad in [(0.0, 0.1, 1), (0.1, 0.0, 1), (0.1, 0.1, 0)]:
        with pytest.raises(ValueError):
            B.ComplexityQuery(*bad)


def test_cluster_bound_examples():
    one = B.cluster_bound([TildeSeries([1])], p=0, k=1, eps=0.1, r=1 / 6)
    assert one.M == 0 and math.isfinite(one.extra["log_indicator_tilde_at_1"])
    leaf = TildeSeries([0.5, 1])
    m2 = B.cluster_bound([leaf] * 2, 1, 2, 0.1, 0.1).M
    m4 = B.cluster_bound([leaf] * 4, 1, 4, 0.1, 0.1).M
    assert m4 >= 2 * m2
    assert B.cluster_bound([leaf], 1, 1, 0.1, 0.05).M > B.cluster_bound([leaf], 1, 1, 0.1, 0.1).M
    assert "poly(k/eps)=(k/eps)^2" in B.cluster_bound([leaf], 1, 1, 0.1, 0.1).rule_trace
    with pytest.raises(ValueError):
        B.cluster_bound([leaf], 1, 1, 0.1, 0.5)


def test_cluster_indicator_separates_near_and_far_points():
    r, eps = 0.15, 1e-2
    c = np.array([0.6, 0.8, 0.0])
    ind = B.cluster_indicator(r, eps)
    rng = np.random.default_rng(0)
    dirs = rng.standard_normal((400, 3))
    dirs -= np.outer(dirs @ c, c)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    for dist, target in ((r / 3, 1.0), (0.9 * r / 3, 1.0), (2 * r / 3, 0.0), (1.5, 0.0)):
        theta = 2 * np.arcsin(dist / 2)
        X = np.cos(theta) * c + np.sin(theta) * dirs
        assert np.max(np.abs(ind(X @ c) - target)) <= 10 * eps


def test_boolean_tree_bound_examples():
    assert B.boolean_tree_bound(4, 2).M == pytest.approx(32)
    assert B.boolean_tree_bound(4, 0).M == 0
    assert B.boolean_tree_bound(1, 5).M == pytest.approx(5)


def test_low_degree_matches_boolean_tree_within_constant():
    # a depth-h tree over d Boolean coordinates is a degree-h polynomial; the sum of
    # leaf indicator tildes at 1 is at most d^h, so p g~(1) <= h d^h
    d, h = 3, 2
    leaf = TildeSeries([0.25, 0.5, 0.25])   # (1 + x_i)(1 + x_j) / 4 has tilde ((1+y)/2)^2
    total = TildeSeries(leaf.coeffs * d**h)
    assert B.low_degree_bound(total, h).M <= B.boolean_tree_bound(d, h).M


def test_margin_tree_bound_examples():
    assert B.margin_tree_bound(0, 0.5, 0.1, 3, 2.0).M == pytest.approx(6.0)
    a = B.margin_tree_bound(2, 1.0, 0.1, 2, 1.0).M
    b = B.margin_tree_bound(2, 0.5, 0.1, 2, 1.0).M
    assert a < b
    # exponential factor: log M minus the log of the (p + h log(1/eps)/gamma^2) sum factor
    def log_exp_factor(h):
        b = B.margin_tree_bound(h, 0.5, 0.1, 0, 1.0)
        return 2 * b.log_sqrt_M - math.log(h * math.log(10) / 0.25)
    assert log_exp_factor(2) >= 2 * log_exp_factor(1) * (1 - 1e-12)


def test_gravity_bound_examples():
    b = B.gravity_bound(2, 10, 0.1)
    assert b.degree == 369 == math.ceil(100 * math.log(40))
    logs = [B.gravity_bound(k, 10, 0.1).log10_sqrt_M for k in (2, 4, 8, 16)]
    assert all(x < y for x, y in zip(logs, logs[1:]))
    big = B.gravity_bound(400, 10, 0.01)
    assert big.sqrt_M == math.inf and math.isfinite(big.log10_sqrt_M)


def test_gravity_series_examples():
    assert B.inverse_cube_coeffs(2).tolist() == pytest.approx([1, 1.5, 15 / 8])
    gs = B.gravity_series(2.0, 1e-3, 2.0)
    assert gs(math.sqrt(2.0)) == pytest.approx(2.0**-1.5, rel=1e-15)


def test_gravity_series_within_lagrange_bound():
    gs = B.gravity_series(2.0, 1e-3, 2.0)
    r = np.linspace(gs.r_min, gs.r_max, 10_000)
    err = np.abs(gs(r) - r**-3.0)
    slack = 4 * np.finfo(float).eps * r**-3.0
    assert np.all(err <= gs.lagrange_bound(r) + slack)
