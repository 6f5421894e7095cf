import math

import numpy as np
import pytest

from mtl import kernels as K
from mtl.bounds import kernel_series_bound
from mtl.errors import KernelError
from mtl.harness.experiments import pinv_complexity
from mtl.taskgen import unit_rows

RELU = K.KernelSpec("relu_bias")
GAUSS = K.KernelSpec("gaussian", r=1.0)
SLOW = K.KernelSpec("slow_decay", s=2.0, D=2)


def sphere(n, d, seed=0):
    return unit_rows(np.random.default_rng(seed).standard_normal((n, d)))


def test_kernel_eval_examples():
    x = np.array([1.0, 0.0])
    y = np.array([0.0, 1.0])
    assert K.kernel_eval(RELU, x, x) == pytest.approx(0.5)
    assert K.kernel_eval(GAUSS, x, y) == pytest.approx(math.exp(-1))
    assert K.kernel_eval(SLOW, x, x) == pytest.approx(1.25)


def test_relu_kernel_closed_form():
    t = np.linspace(-1, 1, 21)
    want = (t + 1) / (4 * np.pi) * (np.pi - np.arccos((t + 1) / 2))
    assert np.allclose(RELU(t), want, atol=1e-15)


def test_non_unit_inputs_rejected():
    with pytest.raises(KernelError):
        K.kernel_eval(RELU, np.array([2.0, 0.0]), np.array([1.0, 0.0]))


def test_spec_validation():
    with pytest.raises(KernelError):
        K.KernelSpec("nope")
    with pytest.raises(KernelError):
        K.KernelSpec("slow_decay", s=2.5)
    with pytest.raises(KernelError):
        K.KernelSpec("gaussian", r=0.0)


def test_kernel_coeffs_examples():
    b = K.kernel_coeffs(GAUSS, 2)
    assert b == pytest.approx([math.exp(-1), math.exp(-1), math.exp(-1) / 2])
    assert K.kernel_coeffs(K.KernelSpec("slow_decay", s=2.0, D=20), 5)[1:] == \
        pytest.approx([1 / k**2 for k in range(1, 6)])
    r = K.kernel_coeffs(RELU, 20)
    assert np.all(r[1:] > 0)
    scaled = r[5:21] * np.arange(5, 21) ** 1.5
    assert scaled.max() / scaled.min() <= 4


def test_relu_coeffs_reproduce_kernel():
    b = K.kernel_coeffs(RELU, 60)
    t = np.linspace(-0.6, 0.6, 7)
    assert np.allclose(np.polyval(b[::-1], t), RELU(t), atol=1e-8)


def test_gram_examples():
    g = K.gram(RELU, np.array([[1.0, 0.0, 0.0]]))
    assert g.H.tolist() == [[0.5]]
    G = K.gram(GAUSS, np.eye(3))
    assert np.allclose(np.diag(G.H), 1) and np.allclose(G.H[~np.eye(3, dtype=bool)], math.exp(-1))
    X = sphere(30, 4)
    H = K.gram(RELU, X).H
    assert np.array_equal(H, H.T)


@pytest.mark.parametrize("spec", [RELU, GAUSS, K.KernelSpec("slow_decay", s=1.5, D=20)])
def test_gram_is_positive_definite_after_jitter(spec):
    g = K.gram(spec, sphere(200, 5, seed=3))
    assert np.linalg.eigvalsh(g.H + g.jitter * np.eye(g.n)).min() > 0


def test_duplicate_rows_factorize_with_recorded_jitter():
    X = sphere(5, 3)
    g = K.gram(RELU, np.vstack([X, X]))
    assert g.jitter >= 1e-10 * np.trace(g.H) / g.n


def test_indefinite_matrix_exhausts_jitter_policy():
    with pytest.raises(KernelError):
        K.factorize(np.diag([1.0, -1.0]))


def test_fit_examples():
    g = K.factorize(np.eye(4), jitter=0.0)
    y = np.array([1.0, -2.0, 3.0, 0.5])
    assert np.allclose(K.fit(g, y), y)
    assert np.abs(K.fit(g, y, ridge=1e12)).max() < 1e-11


def test_linear_target_heldout_rmse():
    beta = unit_rows(np.array([1.0, -2.0, 0.5]))
    X = sphere(250, 3, seed=1)
    y = X @ beta
    reg = K.KernelRegressor(RELU).fit(X[:50], y[:50])
    assert np.sqrt(np.mean((reg.predict(X[50:]) - y[50:]) ** 2)) <= 0.05
    assert np.abs(reg.predict(X[:50]) - y[:50]).max() <= 1e-6 * np.abs(y[:50]).max()


def test_complexity_examples():
    n = 6
    ones = np.ones(n)
    assert K.complexity(K.factorize(np.eye(n), jitter=0.0), ones) == pytest.approx(n)
    assert K.complexity(K.factorize(2 * np.eye(n), jitter=0.0), ones) == pytest.approx(n / 2)
    assert K.complexity(K.factorize(np.eye(n), jitter=0.0), np.zeros(n)) == 0


def test_complexity_is_scale_quadratic():
    X = sphere(40, 3)
    g = K.gram(RELU, X)
    y = X[:, 0] ** 2
    assert K.complexity(g, 3 * y) == pytest.approx(9 * K.complexity(g, y), rel=1e-10)


@pytest.mark.parametrize("k", [1, 2])
def test_complexity_within_series_bound(k):
    rng = np.random.default_rng(k)
    X = sphere(200, 5, seed=k)
    beta = unit_rows(rng.standard_normal(5))
    y = (X @ beta) ** k
    measured = math.sqrt(pinv_complexity(K.kernel_matrix(RELU, X), y))
    bound = kernel_series_bound([0.0] * k + [1.0], [beta] * (k + 1),
                                K.kernel_coeffs(RELU, k)).sqrt_M
    assert measured <= 2 * bound


def test_gaussian_complexity_exceeds_relu_for_quartic():
    X = sphere(200, 5, seed=7)
    beta = unit_rows(np.random.default_rng(7).standard_normal(5))
    y = (X @ beta) ** 4
    assert K.complexity(K.gram(GAUSS, X), y) > K.complexity(K.gram(RELU, X), y)
