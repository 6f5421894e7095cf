"""Truncated power series, the tilde transform and the erf indicator polynomial.

Everything here is a value object: operations return new series and never
mutate their inputs. Coefficients are float64 and ordered by ascending degree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import erfc, erfcinv, gammaln, logsumexp

from .errors import NonFiniteError, RadiusError

DEFAULT_DEGREE_CAP = 64
# Degree constant of the erf indicator, degree = ceil(C_ERF * log(1/eps) / gamma**2).
C_ERF = 64.0
# Tail mass of the underlying Gaussian at gamma/2, as a fraction of eps.
TAIL_FRACTION = 1e-2


def _as_coeffs(coeffs) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
    if arr.ndim != 1:
        raise ValueError("coefficients must be one-dimensional")
    if arr.size == 0:
        arr = np.zeros(1)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("series coefficients must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PowerSeries1D:
    """Coefficients a_0..a_D of sum_k a_k y**k.

    ``radius`` is a user-declared radius of convergence for the function the
    truncation stands in for; it is only consulted by composition and the
    bound routines.
    """

    coeffs: np.ndarray
    radius: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _as_coeffs(self.coeffs))

    @property
    def degree_cap(self) -> int:
        return len(self.coeffs) - 1

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) if nz.size else 0

    def __call__(self, y):
        return evaluate(self, y)

    def __len__(self):
        return len(self.coeffs)

    def __repr__(self):
        return f"{type(self).__name__}({self.coeffs.tolist()!r})"

    def __eq__(self, other):
        if not isinstance(other, PowerSeries1D):
            return NotImplemented
        a, b = _pad(self.coeffs, other.coeffs)
        return bool(np.array_equal(a, b))

    def to_json(self) -> dict:
        return {"coeffs": self.coeffs.tolist()}

    @classmethod
    def from_json(cls, obj: dict):
        return cls(obj["coeffs"])

    def derivative(self):
        return derivative(self)

    def tilde(self) -> "TildeSeries":
        return TildeSeries(np.abs(self.coeffs), radius=self.radius)


class TildeSeries(PowerSeries1D):
    """A series with nonnegative coefficients, g~(y) = sum |a_k| y**k."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.coeffs < 0):
            raise ValueError("tilde coefficients must be nonnegative")

    def log_value_and_slope(self, y: float) -> tuple[float, float]:
        """Natural logs of g~(y) and g~'(y); -inf stands for zero."""
        return _log_poly_jet(np.log(self.coeffs, where=self.coeffs > 0,
                                    out=np.full(len(self.coeffs), -np.inf)), y)


def _log_poly_jet(log_abs: np.ndarray, y: float) -> tuple[float, float]:
    # log of sum c_k y^k and of sum k c_k y^(k-1) for nonnegative c_k given as logs.
    if y < 0:
        raise ValueError("tilde functions are only evaluated at y >= 0")
    k = np.arange(len(log_abs))
    if y == 0:
        val = log_abs[0]
        slope = log_abs[1] if len(log_abs) > 1 else -np.inf
        return float(val), float(slope)
    ly = math.log(y)
    val = logsumexp(log_abs + k * ly) if np.isfinite(log_abs).any() else -np.inf
    if len(log_abs) > 1 and np.isfinite(log_abs[1:]).any():
        slope = logsumexp(log_abs[1:] + np.log(k[1:]) + (k[1:] - 1) * ly)
    else:
        slope = -np.inf
    return float(val), float(slope)


def _pad(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = max(len(a), len(b))
    return np.pad(a, (0, n - len(a))), np.pad(b, (0, n - len(b)))


def _like(template: PowerSeries1D, coeffs, radius=None):
    cls = TildeSeries if isinstance(template, TildeSeries) else PowerSeries1D
    if cls is TildeSeries and np.any(np.asarray(coeffs) < 0):
        cls = PowerSeries1D
    return cls(coeffs, radius=template.radius if radius is None else radius)


# ---------------------------------------------------------------------------
# multivariate series


@dataclass(frozen=True)
class Term:
    """One product term a * prod_i (beta_i . x).

    Only the norms of the directions matter for the tilde transform; the
    directions themselves are optional and needed only for evaluation.
    """

    coeff: float
    factor_norms: tuple[float, ...] = ()
    directions: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        norms = tuple(float(b) for b in self.factor_norms)
        if any(not b > 0 for b in norms):
            raise ValueError("factor norms must be positive")
        object.__setattr__(self, "factor_norms", norms)
        if self.directions is not None:
            dirs = tuple(tuple(float(v) for v in d) for d in self.directions)
            if len(dirs) != len(norms):
                raise ValueError("one direction per factor norm")
            object.__setattr__(self, "directions", dirs)

    @property
    def degree(self) -> int:
        return len(self.factor_norms)


def _direction_term(coeff, dirs):
    dirs = [np.asarray(d, float) for d in dirs]
    norms = [float(np.linalg.norm(d)) for d in dirs]
    return Term(float(coeff), tuple(norms), tuple(tuple(d) for d in dirs))


@dataclass(frozen=True)
class MultiSeries:
    """sum_v a_v prod_i (beta_{v,i} . x) over the unit ball in R^d."""

    terms: tuple[Term, ...] = ()
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.dim < 1:
            raise ValueError("ambient dimension must be positive")

    @classmethod
    def from_univariate(cls, g: PowerSeries1D | Sequence[float], beta) -> "MultiSeries":
        """g(beta . x) as a multivariate series."""
        coeffs = g.coeffs if isinstance(g, PowerSeries1D) else np.asarray(g, float)
        beta = np.atleast_1d(np.asarray(beta, float))
        terms = [_direction_term(a, [beta] * k) for k, a in enumerate(coeffs) if a != 0]
        return cls(tuple(terms), dim=len(beta))

    @classmethod
    def constant(cls, c: float, dim: int = 1) -> "MultiSeries":
        return cls((Term(float(c), (), ()),) if c else (), dim=dim)

    @property
    def degree(self) -> int:
        return max((t.degree for t in self.terms), default=0)

    @property
    def evaluable(self) -> bool:
        return all(t.directions is not None for t in self.terms)

    def __call__(self, x):
        x = np.asarray(x, float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        out = np.zeros(len(X))
        for t in self.terms:
            if t.directions is None:
                raise ValueError("term has no direction vectors; cannot evaluate")
            v = np.full(len(X), t.coeff)
            for d in t.directions:
                v = v * (X @ np.asarray(d))
            out += v
        return out[0] if single else out

    def __add__(self, other: "MultiSeries") -> "MultiSeries":
        return MultiSeries(self.terms + other.terms, dim=max(self.dim, other.dim))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return MultiSeries(tuple(Term(t.coeff * other, t.factor_norms, t.directions)
                                     for t in self.terms if t.coeff * other != 0), self.dim)
        terms = []
        for a in self.terms:
            for b in other.terms:
                dirs = None
                if a.directions is not None and b.directions is not None:
                    dirs = a.directions + b.directions
                terms.append(Term(a.coeff * b.coeff, a.factor_norms + b.factor_norms, dirs))
        return MultiSeries(tuple(terms), dim=max(self.dim, other.dim))

    __rmul__ = __mul__

    def log_tilde(self, y: float) -> tuple[float, float]:
        return tilde(self).log_value_and_slope(y)

    def merged(self, decimals: int = 12) -> "MultiSeries":
        """Combine terms whose direction multisets coincide (rounded to ``decimals``)."""
        if not self.evaluable:
            raise ValueError("merging needs direction vectors")
        acc: dict = {}
        for t in self.terms:
            key = tuple(sorted(tuple(np.round(d, decimals)) for d in t.directions))
            coeff, dirs, norms = acc.get(key, (0.0, t.directions, t.factor_norms))
            acc[key] = (coeff + t.coeff, dirs, norms)
        terms = tuple(Term(c, n, d) for c, d, n in acc.values() if c != 0)
        return MultiSeries(terms, self.dim)


def tilde(s) -> TildeSeries:
    """Tilde transform: |a_k| for a univariate series, and for a multivariate
    one the per-degree sums of |a_v| times the product of factor norms."""
    if isinstance(s, PowerSeries1D):
        return s.tilde()
    if isinstance(s, MultiSeries):
        out = np.zeros(s.degree + 1)
        for t in s.terms:
            out[t.degree] += abs(t.coeff) * math.prod(t.factor_norms)
        return TildeSeries(out)
    raise TypeError(f"no tilde transform for {type(s).__name__}")


# ---------------------------------------------------------------------------
# univariate arithmetic


def evaluate(s: PowerSeries1D, y):
    """Horner evaluation; raises NonFiniteError on overflow."""
    y_arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y_arr)):
        raise ValueError("evaluation point must be finite")
    acc = np.zeros_like(y_arr)
    with np.errstate(over="ignore", invalid="ignore"):
        for a in s.coeffs[::-1]:
            acc = acc * y_arr + a
    if not np.all(np.isfinite(acc)):
        raise NonFiniteError(f"series value overflowed at y={y}")
    return float(acc) if acc.ndim == 0 else acc


def derivative(s: PowerSeries1D) -> PowerSeries1D:
    c = s.coeffs
    if len(c) == 1:
        return _like(s, [0.0])
    return _like(s, c[1:] * np.arange(1, len(c)))


def series_sum(a: PowerSeries1D, b: PowerSeries1D, degree_cap: int = DEFAULT_DEGREE_CAP):
    x, y = _pad(a.coeffs, b.coeffs)
    out = (x + y)[: degree_cap + 1]
    both_tilde = isinstance(a, TildeSeries) and isinstance(b, TildeSeries)
    cls = TildeSeries if both_tilde else PowerSeries1D
    return cls(out, radius=min(a.radius, b.radius))


def series_product(a: PowerSeries1D, b: PowerSeries1D, degree_cap: int = DEFAULT_DEGREE_CAP):
    """Cauchy product truncated at ``degree_cap``."""
    if degree_cap < 0:
        raise ValueError("degree_cap must be nonnegative")
    out = np.convolve(a.coeffs[: degree_cap + 1], b.coeffs[: degree_cap + 1])[: degree_cap + 1]
    both_tilde = isinstance(a, TildeSeries) and isinstance(b, TildeSeries)
    cls = TildeSeries if both_tilde else PowerSeries1D
    return cls(out, radius=min(a.radius, b.radius))


def compose(outer: PowerSeries1D, inner: PowerSeries1D, degree_cap: int = DEFAULT_DEGREE_CAP):
    """outer(inner(y)) truncated at ``degree_cap``.

    The constant term of ``inner`` must lie strictly inside the declared
    radius of ``outer``.
    """
    if degree_cap < 0:
        raise ValueError("degree_cap must be nonnegative")
    c0 = abs(inner.coeffs[0])
    if not c0 < outer.radius:
        raise RadiusError(f"inner constant term {c0} outside outer radius {outer.radius}")
    inner_c = inner.coeffs[: degree_cap + 1]
    acc = np.zeros(1)
    for a in outer.coeffs[::-1]:
        acc = np.convolve(acc, inner_c)[: degree_cap + 1]
        acc[0] += a
    if not np.all(np.isfinite(acc)):
        raise NonFiniteError("composition overflowed")
    both_tilde = isinstance(outer, TildeSeries) and isinstance(inner, TildeSeries)
    cls = TildeSeries if both_tilde else PowerSeries1D
    return cls(acc, radius=inner.radius)


def scale_shift_input(f: TildeSeries, alpha: float, shifted: bool = False) -> TildeSeries:
    """Tilde dominating f(alpha * (x - c)) for any ||c|| <= 1.

    Unshifted this is f~(alpha y). Shifted it is f~(alpha (y + 1)), whose
    value at y = 1 is f~(2 alpha).
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    inner = TildeSeries([alpha, alpha] if shifted else [0.0, alpha])
    if not shifted:
        k = np.arange(len(f.coeffs))
        return TildeSeries(f.coeffs * alpha**k, radius=f.radius / alpha)
    return compose(TildeSeries(f.coeffs), inner, degree_cap=len(f.coeffs) - 1)


# ---------------------------------------------------------------------------
# erf indicator


def indicator_scale(gamma: float, eps: float) -> float:
    """Slope s of 1/2 (1 + erf(s u)) putting mass TAIL_FRACTION*eps beyond gamma/2."""
    return 2.0 * float(erfcinv(2.0 * TAIL_FRACTION * eps)) / gamma


def _log_term(i, z_abs_log):
    # log of z^(2i+1) / (i! (2i+1))
    return (2 * i + 1) * z_abs_log - gammaln(i + 1) - np.log(2 * i + 1)


def _convergent_half_degree(z_max: float, eps: float) -> int:
    """Smallest N whose first omitted erf term at |z| <= z_max is tiny.

    Past i = z^2 the alternating terms decrease, so the first omitted term
    bounds the truncation error.
    """
    if z_max <= 0:
        return 0
    target = math.log(TAIL_FRACTION * eps * math.sqrt(math.pi) / 2)
    lz = math.log(z_max)
    lo = max(0, math.ceil(z_max**2))
    if _log_term(lo + 1, lz) <= target:
        return lo
    hi = max(lo + 1, 2 * lo)
    while _log_term(hi + 1, lz) > target:
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _log_term(mid + 1, lz) <= target:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True, eq=False)
class IndicatorPolynomial:
    """Truncated Taylor series of 1/2 (1 + erf(s (x - alpha))) in powers of (x - alpha).

    The truncated polynomial is evaluated as erf minus its omitted tail, which
    is exact up to rounding and avoids the cancellation of the raw alternating
    sum. Coefficients are only materialised on request, in log form, since for
    small margins they overflow float64.
    """

    gamma: float
    eps: float
    alpha: float
    scale: float
    degree: int
    domain: float = 1.0
    flip: bool = False

    @property
    def half_degree(self) -> int:
        return (self.degree - 1) // 2

    @cached_property
    def log_abs_coeffs(self) -> np.ndarray:
        """log |a_j| of the coefficients in powers of (x - alpha)."""
        i = np.arange(self.half_degree + 1)
        out = np.full(self.degree + 1, -np.inf)
        out[0] = math.log(0.5)
        out[1::2] = -0.5 * math.log(math.pi) + _log_term(i, math.log(self.scale))
        out.setflags(write=False)
        return out

    @property
    def signs(self) -> np.ndarray:
        s = np.zeros(self.degree + 1)
        s[0] = 1.0
        i = np.arange(self.half_degree + 1)
        s[1::2] = np.where(i % 2 == 0, 1.0, -1.0) * (-1.0 if self.flip else 1.0)
        return s

    def reflected(self) -> "IndicatorPolynomial":
        """The complementary indicator 1 - Phi'; same coefficient magnitudes."""
        return IndicatorPolynomial(self.gamma, self.eps, self.alpha, self.scale,
                                   self.degree, self.domain, not self.flip)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        z = self.scale * (x - self.alpha)
        if self.flip:
            z = -z
        tail = _erf_tail(np.atleast_1d(z), self.half_degree).reshape(z.shape)
        val = 0.5 * erfc(-z) - 0.5 * tail
        return float(val) if val.ndim == 0 else val

    def log_tilde(self, y: float) -> tuple[float, float]:
        """Logs of sum_j |a_j| (y + |alpha|)**j and its y-derivative.

        Only the terms near the peak of the (log-concave) coefficient profile
        are summed, so this stays cheap at degrees in the millions.
        """
        if y < 0:
            raise ValueError("tilde functions are only evaluated at y >= 0")
        w = y + abs(self.alpha)
        return self.log_jet(math.log(w) if w > 0 else -math.inf)

    def log_jet(self, log_u: float) -> tuple[float, float]:
        """Logs of sum_j |a_j| u**j and of its u-derivative, given log u.

        Taking the argument in log form lets nested tildes far beyond float
        range be fed in; then only the top-degree terms matter.
        """
        lsp = -0.5 * math.log(math.pi)
        if log_u == -math.inf:
            return math.log(0.5), lsp + math.log(self.scale)
        lsw = math.log(self.scale) + log_u
        i = _peak_window(2 * lsw, self.half_degree)
        odd = lsp + _log_term(i, lsw)
        value = float(logsumexp(np.append(odd, math.log(0.5))))
        # d/du of u^(2i+1)/(2i+1) is u^(2i)
        slope = float(logsumexp(lsp + math.log(self.scale) + 2 * i * lsw - gammaln(i + 1)))
        return value, slope

    def coeffs_shifted(self) -> np.ndarray:
        """Float coefficients in powers of (x - alpha)."""
        with np.errstate(over="ignore"):
            c = np.exp(self.log_abs_coeffs) * self.signs
        if not np.all(np.isfinite(c)):
            raise NonFiniteError("indicator coefficients overflow float64")
        return c

    def as_series(self) -> PowerSeries1D:
        """Coefficients in powers of x. Only feasible for modest degree and scale."""
        shifted = PowerSeries1D(self.coeffs_shifted())
        return compose(shifted, PowerSeries1D([-self.alpha, 1.0]), degree_cap=self.degree)

    @property
    def coeffs(self) -> np.ndarray:
        return self.as_series().coeffs


def _peak_window(log_lam: float, n_max: int) -> np.ndarray:
    # Indices carrying all but a negligible share of sum_i lam^i / i!, capped at n_max.
    if log_lam > math.log(n_max + 1) + 2:
        # terms still growing at the cap: ratio lam/i > e, so the top 200 dominate
        return np.arange(max(0, n_max - 200), n_max + 1)
    lam = math.exp(log_lam)
    half = 12.0 * math.sqrt(lam) + 60.0
    hi = min(n_max, int(lam + half) + 1)
    lo = max(0, min(int(lam - half), hi - int(2 * half)))
    return np.arange(lo, hi + 1)


def _erf_tail(z: np.ndarray, n_half: int) -> np.ndarray:
    """(2/sqrt(pi)) sum_{i > n_half} (-1)^i z^(2i+1) / (i! (2i+1)), elementwise."""
    out = np.zeros_like(z)
    az = np.abs(z)
    active = np.flatnonzero(az > 0)
    if active.size == 0:
        return out
    # Past i = z^2 the terms decrease, so a short forward sum converges.
    hard = active[az[active] ** 2 > n_half]
    easy = active[az[active] ** 2 <= n_half]
    if easy.size:
        lz = np.log(az[easy])
        acc = np.zeros(easy.size)
        i = n_half + 1
        live = np.ones(easy.size, bool)
        while live.any():
            lt = _log_term(i, lz)
            acc += np.where(live, np.exp(lt), 0.0) * (-1.0) ** i
            live &= lt > math.log(1e-19)
            i += 1
        out[easy] = acc * np.sign(z[easy]) * 2 / math.sqrt(math.pi)
    for j in hard:
        out[j] = _erf_tail_exact(float(z[j]), n_half)
    return out


def _erf_tail_exact(z: float, n_half: int) -> float:
    # Outside the convergent regime the partial sum is huge and needs extended precision.
    import mpmath as mp

    digits = int(z * z / math.log(10)) + 40
    with mp.workdps(digits):
        zz = mp.mpf(z)
        partial = mp.mpf(0)
        term = zz
        for i in range(n_half + 1):
            partial += term / (2 * i + 1)
            term *= -zz * zz / (i + 1)
        tail = mp.erf(zz) - 2 / mp.sqrt(mp.pi) * partial
        return float(tail)


def indicator_degree(gamma: float, eps: float, alpha: float = 0.0, *,
                     c_erf: float = C_ERF, domain: float = 1.0) -> int:
    """Odd truncation degree: the larger of ceil(c_erf log(1/eps)/gamma^2) and
    the smallest degree whose omitted tail is negligible on |x| <= domain."""
    formula = math.ceil(c_erf * math.log(1 / eps) / gamma**2)
    z_max = indicator_scale(gamma, eps) * (domain + abs(alpha))
    floor = 2 * _convergent_half_degree(z_max, eps) + 1
    degree = max(formula, floor, 1)
    return degree if degree % 2 == 1 else degree + 1


def erf_indicator(gamma: float, eps: float, alpha: float = 0.0, *,
                  c_erf: float = C_ERF, domain: float = 1.0) -> IndicatorPolynomial:
    """Polynomial step 1(x >= alpha) with margin gamma and error O(eps) on |x| <= domain."""
    if not 0 < gamma:
        raise ValueError("margin gamma must be positive")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not abs(alpha) < domain:
        raise ValueError("threshold alpha must lie strictly inside the domain")
    degree = indicator_degree(gamma, eps, alpha, c_erf=c_erf, domain=domain)
    return IndicatorPolynomial(gamma, eps, alpha, indicator_scale(gamma, eps), degree, domain)
