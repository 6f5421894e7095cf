"""Independent numeric oracles for the bound machinery.

* complexity_identity: the kernel-complexity identity y* H^+ y = sum_j |a_j|^2 / q_j
  checked by brute force at roots of unity.
* rule_soundness: product / chain rule bounds versus the bound of the
  directly expanded (and term-merged) series.
* indicator_scan: dense grid scan of the erf indicator.

Complex arithmetic is kept inside this module.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import eigh
from scipy.special import zeta

from .bounds import chain_rule_bound, multivariate_bound, product_rule_bound
from .errors import NonFiniteError
from .series import MultiSeries, PowerSeries1D, Term, erf_indicator, tilde

PINV_RTOL = 1e-10


@dataclass(frozen=True)
class OracleReport:
    name: str
    digest: str
    measured: float
    reference: float
    rel_error: float
    tolerance: float
    passed: bool
    detail: dict | None = None

    def to_json(self) -> dict:
        out = asdict(self)
        for k in ("measured", "reference", "rel_error"):
            if not math.isfinite(out[k]):
                out[k] = str(out[k])
        return out


def _digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=lambda o: np.asarray(o).tolist()).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _report(name, inputs, measured, reference, tol, detail=None, rel=None) -> OracleReport:
    if rel is None:
        if reference == 0:
            rel = abs(measured)
        else:
            rel = abs(measured - reference) / abs(reference)
    return OracleReport(name, _digest(inputs), float(measured), float(reference), float(rel),
                        float(tol), bool(rel <= tol), detail)


# ---------------------------------------------------------------------------
# kernel complexity identity


@dataclass(frozen=True)
class RateKernel:
    """Infinite-degree kernel Q(t) = q0 + sum_{k>=1} k^(-s) t^k."""
    s: float = 2.0
    q0: float = 1.0

    def coeff(self, k: int) -> float:
        return self.q0 if k == 0 else float(k) ** -self.s

    def aliased(self, n: int) -> np.ndarray:
        """Coefficients folded mod n: at n-th roots of unity, t^k and t^(k mod n) coincide.

        sum_{m>=0} (j + m n)^(-s) = n^(-s) zeta(s, j/n) (Hurwitz zeta).
        """
        j = np.arange(n, dtype=float)
        out = np.empty(n)
        out[1:] = n ** -self.s * zeta(self.s, j[1:] / n)
        out[0] = self.q0 + n ** -self.s * zeta(self.s, 1.0)
        return out


def _kernel_values(q, n: int) -> np.ndarray:
    """Q(w^m) for m = 0..n-1, w = exp(2 pi i / n)."""
    w = np.exp(2j * np.pi * np.arange(n) / n)
    if isinstance(q, RateKernel):
        # Q(w^m) = sum_j qa_j w^(mj) with the folded coefficients qa
        return np.fft.ifft(q.aliased(n)) * n
    coeffs = np.asarray(q, float)
    out = np.zeros(n, complex)
    for c in coeffs[::-1]:
        out = out * w + c
    return out


def _q_coeff(q, k: int) -> float:
    if isinstance(q, RateKernel):
        return q.coeff(k)
    q = np.asarray(q, float)
    return float(q[k]) if k < len(q) else 0.0


def complexity_identity(a: Sequence[float], q, n: int, *, rtol: float = PINV_RTOL,
                        tol: float = 1e-2) -> OracleReport:
    """Compare y* H^+ y at the n-th roots of unity with sum_j |a_j|^2 / q_j.

    ``q`` is either a finite coefficient list (a polynomial kernel) or a
    RateKernel (a power series with infinitely many terms). Samples are
    x_i = exp(2 pi i i / n), labels y_i = p(x_i) with p = sum_j a_j x^j and
    H_ij = Q(x_i conj(x_j)). The pseudoinverse drops eigenvalues below
    rtol times the largest one.
    """
    a = np.asarray(a, float)
    deg = len(a) - 1
    if n < 4 * max(deg, 1):
        raise ValueError(f"need n >= 4 * degree ({4 * max(deg, 1)}), got {n}")
    reference = 0.0
    for j, aj in enumerate(a):
        if aj == 0:
            continue
        qj = _q_coeff(q, j)
        if not qj > 0:
            raise ValueError(f"kernel coefficient q_{j} must be positive where a_{j} != 0")
        reference += aj * aj / qj
    x = np.exp(2j * np.pi * np.arange(n) / n)
    y = np.zeros(n, complex)
    for c in a[::-1]:
        y = y * x + c
    qv = _kernel_values(q, n)
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n   # x_i conj(x_j) = w^(i-j)
    H = qv[idx]
    H = (H + H.conj().T) / 2
    lam, U = eigh(H)
    if not np.all(np.isfinite(lam)):
        raise NonFiniteError("Gram eigenvalues are not finite")
    keep = lam > rtol * lam.max()
    if not keep.any():
        raise NonFiniteError("Gram matrix has no eigenvalue above the cutoff")
    z = U[:, keep].conj().T @ y
    measured = float(np.real(np.sum(np.abs(z) ** 2 / lam[keep])))
    kname = f"rate(s={q.s:g})" if isinstance(q, RateKernel) else "poly"
    inputs = {"a": a, "q": kname if isinstance(q, RateKernel) else np.asarray(q, float),
              "n": n, "rtol": rtol}
    return _report("complexity_identity", inputs, measured, reference, tol,
                   {"n": n, "kernel": kname, "rank": int(keep.sum())})


# ---------------------------------------------------------------------------
# tilde-rule soundness


def _lift(s, dim=1) -> MultiSeries:
    if isinstance(s, MultiSeries):
        return s
    if isinstance(s, PowerSeries1D):
        return MultiSeries.from_univariate(s, np.ones(1) if dim == 1 else np.eye(dim)[0])
    raise TypeError(f"cannot use {type(s).__name__} as a multivariate series")


def expand_composition(g: PowerSeries1D, h: MultiSeries) -> MultiSeries:
    """g(h(x)) expanded term by term (Horner) and merged."""
    acc = MultiSeries.constant(0.0, h.dim)
    for c in g.coeffs[::-1]:
        acc = (acc * h).merged() + MultiSeries.constant(float(c), h.dim)
    return acc.merged()


def rule_soundness(g, h, op: str = "product", *, slack: float = 1e-9) -> OracleReport:
    """Rule bound versus the bound of the directly expanded series.

    ``product``: g and h are multivariate series (univariate ones are read
    as functions of x_1); the direct side is multivariate_bound of the
    merged product. ``composition``: g is univariate, applied to h.
    Passes when direct exceeds rule by at most ``slack`` relative to rule.
    """
    if op == "product":
        G, Hs = _lift(g), _lift(h)
        direct = multivariate_bound((G * Hs).merged())
        rule = product_rule_bound(tilde(G), tilde(Hs))
    elif op == "composition":
        if not isinstance(g, PowerSeries1D):
            raise TypeError("composition needs a univariate outer series")
        Hs = _lift(h)
        direct = multivariate_bound(expand_composition(g, Hs))
        rule = chain_rule_bound(tilde(g), tilde(Hs))
    else:
        raise ValueError(f"unknown op {op!r}")
    r, d = rule.sqrt_M, direct.sqrt_M
    gap = (d - r) / max(abs(r), 1e-300)
    inputs = {"op": op, "g": _series_repr(g), "h": _series_repr(h)}
    gap = max(gap, 0.0)
    return OracleReport(f"rule_soundness:{op}", _digest(inputs), d, r, gap, slack,
                        bool(gap <= slack), {"rule_sqrt_M": r, "direct_sqrt_M": d})


def _series_repr(s):
    if isinstance(s, PowerSeries1D):
        return s.coeffs.tolist()
    return [[t.coeff, list(t.directions or ())] for t in s.terms]


def random_multiseries(rng, dim: int = 2, degree: int = 3, n_terms: int = 4,
                       pool: int = 3) -> MultiSeries:
    """Random series with directions drawn from a small pool, so products share terms."""
    dirs = rng.standard_normal((pool, dim))
    terms = []
    for _ in range(n_terms):
        k = int(rng.integers(0, degree + 1))
        ds = tuple(tuple(dirs[i]) for i in sorted(rng.integers(pool, size=k)))
        norms = tuple(float(np.linalg.norm(d)) for d in ds)
        terms.append(Term(float(rng.uniform(-1, 1)), norms, ds))
    return MultiSeries(tuple(terms), dim)


# ---------------------------------------------------------------------------
# indicator scan


def indicator_scan(gamma: float, eps: float, alpha: float = 0.0, *, n_grid: int = 20001,
                   tol: float = 10.0, domain: float = 1.0) -> OracleReport:
    """Max |indicator - step| on a grid of [-domain, domain] outside the margin band, in units of eps."""
    ind = erf_indicator(gamma, eps, alpha, domain=domain)
    x = np.linspace(-domain, domain, n_grid)
    mask = np.abs(x - alpha) >= gamma / 2
    err = np.abs(ind(x[mask]) - (x[mask] >= alpha))
    worst = float(err.max()) if err.size else 0.0
    inputs = {"gamma": gamma, "eps": eps, "alpha": alpha, "n_grid": n_grid, "domain": domain}
    return _report("indicator_scan", inputs, worst, eps, tol, {"degree": ind.degree},
                   rel=worst / eps)


def run_suite(seed: int = 0, quick: bool = False) -> list[OracleReport]:
    """The full oracle suite used by the ``validate`` command."""
    rng = np.random.default_rng(seed)
    out = []
    ns = (256, 512) if quick else (256, 512, 1024, 2048)
    a = [0.0, 1.0, 0.5, -0.3, 0.2, 0.1]
    for q in ([1.0] * 6, RateKernel(2.0)):
        for n in ns:
            out.append(complexity_identity(a, q, n))
    for _ in range(20 if quick else 200):
        out.append(rule_soundness(random_multiseries(rng), random_multiseries(rng)))
    for _ in range(10 if quick else 100):
        g = PowerSeries1D(rng.uniform(-1, 1, size=int(rng.integers(1, 4))))
        h = random_multiseries(rng, degree=2, n_terms=3)
        out.append(rule_soundness(g, h, "composition"))
    for gamma in (0.1, 0.2, 0.5):
        for eps in (1e-2, 1e-3):
            for alpha in (0.0, 0.3, -0.3):
                out.append(indicator_scan(gamma, eps, alpha))
    return out
