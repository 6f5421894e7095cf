"""Lowering of decision programs to explicit polynomial approximants.

Every gate becomes a node that can be evaluated numerically, knows its
polynomial degree, a sup bound on its ball of inputs, and the tilde of the
polynomial it stands for. Tildes are carried as log "jets": the logs of
T(y) and T'(y), where T is the tilde of the node as a polynomial in the
program input. Vector-valued nodes carry the sum of their component tildes,
which dominates the tilde of any unit-norm linear form of the output.

Indicators are erf polynomials whose accuracy holds on the node's whole
input ball (radius rho), so products with far-away children stay bounded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegreeError, ProgramSyntaxError
from ..series import IndicatorPolynomial, MultiSeries, Term, erf_indicator
from . import ast as A

DEFAULT_DEGREE_CAP = 10**9
NEG_INF = -math.inf


def _log(v: float) -> float:
    return math.log(v) if v > 0 else NEG_INF


def _lae(*vals) -> float:
    m = max(vals)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log(sum(math.exp(v - m) for v in vals))


# jets are (log T, log T')

def jet_add(*jets):
    return _lae(*(j[0] for j in jets)), _lae(*(j[1] for j in jets))


def jet_mul(*jets):
    value = sum(j[0] for j in jets)
    terms = []
    for i, j in enumerate(jets):
        rest = sum(o[0] for k, o in enumerate(jets) if k != i)
        terms.append(j[1] + rest)
    return value, _lae(*terms)


def jet_scale(jet, log_c):
    return jet[0] + log_c, jet[1] + log_c


def jet_poly(log_abs_coeffs, jet):
    """Jet of p~(T) for p~ with the given log |coefficients|."""
    lt, ldt = jet
    vals, ders = [], []
    for k, lc in enumerate(log_abs_coeffs):
        if lc == NEG_INF:
            continue
        vals.append(lc if k == 0 else lc + k * lt)
        if k >= 1:
            ders.append(lc + math.log(k) + ((k - 1) * lt if k > 1 else 0.0) + ldt)
    return _lae(NEG_INF, *vals), _lae(NEG_INF, *ders)


# ---------------------------------------------------------------------------
# indicator factors


@dataclass(frozen=True)
class Ind:
    """1(direction . z >= alpha) (or <=, via a reflected polynomial), or a constant."""

    direction: tuple | None
    poly: IndicatorPolynomial | None = None
    const: float = 0.0

    @property
    def degree(self) -> int:
        return 0 if self.poly is None else self.poly.degree

    @property
    def eps(self) -> float:
        return 0.0 if self.poly is None else self.poly.eps

    @property
    def sup(self) -> float:
        return abs(self.const) if self.poly is None else 1.0 + self.poly.eps

    @property
    def slope(self) -> float:
        return 0.0 if self.poly is None else self.poly.scale / math.sqrt(math.pi)

    def __call__(self, Z):
        if self.poly is None:
            return np.full(len(Z), self.const)
        return self.poly(Z @ np.asarray(self.direction))

    def log_jet(self, jet):
        if self.poly is None:
            return _log(abs(self.const)), NEG_INF
        lw, ldw = jet
        lu = _lae(lw, _log(abs(self.poly.alpha)))
        v, d = self.poly.log_jet(lu)
        return v, d + ldw


def make_indicator(beta, alpha: float, gamma: float, eps: float, rho: float,
                   side: str = "ge") -> Ind:
    """Polynomial for 1(beta . z >= alpha) (side 'ge') or 1(beta . z <= alpha) on ||z|| <= rho.

    Accurate to eps wherever |beta . z - alpha| >= gamma/2.
    """
    beta = np.asarray(beta, float)
    b = float(np.linalg.norm(beta))
    if b == 0 or rho == 0:
        holds = (0.0 >= alpha) if side == "ge" else (0.0 <= alpha)
        return Ind(None, None, float(holds))
    if not gamma > 0:
        raise ValueError("lowering needs a positive margin")
    a, g = alpha / b, gamma / b
    if abs(a) >= rho:
        # every defined input lies on one side of the threshold
        holds = (a < 0) if side == "ge" else (a > 0)
        return Ind(None, None, float(holds))
    poly = erf_indicator(g, eps, a, domain=rho)
    if side == "le":
        poly = poly.reflected()
    return Ind(tuple(beta / b), poly)


def cluster_factor(center, r: float, eps: float, rho: float) -> Ind:
    """Membership of a unit-norm input in the ball of radius r/3 around ``center``.

    On the sphere ||x - c||^2 = 1 + ||c||^2 - 2 c.x, so the ball is a
    half-space in c.x; the band between r/3 and 2r/3 becomes the margin.
    """
    c = np.asarray(center, float)
    cn = float(np.linalg.norm(c))
    alpha = (1 + cn**2 - 5 * r**2 / 18) / 2
    return make_indicator(c, alpha, r**2 / 6, eps, rho, "ge")


# ---------------------------------------------------------------------------
# lowered nodes


class LNode:
    degree: int = 0
    bound: float = 0.0       # sup of the l1 norm of the output on the input ball
    lip: float = 0.0         # working Lipschitz estimate, used for error budgets
    out_dim: int = 1
    exact: bool = False      # True when the node reproduces the gate exactly

    def __call__(self, Z):
        raise NotImplementedError

    def jet(self, jet, rules: str = "lowered"):
        """Log tilde jet of the node given the jet of its input's linear forms."""
        raise NotImplementedError

    def to_multiseries(self, forms):
        raise NotImplementedError(f"{type(self).__name__} cannot be expanded")


class LConst(LNode):
    def __init__(self, value):
        self.value = np.asarray(value, float)
        self.out_dim = int(self.value.size) if self.value.ndim else 1
        self.bound = float(np.sum(np.abs(self.value)))
        self.exact = True

    def __call__(self, Z):
        return np.broadcast_to(self.value, (len(Z),) + self.value.shape).copy()

    def jet(self, jet, rules="lowered"):
        return _log(self.bound), NEG_INF

    def to_multiseries(self, forms):
        if self.value.ndim:
            raise NotImplementedError("vector constants cannot be expanded")
        return MultiSeries.constant(float(self.value), forms.dim)


class LLin(LNode):
    def __init__(self, beta, offset, rho):
        self.beta = np.asarray(beta, float)
        self.offset = float(offset)
        b = float(np.linalg.norm(self.beta))
        self.degree = int(b > 0)
        self.bound = b * rho + abs(self.offset)
        self.lip = b
        self.exact = True

    def __call__(self, Z):
        return Z @ self.beta + self.offset

    def jet(self, jet, rules="lowered"):
        lb = _log(float(np.linalg.norm(self.beta)))
        return _lae(lb + jet[0], _log(abs(self.offset))), lb + jet[1]

    def to_multiseries(self, forms):
        return forms.linear(self.beta) + MultiSeries.constant(self.offset, forms.dim)


class LPoly(LNode):
    def __init__(self, coeffs, child: LNode):
        self.coeffs = np.asarray(coeffs, float)
        self.child = child
        nz = np.flatnonzero(self.coeffs)
        p = int(nz[-1]) if nz.size else 0
        self.degree = p * child.degree
        B = child.bound
        self.bound = float(np.sum(np.abs(self.coeffs) * B ** np.arange(len(self.coeffs))))
        self.lip = _poly_lip(self.coeffs, B) * child.lip
        self.exact = child.exact
        with np.errstate(divide="ignore"):
            self._lc = np.log(np.abs(self.coeffs))

    def __call__(self, Z):
        return np.polynomial.polynomial.polyval(self.child(Z), self.coeffs)

    def jet(self, jet, rules="lowered"):
        return jet_poly(self._lc, self.child.jet(jet, rules))

    def to_multiseries(self, forms):
        c = self.child.to_multiseries(forms)
        acc = MultiSeries.constant(0.0, forms.dim)
        for a in self.coeffs[::-1]:
            acc = acc * c + MultiSeries.constant(a, forms.dim)
        return acc


def _poly_lip(coeffs, B):
    k = np.arange(1, len(coeffs))
    return float(np.sum(k * np.abs(coeffs[1:]) * B ** (k - 1))) if len(coeffs) > 1 else 0.0


class LSum(LNode):
    def __init__(self, children, weights=None):
        self.children = list(children)
        self.weights = np.ones(len(self.children)) if weights is None else np.asarray(weights, float)
        self.degree = max(c.degree for c in self.children)
        self.bound = float(sum(abs(w) * c.bound for w, c in zip(self.weights, self.children)))
        self.lip = float(sum(abs(w) * c.lip for w, c in zip(self.weights, self.children)))
        self.out_dim = max(c.out_dim for c in self.children)
        self.exact = all(c.exact for c in self.children)

    def __call__(self, Z):
        out = 0.0
        for w, c in zip(self.weights, self.children):
            out = out + w * c(Z)
        return out

    def jet(self, jet, rules="lowered"):
        return jet_add(*(jet_scale(c.jet(jet, rules), _log(abs(w)))
                         for w, c in zip(self.weights, self.children)))

    def to_multiseries(self, forms):
        acc = MultiSeries.constant(0.0, forms.dim)
        for w, c in zip(self.weights, self.children):
            acc = acc + c.to_multiseries(forms) * float(w)
        return acc


def _bmul(a, b):
    if np.ndim(a) == 2 and np.ndim(b) == 1:
        return a * b[:, None]
    if np.ndim(a) == 1 and np.ndim(b) == 2:
        return a[:, None] * b
    return a * b


class LProd(LNode):
    def __init__(self, children):
        self.children = list(children)
        self.degree = sum(c.degree for c in self.children)
        Bs = [c.bound for c in self.children]
        self.bound = float(math.prod(Bs))
        self.lip = float(sum(c.lip * math.prod(Bs[:i] + Bs[i + 1:]) for i, c in enumerate(self.children)))
        self.out_dim = max(c.out_dim for c in self.children)
        self.exact = all(c.exact for c in self.children)

    def __call__(self, Z):
        out = self.children[0](Z)
        for c in self.children[1:]:
            out = _bmul(out, c(Z))
        return out

    def jet(self, jet, rules="lowered"):
        return jet_mul(*(c.jet(jet, rules) for c in self.children))

    def to_multiseries(self, forms):
        acc = self.children[0].to_multiseries(forms)
        for c in self.children[1:]:
            acc = acc * c.to_multiseries(forms)
        return acc


class LSwitch(LNode):
    """I_left(beta . z) f_left + I_right(beta . z) f_right."""

    def __init__(self, ind_left: Ind, ind_right: Ind, left: LNode, right: LNode):
        self.ind_left, self.ind_right = ind_left, ind_right
        self.left, self.right = left, right
        d_ind = ind_left.degree
        self.degree = max(d_ind + left.degree, d_ind + right.degree)
        sup = max(ind_left.sup, ind_right.sup)
        self.bound = sup * (left.bound + right.bound)
        self.lip = ind_left.slope * (left.bound + right.bound) + sup * (left.lip + right.lip)
        self.out_dim = max(left.out_dim, right.out_dim)

    def __call__(self, Z):
        return _bmul(self.ind_left(Z), self.left(Z)) + _bmul(self.ind_right(Z), self.right(Z))

    def jet(self, jet, rules="lowered"):
        il = self.ind_left.log_jet(jet)
        fl, fr = self.left.jet(jet, rules), self.right.jet(jet, rules)
        if rules == "certify":
            # I_left (f~ + g~) + g~, from writing I_right = 1 - I_left
            return jet_add(jet_mul(il, jet_add(fl, fr)), fr)
        ir = self.ind_right.log_jet(jet)
        return jet_add(jet_mul(il, fl), jet_mul(ir, fr))

    def to_multiseries(self, forms):
        out = MultiSeries.constant(0.0, forms.dim)
        for ind, child in ((self.ind_left, self.left), (self.ind_right, self.right)):
            out = out + forms.indicator(ind) * child.to_multiseries(forms)
        return out


class LCluster(LNode):
    """sum_i I_i(c_i . z) f_i((z - c_i) 3/r)."""

    def __init__(self, centers, r, inds, children):
        self.centers = [np.asarray(c, float) for c in centers]
        self.r = float(r)
        self.inds = list(inds)
        self.children = list(children)
        self.degree = max(i.degree + c.degree for i, c in zip(self.inds, self.children))
        self.bound = float(sum(i.sup * c.bound for i, c in zip(self.inds, self.children)))
        self.lip = float(sum(i.slope * c.bound + i.sup * 3 / self.r * c.lip
                             for i, c in zip(self.inds, self.children)))
        self.out_dim = max(c.out_dim for c in self.children)

    def __call__(self, Z):
        out = 0.0
        for c, ind, ch in zip(self.centers, self.inds, self.children):
            out = out + _bmul(ind(Z), ch((Z - c) * 3 / self.r))
        return out

    def child_jet(self, jet, center_norm: float):
        # linear forms of (z - c) 3/r have tilde (3/r)(W + ||c||)
        l3r = math.log(3 / self.r)
        return l3r + _lae(jet[0], _log(center_norm)), l3r + jet[1]

    def jet(self, jet, rules="lowered"):
        parts = []
        for c, ind, ch in zip(self.centers, self.inds, self.children):
            cn = 1.0 if rules == "certify" else float(np.linalg.norm(c))
            parts.append(jet_mul(ind.log_jet(jet), ch.jet(self.child_jet(jet, cn), rules)))
        return jet_add(*parts)


class LLookup(LNode):
    """sum_i v_i I_i(k_i . z)."""

    def __init__(self, keys, values, inds):
        self.keys = [np.asarray(k, float) for k in keys]
        self.values = np.array([np.asarray(v, float) for v in values])
        self.inds = list(inds)
        self.degree = max(i.degree for i in self.inds)
        l1 = np.abs(self.values).reshape(len(self.values), -1).sum(axis=1)
        self.l1 = l1
        self.bound = float(sum(i.sup * a for i, a in zip(self.inds, l1)))
        self.lip = float(sum(i.slope * a for i, a in zip(self.inds, l1)))
        self.out_dim = 1 if self.values.ndim == 1 else self.values.shape[1]

    def __call__(self, Z):
        out = 0.0
        for v, ind in zip(self.values, self.inds):
            out = out + _bmul(ind(Z), np.broadcast_to(v, (len(Z),) + v.shape))
        return out

    def jet(self, jet, rules="lowered"):
        ijets = [ind.log_jet(jet) for ind in self.inds]
        if rules == "certify":
            # k I~ with I~ the largest key indicator tilde (values have l1 norm <= 1)
            top = max(ijets)
            return jet_scale(top, math.log(len(ijets)))
        return jet_add(*(jet_scale(j, _log(a)) for j, a in zip(ijets, self.l1)))


class LRowSum(LNode):
    """sum_i v_i prod_c I_{i,c}(z): the SQL SUM aggregate."""

    def __init__(self, values, row_inds):
        self.values = np.asarray(values, float)
        self.row_inds = [list(r) for r in row_inds]
        self.degree = max((sum(i.degree for i in r) for r in self.row_inds), default=0)
        self.bound = float(sum(abs(v) * math.prod(i.sup for i in r)
                               for v, r in zip(self.values, self.row_inds)))
        self.lip = float(sum(abs(v) * sum(i.slope for i in r) * math.prod(i.sup for i in r)
                             for v, r in zip(self.values, self.row_inds)))
        self.exact = all(i.poly is None for r in self.row_inds for i in r)

    def __call__(self, Z):
        out = np.zeros(len(Z))
        for v, r in zip(self.values, self.row_inds):
            if v == 0:
                continue
            f = np.full(len(Z), v)
            for ind in r:
                f = f * ind(Z)
            out += f
        return out

    def jet(self, jet, rules="lowered"):
        parts = [jet_scale(jet_mul(*(i.log_jet(jet) for i in r)) if r else (0.0, NEG_INF), _log(abs(v)))
                 for v, r in zip(self.values, self.row_inds) if v != 0]
        return jet_add((NEG_INF, NEG_INF), *parts)


class LTuple(LNode):
    def __init__(self, children):
        self.children = list(children)
        self.degree = max(c.degree for c in self.children)
        self.bound = float(sum(c.bound for c in self.children))
        self.lip = float(sum(c.lip for c in self.children))
        self.out_dim = sum(c.out_dim for c in self.children)
        self.exact = all(c.exact for c in self.children)

    def __call__(self, Z):
        return np.column_stack([np.asarray(c(Z)).reshape(len(Z), -1) for c in self.children])

    def jet(self, jet, rules="lowered"):
        return jet_add(*(c.jet(jet, rules) for c in self.children))


class LProj(LNode):
    def __init__(self, index, child):
        self.index, self.child = index, child
        self.degree, self.bound, self.lip = child.degree, child.bound, child.lip
        self.exact = child.exact

    def __call__(self, Z):
        return np.asarray(self.child(Z)).reshape(len(Z), -1)[:, self.index]

    def jet(self, jet, rules="lowered"):
        return self.child.jet(jet, rules)


class LCompose(LNode):
    def __init__(self, outer, inner):
        self.outer, self.inner = outer, inner
        self.degree = outer.degree * max(inner.degree, 1) if outer.degree else 0
        self.bound = outer.bound
        self.lip = outer.lip * inner.lip
        self.out_dim = outer.out_dim
        self.exact = outer.exact and inner.exact

    def __call__(self, Z):
        u = np.asarray(self.inner(Z), float).reshape(len(Z), -1)
        return self.outer(u)

    def jet(self, jet, rules="lowered"):
        return self.outer.jet(self.inner.jet(jet, rules), rules)


class LIndicator(LNode):
    """A bare indicator of the node input (used inside MAX/MIN lowering)."""

    def __init__(self, ind: Ind):
        self.ind = ind
        self.degree = ind.degree
        self.bound = ind.sup
        self.lip = ind.slope

    def __call__(self, Z):
        return self.ind(Z)

    def jet(self, jet, rules="lowered"):
        return self.ind.log_jet(jet)


# ---------------------------------------------------------------------------
# expansion into explicit multivariate series (small cases only)


class _RawForms:
    """Linear forms of the raw program input x."""

    def __init__(self, dim: int):
        self.dim = dim

    def linear(self, beta) -> MultiSeries:
        beta = np.asarray(beta, float)
        if not np.any(beta):
            return MultiSeries.constant(0.0, self.dim)
        return MultiSeries((Term(1.0, (float(np.linalg.norm(beta)),), (tuple(beta),)),), self.dim)

    def indicator(self, ind: Ind) -> MultiSeries:
        if ind.poly is None:
            return MultiSeries.constant(ind.const, self.dim)
        series = ind.poly.as_series()
        return MultiSeries.from_univariate(series, np.asarray(ind.direction))


# ---------------------------------------------------------------------------
# the lowering recursion


@dataclass
class Lowered:
    """A lowered program: callable, with degree and tilde jets."""

    root: LNode
    eps: float
    dim: int | None = None

    @property
    def degree(self) -> int:
        return self.root.degree

    @property
    def bound(self) -> float:
        return self.root.bound

    def __call__(self, X):
        X = np.asarray(X, float)
        single = X.ndim == 1
        out = self.root(np.atleast_2d(X))
        return out[0] if single else out

    def log_jet(self, y: float, rules: str = "lowered"):
        return self.root.jet((_log(y), 0.0), rules)

    def log_tilde_at_1(self, rules: str = "lowered") -> float:
        return self.log_jet(1.0, rules)[0]

    def log_sqrt_M(self, rules: str = "lowered") -> float:
        """log(T'(1) + T(0))."""
        return _lae(self.log_jet(1.0, rules)[1], self.log_jet(0.0, rules)[0])

    def to_multiseries(self, dim: int | None = None) -> MultiSeries:
        dim = dim or self.dim
        if dim is None:
            raise ValueError("input dimension unknown; pass dim")
        return self.root.to_multiseries(_RawForms(dim))


class _Lowerer:
    def __init__(self, degree_cap: int):
        self.cap = degree_cap

    def check(self, node: LNode, g) -> LNode:
        if node.degree > self.cap:
            raise DegreeError(f"{type(g).__name__} gate lowers to degree {node.degree:,}, "
                              f"above the cap {self.cap:,}")
        return node

    def __call__(self, g, e: float, rho: float) -> LNode:
        return self.check(self._lower(g, e, rho), g)

    def _lower(self, g, e, rho):
        if isinstance(g, A.Const):
            return LConst(g.value)
        if isinstance(g, A.Lin):
            return LLin(g.beta, g.offset, rho)
        if isinstance(g, A.Poly):
            child = self(g.child, e / 2, rho)
            if not child.exact:
                lp = _poly_lip(np.asarray(g.coeffs), child.bound * (1 + e))
                if lp > 1:
                    child = self(g.child, e / (2 * lp), rho)
            return LPoly(g.coeffs, child)
        if isinstance(g, A.Sum):
            k = len(g.children)
            return LSum([self(c, e / k, rho) for c in g.children])
        if isinstance(g, A.Prod):
            k = len(g.children)
            first = [self(c, e / k, rho) for c in g.children]
            Bs = [c.bound + 1 for c in first]
            out = []
            for i, (c, node) in enumerate(zip(g.children, first)):
                others = math.prod(Bs[:i] + Bs[i + 1:])
                out.append(node if node.exact or others <= 1 else self(c, e / (k * others), rho))
            return LProd(out)
        if isinstance(g, A.Switch):
            left, right = self(g.left, e / 3, rho), self(g.right, e / 3, rho)
            e_ind = e / (2 * (left.bound + right.bound + 1))
            il = make_indicator(g.beta, g.alpha, g.gamma, e_ind, rho, "le")
            ir = make_indicator(g.beta, g.alpha, g.gamma, e_ind, rho, "ge")
            return LSwitch(il, ir, left, right)
        if isinstance(g, A.Cluster):
            kids = []
            for c, ch in zip(g.centers, g.children):
                rho_c = 3 * (rho + float(np.linalg.norm(c))) / g.r
                kids.append(self(ch, e / 3, rho_c))
            e_ind = e / (2 * (sum(k.bound for k in kids) + 1))
            inds = [cluster_factor(c, g.r, e_ind, rho) for c in g.centers]
            return LCluster(g.centers, g.r, inds, kids)
        if isinstance(g, A.Lookup):
            l1 = sum(float(np.sum(np.abs(v))) for v in g.values)
            e_ind = e / (l1 + 1)
            inds = [cluster_factor(k, g.r, e_ind, rho) for k in g.keys]
            return LLookup(g.keys, g.values, inds)
        if isinstance(g, A.TupleGate):
            return LTuple([self(c, e, rho) for c in g.children])
        if isinstance(g, A.Proj):
            return LProj(g.index, self(g.child, e, rho))
        if isinstance(g, A.Sql):
            return self._sql(g, e, rho)
        if isinstance(g, A.Compose):
            inner = self(g.inner, e / 2, rho)
            rho_o = inner.bound * (1 + e)
            outer = self(g.outer, e / 2, rho_o)
            if not inner.exact and outer.lip > 1:
                inner = self(g.inner, e / (2 * outer.lip), rho)
            return LCompose(outer, inner)
        raise TypeError(f"not a program gate: {type(g).__name__}")

    # -- SQL --------------------------------------------------------------

    def _row_inds(self, g: A.Sql, rows, e_c: float, rho: float):
        out = []
        for i in rows:
            inds = []
            for w in g.where:
                if w.kind == "ge":
                    if len(w.beta) == 0 or not np.any(w.beta):
                        holds = g.rows[i][w.col] >= w.offset
                        inds.append(Ind(None, None, float(holds)))
                        continue
                    if w.gamma == 0:
                        raise ProgramSyntaxError("lowering a SQL filter needs a positive margin gamma")
                    # row[col] >= beta.x + offset  <=>  beta.x <= row[col] - offset
                    inds.append(make_indicator(w.beta, g.rows[i][w.col] - w.offset, w.gamma,
                                               e_c, rho, "le"))
                else:
                    inds.append(cluster_factor(g.keys[i], w.r, e_c, rho))
            out.append(inds)
        return out

    def _row_sum(self, g: A.Sql, rows, values, e: float, rho: float) -> LRowSum:
        m = max(len(g.where), 1)
        total = float(np.sum(np.abs(values)))
        e_c = e / (2 * m * total + 1)
        return LRowSum(values, self._row_inds(g, rows, e_c, rho))

    def _sql(self, g: A.Sql, e: float, rho: float) -> LNode:
        k = len(g.rows)
        if k == 0:
            return LConst(0.0)
        if g.agg == "sum":
            return self._row_sum(g, range(k), g.values, e, rho)
        if g.agg == "max":
            return self._sql_max(g, np.asarray(g.values), e, rho)
        # min = nonempty * (1 - max(1 - v))
        nonempty = self._any_match(g, range(k), e / 3, rho)
        flipped = self._sql_max(g, 1 - np.asarray(g.values), e / 3, rho)
        return LProd([nonempty, LPoly([1.0, -1.0], flipped)])

    def _any_match(self, g: A.Sql, rows, e: float, rho: float) -> LNode:
        """Indicator that at least one of ``rows`` matches, accurate to e."""
        rows = list(rows)
        ks = len(rows)
        # normalized count in {0} U [1/ks, 1]; inner error kept below 1/(4 ks)
        count = self._row_sum(g, rows, np.full(ks, 1.0 / ks), 1.0 / (4 * ks), rho)
        outer = make_indicator([1.0], 1.0 / (2 * ks), 1.0 / (2 * ks), e,
                               max(1.25, count.bound), "ge")
        return LCompose(LIndicator(outer), count)

    def _sql_max(self, g: A.Sql, values: np.ndarray, e: float, rho: float) -> LNode:
        """max over matched rows ~ delta * #{levels j : some matched value >= j delta}."""
        delta = e / 2
        levels = int(math.floor(1 / delta + 1e-9))
        grid = delta * np.arange(1, levels + 1)
        # levels reached by the same set of rows share one indicator
        groups: dict[tuple, int] = {}
        for t in grid:
            rows = tuple(np.flatnonzero(values >= t - 1e-12))
            if rows:
                groups[rows] = groups.get(rows, 0) + 1
        if not groups:
            return LConst(0.0)
        weights = [delta * n for n in groups.values()]
        parts = [self._any_match(g, rows, e / 2, rho) for rows in groups]
        return LSum(parts, weights)


def lower(program, eps: float, *, degree_cap: int = DEFAULT_DEGREE_CAP, rho: float = 1.0,
          dim: int | None = None) -> Lowered:
    """Polynomial approximant of ``program`` within O(eps) on its defined region.

    ``rho`` is the radius of the input ball the approximant must stay
    bounded on (1 for programs of unit-norm inputs).
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    root = _Lowerer(int(degree_cap))(program, eps, rho)
    return Lowered(root, eps, dim)
