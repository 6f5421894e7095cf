"""Learning-bound certificates for decision programs.

The certificate walks the lowered program but applies the recursive tilde
rules gate by gate (sum, product, switch I~(f~ + g~) + g~, cluster
sum_i I~_i f~_i(3(y + 1)/r), lookup k I~, tuple sum, SQL sum over rows,
composition f~(g~)). These rules only ever over-estimate the tilde of the
lowered polynomial, which the soundness checks compare against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..bounds import LearnBound, _exp
from . import lower as L


@dataclass(frozen=True)
class BoundCertificate:
    log_tilde_at_1: float
    degree: int
    log_sqrt_M: float
    eps: float
    rule_trace: tuple = ()

    @property
    def tilde_at_1(self) -> float:
        return _exp(self.log_tilde_at_1)

    @property
    def sqrt_M(self) -> float:
        return _exp(self.log_sqrt_M)

    @property
    def M(self) -> float:
        return _exp(2 * self.log_sqrt_M)

    @property
    def M_low_degree(self) -> float:
        """p g~(1): the constant for a polynomial of degree p."""
        return self.degree * self.tilde_at_1 if self.degree else 0.0

    @property
    def bound(self) -> LearnBound:
        return LearnBound(self.log_sqrt_M, self.degree, self.rule_trace)

    def to_json(self) -> dict:
        def clean(v):
            return v if math.isfinite(v) else str(v)
        return {"tilde_at_1": clean(self.tilde_at_1), "log_tilde_at_1": clean(self.log_tilde_at_1),
                "degree": self.degree, "M": clean(self.M), "sqrt_M": clean(self.sqrt_M),
                "log10_sqrt_M": clean(self.log_sqrt_M / math.log(10)), "eps": self.eps,
                "rule_trace": list(self.rule_trace)}


_RULES = {
    L.LConst: "constant: |c|",
    L.LLin: "linear: ||beta|| y + |b|",
    L.LPoly: "analytic: p~(g~)",
    L.LSum: "sum: f~ + g~",
    L.LProd: "product: f~ g~",
    L.LSwitch: "switch: I~(f~ + g~) + g~",
    L.LCluster: "cluster: sum_i I~_i f~_i(3(y+1)/r)",
    L.LLookup: "lookup: k I~",
    L.LRowSum: "sql: sum_i |f(r_i)| prod I~",
    L.LTuple: "tuple: sum of tildes",
    L.LProj: "projection: tilde of the tuple",
    L.LCompose: "composition: f~(g~)",
    L.LIndicator: "indicator: I~",
}


def rule_trace(node: L.LNode, path: str = "root") -> list[str]:
    out = [f"{path}: {_RULES.get(type(node), type(node).__name__)} [degree {node.degree}]"]
    for i, child in enumerate(_children(node)):
        out.extend(rule_trace(child, f"{path}.{i}"))
    return out


def _children(node):
    for attr in ("children",):
        if hasattr(node, attr):
            return list(getattr(node, attr))
    if isinstance(node, L.LSwitch):
        return [node.left, node.right]
    if isinstance(node, (L.LPoly, L.LProj)):
        return [node.child]
    if isinstance(node, L.LCompose):
        return [node.outer, node.inner]
    return []


def certify(program, eps: float, *, lowered: L.Lowered | None = None, **lower_kw) -> BoundCertificate:
    """Certificate for ``program`` at accuracy eps (lowering it if not supplied)."""
    low = lowered if lowered is not None else L.lower(program, eps, **lower_kw)
    log_t1 = low.log_tilde_at_1("certify")
    log_sqrt_M = low.log_sqrt_M("certify")
    return BoundCertificate(log_t1, low.degree, log_sqrt_M, eps, tuple(rule_trace(low.root)))


def lowered_bound(lowered: L.Lowered) -> LearnBound:
    """sqrt M = T'(1) + T(0) for the tilde T of the lowered polynomial itself."""
    return LearnBound(lowered.log_sqrt_M("lowered"), lowered.degree, ("lowered",))
