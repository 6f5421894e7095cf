"""S-expression syntax for decision programs.

    gate    := "(" name arg* ")"
    vector  := "(" ["vec" | "dir"] number* ")"
    const   (const NUMBER | VECTOR)
    lin     (lin VECTOR [offset])
    poly    (poly (c0 c1 ...) gate)
    sum     (sum gate+)             prod  (prod gate+)
    switch  (switch VECTOR alpha gamma gate_left gate_right)
    cluster (cluster r (at VECTOR gate)+)
    lookup  (lookup [(r x)] [(dim n)] [(seed n)] (entry KEY VALUE)+)    KEY := VECTOR | "string"
    tuple   (tuple gate+)           proj  (proj index gate)
    sql     (sql (rows VECTOR*) (values number*) [(keys VECTOR*)] (where clause*) AGG)
            clause := (ge col VECTOR offset [gamma]) | (match r)
    compose (compose outer inner)

Comments run from ';' to the end of the line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ProgramSyntaxError
from . import ast as A

_TOKEN = re.compile(r'\s+|;[^\n]*|(?P<open>\()|(?P<close>\))|(?P<str>"[^"]*")|(?P<atom>[^\s()";]+)')


@dataclass
class Node:
    """Parsed list with the offset of its opening parenthesis."""
    items: list
    pos: int


@dataclass
class Atom:
    text: str
    pos: int
    quoted: bool = False


def tokenize(text: str):
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ProgramSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind is not None:
            yield kind, m.group(kind), pos
        pos = m.end()


def read(text: str):
    """Text -> nested Node/Atom tree."""
    stack: list[Node] = []
    root = None
    for kind, val, pos in tokenize(text):
        if kind == "open":
            stack.append(Node([], pos))
            continue
        if kind == "close":
            if not stack:
                raise ProgramSyntaxError("unbalanced ')'", pos)
            node = stack.pop()
            item = node
        else:
            item = Atom(val[1:-1], pos, True) if kind == "str" else Atom(val, pos)
        if stack:
            stack[-1].items.append(item)
        elif root is None:
            root = item
        else:
            raise ProgramSyntaxError("trailing input after the program", pos)
    if stack:
        raise ProgramSyntaxError("unclosed '('", stack[-1].pos)
    if root is None:
        raise ProgramSyntaxError("empty program", 0)
    return root


def parse(text: str):
    """Program text -> gate tree. Errors carry the character offset."""
    return _gate(read(text))


# ---------------------------------------------------------------------------


def _num(item) -> float:
    if not isinstance(item, Atom) or item.quoted:
        raise ProgramSyntaxError("expected a number", _pos(item))
    try:
        return float(item.text)
    except ValueError:
        raise ProgramSyntaxError(f"expected a number, got {item.text!r}", item.pos) from None


def _int(item) -> int:
    v = _num(item)
    if v != int(v):
        raise ProgramSyntaxError("expected an integer", item.pos)
    return int(v)


def _pos(item):
    return getattr(item, "pos", None)


def _head(node) -> str | None:
    if isinstance(node, Node) and node.items and isinstance(node.items[0], Atom) \
            and not node.items[0].quoted:
        return node.items[0].text
    return None


def _vector(item) -> tuple:
    if not isinstance(item, Node):
        raise ProgramSyntaxError("expected a parenthesized vector", _pos(item))
    items = item.items
    if _head(item) in ("vec", "dir"):
        items = items[1:]
    return tuple(_num(v) for v in items)


def _numbers(item) -> tuple:
    return _vector(item)


def _keyword(item, name: str) -> Node:
    if _head(item) != name:
        raise ProgramSyntaxError(f"expected ({name} ...)", _pos(item))
    return item


def _arity(node: Node, n: int, what: str, at_least: bool = False):
    got = len(node.items) - 1
    if (got < n) if at_least else (got != n):
        need = f"at least {n}" if at_least else str(n)
        raise ProgramSyntaxError(f"{what} takes {need} argument(s), got {got}", node.pos)


def _gate(node):
    name = _head(node)
    if name is None:
        raise ProgramSyntaxError("expected a gate '(name ...)'", _pos(node))
    handler = _GATES.get(name)
    if handler is None:
        raise ProgramSyntaxError(f"unknown gate {name!r}", node.pos)
    try:
        return handler(node)
    except ProgramSyntaxError as e:
        if e.pos is None:
            raise ProgramSyntaxError(str(e), node.pos) from None
        raise


def _const(n):
    _arity(n, 1, "const")
    arg = n.items[1]
    return A.Const(_vector(arg) if isinstance(arg, Node) else _num(arg))


def _lin(n):
    if len(n.items) not in (2, 3):
        raise ProgramSyntaxError(f"lin takes 1 or 2 arguments, got {len(n.items) - 1}", n.pos)
    off = _num(n.items[2]) if len(n.items) == 3 else 0.0
    return A.Lin(_vector(n.items[1]), off)


def _poly(n):
    _arity(n, 2, "poly")
    return A.Poly(_numbers(n.items[1]), _gate(n.items[2]))


def _many(cls, what):
    def build(n):
        _arity(n, 1, what, at_least=True)
        return cls(tuple(_gate(c) for c in n.items[1:]))
    return build


def _switch(n):
    _arity(n, 5, "switch")
    _, beta, alpha, gamma, left, right = n.items
    return A.Switch(_vector(beta), _num(alpha), _num(gamma), _gate(left), _gate(right))


def _cluster(n):
    _arity(n, 2, "cluster", at_least=True)
    r = _num(n.items[1])
    centers, kids = [], []
    for item in n.items[2:]:
        at = _keyword(item, "at")
        _arity(at, 2, "at")
        centers.append(_vector(at.items[1]))
        kids.append(_gate(at.items[2]))
    return A.Cluster(tuple(centers), r, tuple(kids))


def _lookup(n):
    r = None
    dim = 1
    seed = 0
    entries = []
    for item in n.items[1:]:
        head = _head(item)
        if head in ("r", "dim", "seed"):
            _arity(item, 1, head)
            if head == "r":
                r = _num(item.items[1])
            elif head == "dim":
                dim = _int(item.items[1])
            else:
                seed = _int(item.items[1])
        elif head == "entry":
            _arity(item, 2, "entry")
            key, val = item.items[1], item.items[2]
            entries.append((key, _vector(val) if isinstance(val, Node) else _num(val)))
        else:
            raise ProgramSyntaxError("expected (entry KEY VALUE), (r x), (dim n) or (seed n)",
                                     _pos(item))
    if not entries:
        raise ProgramSyntaxError("lookup needs at least one entry", n.pos)
    d = A.hash_dim(len(entries), dim)
    keys = []
    for key, _ in entries:
        if isinstance(key, Atom) and key.quoted:
            keys.append(tuple(A.hash_key(key.text, d, seed)))
        else:
            keys.append(_vector(key))
    return A.Lookup(tuple(keys), tuple(v for _, v in entries), r)


def _tuple(n):
    return _many(A.TupleGate, "tuple")(n)


def _proj(n):
    _arity(n, 2, "proj")
    return A.Proj(_int(n.items[1]), _gate(n.items[2]))


def _sql(n):
    rows = values = where = None
    keys = ()
    agg = None
    for item in n.items[1:]:
        head = _head(item)
        if head == "rows":
            rows = tuple(_vector(v) for v in item.items[1:])
        elif head == "values":
            values = tuple(_num(v) for v in item.items[1:])
        elif head == "keys":
            keys = tuple(_vector(v) for v in item.items[1:])
        elif head == "where":
            where = tuple(_clause(c) for c in item.items[1:])
        elif isinstance(item, Atom) and not item.quoted:
            agg = item.text
        else:
            raise ProgramSyntaxError("unexpected sql argument", _pos(item))
    if rows is None or values is None or agg is None:
        raise ProgramSyntaxError("sql needs (rows ...), (values ...) and an aggregator", n.pos)
    return A.Sql(rows, values, where or (), agg, keys)


def _clause(c):
    head = _head(c)
    if head == "ge":
        if len(c.items) not in (4, 5):
            raise ProgramSyntaxError("ge takes col, vector, offset and an optional margin", c.pos)
        gamma = _num(c.items[4]) if len(c.items) == 5 else 0.0
        return A.Where("ge", _int(c.items[1]), _vector(c.items[2]), _num(c.items[3]), gamma)
    if head == "match":
        _arity(c, 1, "match")
        return A.Where("match", r=_num(c.items[1]))
    raise ProgramSyntaxError("expected (ge ...) or (match r)", _pos(c))


def _compose(n):
    _arity(n, 2, "compose")
    return A.Compose(_gate(n.items[1]), _gate(n.items[2]))


_GATES = {
    "const": _const, "lin": _lin, "poly": _poly, "sum": _many(A.Sum, "sum"),
    "prod": _many(A.Prod, "prod"), "switch": _switch, "cluster": _cluster,
    "lookup": _lookup, "tuple": _tuple, "proj": _proj, "sql": _sql, "compose": _compose,
}


# ---------------------------------------------------------------------------
# printing


def _fmt(v: float) -> str:
    return repr(float(v))


def _fvec(v, head="vec") -> str:
    return "(" + " ".join([head] + [_fmt(a) for a in v]) + ")"


def unparse(g) -> str:
    """Gate tree -> program text that parses back to an equal tree."""
    if isinstance(g, A.Const):
        return f"(const {_fvec(g.value) if isinstance(g.value, tuple) else _fmt(g.value)})"
    if isinstance(g, A.Lin):
        return f"(lin {_fvec(g.beta)} {_fmt(g.offset)})"
    if isinstance(g, A.Poly):
        return f"(poly ({' '.join(_fmt(c) for c in g.coeffs)}) {unparse(g.child)})"
    if isinstance(g, (A.Sum, A.Prod, A.TupleGate)):
        name = {A.Sum: "sum", A.Prod: "prod", A.TupleGate: "tuple"}[type(g)]
        return f"({name} " + " ".join(unparse(c) for c in g.children) + ")"
    if isinstance(g, A.Switch):
        return (f"(switch {_fvec(g.beta, 'dir')} {_fmt(g.alpha)} {_fmt(g.gamma)} "
                f"{unparse(g.left)} {unparse(g.right)})")
    if isinstance(g, A.Cluster):
        arms = " ".join(f"(at {_fvec(c)} {unparse(ch)})" for c, ch in zip(g.centers, g.children))
        return f"(cluster {_fmt(g.r)} {arms})"
    if isinstance(g, A.Lookup):
        ents = " ".join(f"(entry {_fvec(k)} {_fvec(v) if isinstance(v, tuple) else _fmt(v)})"
                        for k, v in zip(g.keys, g.values))
        return f"(lookup (r {_fmt(g.r)}) {ents})"
    if isinstance(g, A.Proj):
        return f"(proj {g.index} {unparse(g.child)})"
    if isinstance(g, A.Sql):
        parts = ["(rows " + " ".join(_fvec(r) for r in g.rows) + ")",
                 "(values " + " ".join(_fmt(v) for v in g.values) + ")"]
        if g.keys:
            parts.append("(keys " + " ".join(_fvec(k) for k in g.keys) + ")")
        clauses = []
        for w in g.where:
            if w.kind == "ge":
                clauses.append(f"(ge {w.col} {_fvec(w.beta)} {_fmt(w.offset)} {_fmt(w.gamma)})")
            else:
                clauses.append(f"(match {_fmt(w.r)})")
        parts.append("(where " + " ".join(clauses) + ")")
        return "(sql " + " ".join(parts) + f" {g.agg})"
    if isinstance(g, A.Compose):
        return f"(compose {unparse(g.outer)} {unparse(g.inner)})"
    raise TypeError(f"not a program gate: {type(g).__name__}")


def load_program(path) -> object:
    with open(path) as fh:
        return parse(fh.read())
