"""Generalized decision programs: syntax, exact semantics, lowering and certificates."""
from .ast import (Cluster, Compose, Const, Lin, Lookup, Poly, Prod, Proj, Sql, Sum, Switch,
                  TupleGate, Where, depth, hash_dim, hash_key)
from .certify import BoundCertificate, certify, lowered_bound
from .evaluate import evaluate, evaluate_many
from .lower import Lowered, lower
from .parser import parse, unparse

__all__ = ["Cluster", "Compose", "Const", "Lin", "Lookup", "Poly", "Prod", "Proj", "Sql", "Sum",
           "Switch", "TupleGate", "Where", "depth", "hash_dim", "hash_key", "BoundCertificate",
           "certify", "lowered_bound", "evaluate", "evaluate_many", "Lowered", "lower", "parse",
           "unparse"]
