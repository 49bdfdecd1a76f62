"""Exact orbit computations for triple flag varieties of O(2n+1) over small fields."""
from .classifier import TripleType, Verdict, equality_catalogue, flag_dim, is_finite_type
from .exact_linalg import BudgetExceeded, Field, Mat, Subspace
from .invariants import InvariantTuple, PairShape, compute_b, enumerate_tuples
from .canonical import canonicalize, representative
from .split_form import FlagType, IsotropicFlag, OrthElement

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded", "Field", "FlagType", "InvariantTuple", "IsotropicFlag", "Mat",
    "OrthElement", "PairShape", "Subspace", "TripleType", "Verdict", "canonicalize",
    "compute_b", "enumerate_tuples", "equality_catalogue", "flag_dim", "is_finite_type",
    "representative",
]
