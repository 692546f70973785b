"""Exact finitely supported weak* null sequences of signed measures."""
from .measure import FiniteSignedMeasure, jordan_split, evaluate, combine, restrict, norm
from .handles import LimitOracle, PointLimit, SequenceHandle
from .spaces import TestFamily, TestFunctional, canonical_family, family_by_name

__version__ = "0.1.0"

__all__ = [
    "FiniteSignedMeasure", "jordan_split", "evaluate", "combine", "restrict", "norm",
    "LimitOracle", "PointLimit", "SequenceHandle",
    "TestFamily", "TestFunctional", "canonical_family", "family_by_name",
]
