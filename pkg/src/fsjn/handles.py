"""Sequence handles: lazily indexed measure sequences with exact limit oracles."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator

from .enumeration import LazySequence
from .measure import FiniteSignedMeasure, evaluate
from .spaces import PointDomain, TestFunctional, domain_for


@dataclass(frozen=True)
class PointLimit:
    """Exact asymptotics of ``mu_n({x})``.

    ``limit`` is None when the limit does not exist; ``liminf``/``limsup``
    refer to ``|mu_n({x})|``.  ``settle(eps)`` returns an index from which on
    ``|mu_n({x}) - limit| < eps``; it is None when unknown.
    """

    limit: Fraction | None
    liminf: Fraction
    limsup: Fraction
    settle: Callable[[Fraction], int] | None = None

    @property
    def has_limit(self) -> bool:
        return self.limit is not None


def constant_after(value: Fraction, n0: int) -> PointLimit:
    """Coefficient equals ``value`` for every ``n >= n0``."""
    v = Fraction(value)
    return PointLimit(v, abs(v), abs(v), lambda eps, _n=n0: _n)


ZERO_NOW = constant_after(Fraction(0), 0)


def zero_after(n0: int) -> PointLimit:
    return constant_after(Fraction(0), n0)


def decaying_to_zero(settle: Callable[[Fraction], int]) -> PointLimit:
    return PointLimit(Fraction(0), Fraction(0), Fraction(0), settle)


def oscillating(liminf: Fraction, limsup: Fraction) -> PointLimit:
    return PointLimit(None, Fraction(liminf), Fraction(limsup), None)


@dataclass(frozen=True)
class Progression:
    """The subsequence ``start, start+step, ...`` together with its own oracle."""

    start: int
    step: int
    oracle: "LimitOracle"
    label: str = ""


@dataclass(frozen=True)
class LimitOracle:
    """Exact per-point limits plus sequence-level facts derived from the formulas.

    ``l_norm_limit`` is the limit of ``||mu_n restricted to L||``.
    ``l_groups(g)`` lists the points of ``L`` in group ``g`` (groups exhaust
    ``L``; None once exhausted) and ``l_tail(g)`` is the exact sum of limit
    magnitudes over all groups after ``g``.  Together they certify the sum of
    limits over ``L`` independently of ``l_mass``.
    """

    point: Callable[[Any], PointLimit]
    l_norm_limit: Fraction | None = None
    progressions: tuple[Progression, ...] = ()
    identically_zero: bool = False
    l_mass: Fraction | None = None
    l_groups: Callable[[int], list | None] | None = None
    l_tail: Callable[[int], Fraction] | None = None
    basis: str = "formula"

    def limit(self, x: Any) -> Fraction | None:
        return self.point(x).limit

    def in_L(self, x: Any) -> bool:
        lim = self.point(x).limit
        return lim is not None and lim != 0

    def l_enumeration(self, count: int) -> list | None:
        """The first ``count`` points of L by group order, or None if not enumerable."""
        if self.identically_zero:
            return []
        if self.l_groups is None:
            return None
        out: list = []
        g = 0
        while len(out) < count:
            grp = self.l_groups(g)
            if grp is None:
                break
            out.extend(grp)
            g += 1
        return out[:count]


def zero_oracle(settle_of: Callable[[Any], Callable[[Fraction], int] | int] | None = None,
                basis: str = "formula") -> LimitOracle:
    """Oracle for sequences whose coefficient at every point tends to 0."""

    def point(x: Any) -> PointLimit:
        if settle_of is None:
            return PointLimit(Fraction(0), Fraction(0), Fraction(0), None)
        s = settle_of(x)
        if isinstance(s, int):
            return zero_after(s)
        return decaying_to_zero(s)

    return LimitOracle(point, l_norm_limit=Fraction(0), identically_zero=True,
                       l_mass=Fraction(0), l_groups=lambda g: None, l_tail=lambda g: Fraction(0),
                       basis=basis)


class SequenceHandle:
    """A lazily evaluated sequence of finitely supported measures.

    ``at(n)`` is memoized.  ``rect_evaluator(n, cylinder, B)`` is an optional
    closed-form evaluator for product rectangles which keeps working past the
    materialization cap.  ``balance_envelope(n)`` is an exact bound on the
    deviation of the positive part's mass from 1/2, when known.
    """

    def __init__(self, space: str, func: Callable[[int], FiniteSignedMeasure], *, name: str,
                 params: dict | None = None, oracle: LimitOracle | None = None,
                 index_origin: int = 0, length: int | None = None, cap: int | None = None,
                 provenance: list | None = None, pre_normalization: bool = False,
                 balance_envelope: Callable[[int], Fraction] | None = None,
                 rect_evaluator: Callable | None = None,
                 support_size: Callable[[int], int] | None = None,
                 disjoint_supports: bool = False, domain: PointDomain | None = None,
                 aux: dict | None = None, flags: dict | None = None):
        self.space = space
        self.domain = domain or domain_for(space)
        self.name = name
        self.params = dict(params or {})
        self.oracle = oracle
        self.index_origin = index_origin
        self.provenance = list(provenance or [])
        self.pre_normalization = pre_normalization
        self.balance_envelope = balance_envelope
        self.rect_evaluator = rect_evaluator
        self._support_size = support_size
        self.disjoint_supports = disjoint_supports
        self.aux = dict(aux or {})
        self.flags = dict(flags or {})
        self._seq = LazySequence(func, index_origin, length, cap)

    @property
    def cap(self) -> int | None:
        return self._seq.cap

    @property
    def length(self) -> int | None:
        return self._seq.length

    def at(self, n: int) -> FiniteSignedMeasure:
        return self._seq.at(n)

    def __call__(self, n: int) -> FiniteSignedMeasure:
        return self._seq.at(n)

    def valid(self, n: int) -> bool:
        return self._seq.valid(n)

    def materializable(self, n: int) -> bool:
        return self.valid(n) and (self.cap is None or n <= self.cap)

    def indices(self, horizon: int) -> range:
        return self._seq.indices(horizon)

    def materialized_indices(self, horizon: int) -> list[int]:
        return [n for n in self.indices(horizon) if self.materializable(n)]

    def measures(self, horizon: int) -> Iterator[tuple[int, FiniteSignedMeasure]]:
        for n in self.indices(horizon):
            yield n, self.at(n)

    def support_size(self, n: int) -> int:
        if self._support_size is not None:
            return self._support_size(n)
        return len(self.at(n))

    def evaluate(self, n: int, f: TestFunctional | Callable) -> Fraction:
        """``mu_n(f)``; rectangles use the closed-form evaluator when available."""
        rect = getattr(f, "rect", None)
        if rect is not None and self.rect_evaluator is not None:
            return self.rect_evaluator(n, rect[0], rect[1])
        return evaluate(self.at(n), f)

    def with_provenance(self, step: dict) -> list:
        return self.provenance + [step]

    def __repr__(self) -> str:
        return f"SequenceHandle({self.name!r}, space={self.space!r}, origin={self.index_origin})"


def subsequence_settle(parent_settle: Callable[[Fraction], int] | None,
                       first_at_least: Callable[[int], int]) -> Callable[[Fraction], int] | None:
    if parent_settle is None:
        return None
    return lambda eps: first_at_least(parent_settle(eps))


def union_supports(measures: Iterable[FiniteSignedMeasure]) -> list:
    """Points of the given measures in order of first appearance."""
    from .spaces import sort_key

    seen: dict = {}
    for m in measures:
        for p in sorted(m.atoms, key=sort_key):
            if p not in seen:
                seen[p] = None
    return list(seen)
