"""Exact finitely supported signed measures.

A measure is a finite map from points to nonzero rational coefficients,
``mu = sum_x a_x * delta_x``.  All arithmetic uses :class:`fractions.Fraction`
so identities between norms and functional values can be checked exactly.

Cylinder measures on the Cantor space live here too; they are non-atomic and
are described by an evaluation rule on finite binary words instead of atoms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping

Point = Hashable


class SpaceMismatchError(ValueError):
    pass


class EvaluationError(ValueError):
    """A test functional could not be evaluated exactly at a support point."""


def as_fraction(value: Any) -> Fraction:
    """Coerce an exact rational (int, bool, Fraction, "p/q" string) to Fraction.

    Floats are rejected: they would silently break exactness.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        return Fraction(int(value))
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"expected an exact rational, got {type(value).__name__}: {value!r}")


class FiniteSignedMeasure:
    """An immutable atomic signed measure with exact rational coefficients.

    Zero coefficients are dropped on construction, so ``support()`` is
    canonical.  Points must be hashable and structurally comparable.
    """

    __slots__ = ("space", "_atoms", "_norm")

    def __init__(self, space: str, atoms: Mapping[Point, Any] | Iterable[tuple[Point, Any]] = ()):
        items = atoms.items() if isinstance(atoms, Mapping) else atoms
        clean: dict[Point, Fraction] = {}
        for point, coef in items:
            c = as_fraction(coef)
            if c:
                clean[point] = c
        self.space = space
        self._atoms = clean
        self._norm: Fraction | None = None

    @classmethod
    def _trusted(cls, space: str, atoms: dict[Point, Fraction]) -> "FiniteSignedMeasure":
        # caller guarantees Fraction values and no zeros
        m = cls.__new__(cls)
        m.space = space
        m._atoms = atoms
        m._norm = None
        return m

    @classmethod
    def dirac(cls, space: str, point: Point, coef: Any = 1) -> "FiniteSignedMeasure":
        return cls(space, {point: coef})

    @classmethod
    def empty(cls, space: str) -> "FiniteSignedMeasure":
        return cls._trusted(space, {})

    @property
    def atoms(self) -> Mapping[Point, Fraction]:
        return self._atoms

    def support(self) -> frozenset:
        return frozenset(self._atoms)

    def __len__(self) -> int:
        return len(self._atoms)

    def __iter__(self) -> Iterator[Point]:
        return iter(self._atoms)

    def __contains__(self, point: Point) -> bool:
        return point in self._atoms

    def __getitem__(self, point: Point) -> Fraction:
        """Mass of the singleton {point}; zero off the support."""
        return self._atoms.get(point, Fraction(0))

    def items(self):
        return self._atoms.items()

    def norm(self) -> Fraction:
        if self._norm is None:
            self._norm = sum((abs(c) for c in self._atoms.values()), Fraction(0))
        return self._norm

    def total_mass(self) -> Fraction:
        return sum(self._atoms.values(), Fraction(0))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FiniteSignedMeasure):
            return NotImplemented
        return self.space == other.space and self._atoms == other._atoms

    def __hash__(self) -> int:
        return hash((self.space, frozenset(self._atoms.items())))

    def __repr__(self) -> str:
        if not self._atoms:
            return f"FiniteSignedMeasure({self.space!r}, empty)"
        terms = " ".join(f"{'+' if c > 0 else '-'}{abs(c)}*d{p}" for p, c in list(self._atoms.items())[:6])
        more = " ..." if len(self._atoms) > 6 else ""
        return f"FiniteSignedMeasure({self.space!r}, {terms}{more})"

    def scale(self, factor: Any) -> "FiniteSignedMeasure":
        f = as_fraction(factor)
        if not f:
            return FiniteSignedMeasure.empty(self.space)
        return FiniteSignedMeasure._trusted(self.space, {p: c * f for p, c in self._atoms.items()})

    def __mul__(self, factor: Any) -> "FiniteSignedMeasure":
        return self.scale(factor)

    __rmul__ = __mul__

    def __truediv__(self, divisor: Any) -> "FiniteSignedMeasure":
        return self.scale(1 / as_fraction(divisor))

    def __neg__(self) -> "FiniteSignedMeasure":
        return self.scale(-1)

    def __add__(self, other: "FiniteSignedMeasure") -> "FiniteSignedMeasure":
        return combine(self, other, 1, 1)

    def __sub__(self, other: "FiniteSignedMeasure") -> "FiniteSignedMeasure":
        return combine(self, other, 1, -1)

    def restrict(self, keep: Callable[[Point], bool]) -> "FiniteSignedMeasure":
        return FiniteSignedMeasure._trusted(self.space, {p: c for p, c in self._atoms.items() if keep(p)})

    def without(self, points: Iterable[Point] | frozenset | set) -> "FiniteSignedMeasure":
        drop = points if isinstance(points, (set, frozenset)) else set(points)
        return FiniteSignedMeasure._trusted(self.space, {p: c for p, c in self._atoms.items() if p not in drop})

    def mass_on(self, points: set | frozenset) -> Fraction:
        """Norm of the restriction to ``points`` without building it."""
        return sum((abs(c) for p, c in self._atoms.items() if p in points), Fraction(0))

    def sorted_items(self, key: Callable[[Point], Any] | None = None) -> list[tuple[Point, Fraction]]:
        return sorted(self._atoms.items(), key=(lambda pc: key(pc[0])) if key else (lambda pc: pc[0]))


@dataclass(frozen=True)
class JordanSplit:
    positive: FiniteSignedMeasure
    negative: FiniteSignedMeasure


def norm(m: FiniteSignedMeasure) -> Fraction:
    return m.norm()


def jordan_split(m: FiniteSignedMeasure) -> JordanSplit:
    pos = {p: c for p, c in m.items() if c > 0}
    neg = {p: c for p, c in m.items() if c < 0}
    return JordanSplit(FiniteSignedMeasure._trusted(m.space, pos), FiniteSignedMeasure._trusted(m.space, neg))


def restrict(m: FiniteSignedMeasure, keep: Callable[[Point], bool]) -> FiniteSignedMeasure:
    return m.restrict(keep)


def combine(a: FiniteSignedMeasure, b: FiniteSignedMeasure, ca: Any = 1, cb: Any = 1) -> FiniteSignedMeasure:
    """Return ``ca*a + cb*b`` with cancelled atoms dropped."""
    if a.space != b.space:
        raise SpaceMismatchError(f"cannot combine measures on {a.space!r} and {b.space!r}")
    fa, fb = as_fraction(ca), as_fraction(cb)
    out: dict[Point, Fraction] = {}
    if fa:
        for p, c in a.items():
            out[p] = c * fa
    if fb:
        for p, c in b.items():
            v = out.get(p, 0) + c * fb
            if v:
                out[p] = v
            else:
                out.pop(p, None)
    return FiniteSignedMeasure._trusted(a.space, out)


def _functional_value(f: Callable[[Point], Any], point: Point) -> Fraction:
    try:
        v = f(point)
    except Exception as exc:  # noqa: BLE001 - re-raised with context
        raise EvaluationError(f"functional not evaluable at {point!r}: {exc}") from exc
    try:
        return as_fraction(v)
    except (TypeError, ValueError) as exc:
        raise EvaluationError(f"functional returned non-rational value {v!r} at {point!r}") from exc


def evaluate(m: FiniteSignedMeasure, f: Callable[[Point], Any]) -> Fraction:
    """Exact integral ``sum_x a_x f(x)`` of a rational-valued functional.

    Indicator predicates (returning bool) give the measure of the set.
    """
    total = Fraction(0)
    for p, c in m.items():
        v = _functional_value(f, p)
        if v:
            total += c * v
    return total


# ---------------------------------------------------------------------------
# cylinder measures on 2^omega


@dataclass(frozen=True)
class CylinderMeasure:
    """A signed measure on the Cantor space given by its values on cylinders.

    ``rule(s)`` returns the exact value on the cylinder ``[s]`` for a binary
    word ``s`` (a string over "01").  The norm cannot be computed from finitely
    many cylinders, so it is declared and cross-checked from below.
    """

    rule: Callable[[str], Fraction]
    declared_norm: Fraction
    name: str = "cylinder"
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, word: str) -> Fraction:
        return self.rule(word)


def cylinder_eval(c: CylinderMeasure, word: str) -> Fraction:
    if any(ch not in "01" for ch in word):
        raise ValueError(f"not a binary word: {word!r}")
    return as_fraction(c.rule(word))


def _words(length: int) -> Iterator[str]:
    if length == 0:
        yield ""
        return
    for k in range(1 << length):
        yield format(k, f"0{length}b")


def check_additivity(c: CylinderMeasure, depth: int) -> list[str]:
    """Words ``s`` with ``|s| < depth`` where ``c[s] != c[s0] + c[s1]``."""
    bad = []
    for length in range(depth):
        for s in _words(length):
            if cylinder_eval(c, s) != cylinder_eval(c, s + "0") + cylinder_eval(c, s + "1"):
                bad.append(s)
    return bad


def partition_norms(c: CylinderMeasure, depth: int) -> list[Fraction]:
    """``sum_{s in 2^k} |c[s]|`` for k = 0..depth; lower bounds for the norm."""
    return [sum((abs(cylinder_eval(c, s)) for s in _words(k)), Fraction(0)) for k in range(depth + 1)]


def check_declared_norm(c: CylinderMeasure, depth: int) -> bool:
    """Partition sums must be nondecreasing in depth and never exceed the declared norm."""
    sums = partition_norms(c, depth)
    monotone = all(a <= b for a, b in zip(sums, sums[1:]))
    return monotone and all(s <= c.declared_norm for s in sums)
