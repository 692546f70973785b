"""Point domains, point encodings and canonical test-functional families."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, NamedTuple, Sequence


class SquarePoint(NamedTuple):
    x: Fraction
    y: Fraction


class WordPoint(NamedTuple):
    """The infinite binary sequence ``word`` followed by ``tail`` forever."""

    word: str
    tail: int

    def bit(self, j: int) -> int:
        return int(self.word[j]) if j < len(self.word) else self.tail

    def prefix(self, length: int) -> str:
        if length <= len(self.word):
            return self.word[:length]
        return self.word + str(self.tail) * (length - len(self.word))

    def in_cylinder(self, s: str) -> bool:
        return self.prefix(len(s)) == s


class ProductPoint(NamedTuple):
    """A pair ``(s, i)`` with ``s`` in {-1,1}^n and ``i < n``.

    Bit ``j`` of ``mask`` is 1 exactly when ``s(j) = +1``.
    """

    n: int
    mask: int
    i: int

    def sign(self, j: int) -> int:
        return 1 if (self.mask >> j) & 1 else -1

    def signs(self) -> str:
        return "".join("+" if (self.mask >> j) & 1 else "-" for j in range(self.n))


class DoubledPoint(NamedTuple):
    base: WordPoint
    side: int


class DuplicatePoint(NamedTuple):
    k: int
    level: int


def sq(x: Any, y: Any) -> SquarePoint:
    return SquarePoint(Fraction(x), Fraction(y))


def cantor_point(word: str, tail: int) -> WordPoint:
    """Canonical word-point: trailing copies of the tail bit are absorbed."""
    if tail not in (0, 1):
        raise ValueError("tail bit must be 0 or 1")
    if any(ch not in "01" for ch in word):
        raise ValueError(f"not a binary word: {word!r}")
    return WordPoint(word.rstrip(str(tail)), tail)


def product_point(signs: str | Sequence[int], i: int) -> ProductPoint:
    if isinstance(signs, str):
        vals = [1 if ch == "+" else -1 if ch == "-" else None for ch in signs]
    else:
        vals = list(signs)
    if any(v not in (1, -1) for v in vals):
        raise ValueError(f"bad sign vector {signs!r}")
    n = len(vals)
    if not 0 <= i < n:
        raise ValueError(f"need 0 <= i < n, got i={i}, n={n}")
    mask = sum(1 << j for j, v in enumerate(vals) if v == 1)
    return ProductPoint(n, mask, i)


# ---------------------------------------------------------------------------
# domains

KINDS = ("UnitSquare", "Omega", "CantorWordSpace", "ProductOmegaSigma", "DoubledCantor", "DuplicatePairs")


@dataclass(frozen=True)
class PointDomain:
    id: str
    kind: str
    doubled: frozenset = frozenset()

    def validate(self, p: Any) -> None:
        kind = self.kind
        ok = True
        if kind == "UnitSquare":
            ok = isinstance(p, SquarePoint) and 0 <= p.x <= 1 and 0 <= p.y <= 1
        elif kind == "Omega":
            ok = isinstance(p, int) and not isinstance(p, bool) and p >= 0
        elif kind == "CantorWordSpace":
            ok = isinstance(p, WordPoint) and cantor_point(p.word, p.tail) == p
        elif kind == "ProductOmegaSigma":
            ok = isinstance(p, ProductPoint) and p.n >= 1 and 0 <= p.i < p.n and 0 <= p.mask < (1 << p.n)
        elif kind == "DoubledCantor":
            ok = (isinstance(p, DoubledPoint) and cantor_point(p.base.word, p.base.tail) == p.base
                  and (p.side == 0 or (p.side == 1 and p.base in self.doubled)))
        elif kind == "DuplicatePairs":
            ok = isinstance(p, DuplicatePoint) and p.k >= 0 and p.level in (0, 1)
        if not ok:
            raise ValueError(f"{p!r} is not a point of {self.id}")

    def encode(self, p: Any) -> Any:
        return encode_point(self.kind, p)

    def decode(self, data: Any) -> Any:
        return decode_point(self.kind, data)

    def collapse(self, p: DoubledPoint) -> WordPoint:
        if self.kind != "DoubledCantor":
            raise TypeError("collapse is defined on the doubled Cantor space only")
        return p.base

    def fiber(self, x: WordPoint) -> list[DoubledPoint]:
        if x in self.doubled:
            return [DoubledPoint(x, 0), DoubledPoint(x, 1)]
        return [DoubledPoint(x, 0)]


UNIT_SQUARE = PointDomain("unit_square", "UnitSquare")
OMEGA = PointDomain("omega", "Omega")
CANTOR = PointDomain("cantor", "CantorWordSpace")
PRODUCT = PointDomain("product_omega_sigma", "ProductOmegaSigma")
DUPLICATE = PointDomain("duplicate_pairs", "DuplicatePairs")


def doubled_cantor(doubled: Iterable[WordPoint]) -> PointDomain:
    return PointDomain("doubled_cantor", "DoubledCantor", frozenset(doubled))


SPACE_KINDS = {
    "unit_square": "UnitSquare",
    "omega": "Omega",
    "cantor": "CantorWordSpace",
    "product_omega_sigma": "ProductOmegaSigma",
    "doubled_cantor": "DoubledCantor",
    "duplicate_pairs": "DuplicatePairs",
}


def domain_for(space_id: str, doubled: Iterable[WordPoint] = ()) -> PointDomain:
    if space_id == "doubled_cantor":
        return doubled_cantor(doubled)
    for d in (UNIT_SQUARE, OMEGA, CANTOR, PRODUCT, DUPLICATE):
        if d.id == space_id:
            return d
    raise KeyError(f"unknown space {space_id!r}")


def encode_point(kind: str, p: Any) -> Any:
    if kind == "UnitSquare":
        return [str(p.x), str(p.y)]
    if kind == "Omega":
        return p
    if kind == "CantorWordSpace":
        return [p.word, p.tail]
    if kind == "ProductOmegaSigma":
        return [p.signs(), p.i]
    if kind == "DoubledCantor":
        return [p.base.word, p.base.tail, p.side]
    if kind == "DuplicatePairs":
        return [p.k, p.level]
    raise KeyError(kind)


def decode_point(kind: str, data: Any) -> Any:
    if kind == "UnitSquare":
        return sq(Fraction(data[0]), Fraction(data[1]))
    if kind == "Omega":
        return int(data)
    if kind == "CantorWordSpace":
        return cantor_point(data[0], int(data[1]))
    if kind == "ProductOmegaSigma":
        return product_point(data[0], int(data[1]))
    if kind == "DoubledCantor":
        return DoubledPoint(cantor_point(data[0], int(data[1])), int(data[2]))
    if kind == "DuplicatePairs":
        return DuplicatePoint(int(data[0]), int(data[1]))
    raise KeyError(kind)


def sort_key(p: Any) -> Any:
    """Canonical total order on points of any kind (lexicographic per kind)."""
    if isinstance(p, WordPoint):
        return (p.word, p.tail)
    if isinstance(p, DoubledPoint):
        return (p.base.word, p.base.tail, p.side)
    return p


# ---------------------------------------------------------------------------
# test functionals


@dataclass(frozen=True)
class TestFunctional:
    """A named exact rational functional on points.

    ``lipschitz_scale`` rescales the function to be 1-Lipschitz (unit square
    only); ``sup_bound`` bounds ``|f|`` everywhere; ``rect`` carries a
    product rectangle ``(cylinder, B)`` so closed-form evaluation is possible.
    """

    __test__ = False

    name: str
    func: Callable[[Any], Any] = field(compare=False)
    sup_bound: Fraction = Fraction(1)
    lipschitz_scale: Fraction | None = None
    rect: tuple | None = field(default=None, compare=False)

    def __call__(self, p: Any) -> Any:
        return self.func(p)


@dataclass(frozen=True)
class TestFamily:
    __test__ = False

    name: str
    functionals: tuple[TestFunctional, ...]

    def __iter__(self):
        return iter(self.functionals)

    def __len__(self) -> int:
        return len(self.functionals)

    def names(self) -> list[str]:
        return [f.name for f in self.functionals]


def indicator(name: str, pred: Callable[[Any], bool], rect: tuple | None = None) -> TestFunctional:
    return TestFunctional(name, lambda p, _pred=pred: 1 if _pred(p) else 0, Fraction(1), None, rect)


def monomial(a: int, b: int) -> TestFunctional:
    scale = Fraction(1, a + b) if a + b else Fraction(1)
    return TestFunctional(f"x^{a}y^{b}", lambda p: p.x ** a * p.y ** b, Fraction(1), scale)


def tent(cx: Fraction, cy: Fraction, radius: Fraction = Fraction(1, 4)) -> TestFunctional:
    """Piecewise-linear bump ``max(0, 1 - (|x-cx|+|y-cy|)/radius)``."""

    def f(p: SquarePoint) -> Fraction:
        d = abs(p.x - cx) + abs(p.y - cy)
        return max(Fraction(0), 1 - d / radius)

    return TestFunctional(f"tent({cx},{cy})", f, Fraction(1), radius)


def square_family() -> TestFamily:
    fs = [monomial(a, t - a) for t in range(4) for a in range(t, -1, -1)]
    half = Fraction(1, 2)
    for c in ((Fraction(0), Fraction(0)), (half, Fraction(0)), (Fraction(1), Fraction(0)), (half, half)):
        fs.append(tent(*c))
    return TestFamily("square", tuple(fs))


def cylinder_family(depth: int = 3) -> TestFamily:
    fs = []
    for length in range(depth + 1):
        for k in range(1 << length):
            s = format(k, f"0{length}b") if length else ""
            fs.append(indicator(f"[{s}]", lambda p, _s=s: p.in_cylinder(_s)))
    return TestFamily(f"cylinders{depth}", tuple(fs))


def doubled_family(depth: int = 3, extra: Sequence[TestFunctional] = ()) -> TestFamily:
    """Lifted cylinders plus any user predicates (asserted clopen, not checked)."""
    fs = []
    for length in range(depth + 1):
        for k in range(1 << length):
            s = format(k, f"0{length}b") if length else ""
            fs.append(indicator(f"lift[{s}]", lambda p, _s=s: p.base.in_cylinder(_s)))
    return TestFamily(f"doubled{depth}", tuple(fs) + tuple(extra))


def duplicate_family() -> TestFamily:
    fs = [
        indicator("{0..3}x{0,1}", lambda p: p.k <= 3),
        indicator("{(k,1):k<=2}", lambda p: p.k <= 2 and p.level == 1),
        indicator("{(k,1):k in F}u{(k,0):k in G}", lambda p: (p.level == 1 and p.k in (0, 1, 2))
                  or (p.level == 0 and p.k in (5, 6))),
        indicator("evens x {0,1}", lambda p: p.k % 2 == 0),
    ]
    return TestFamily("duplicate", tuple(fs))


def rect_predicate(cyl: dict[int, int] | None, b: Callable[[int, int], bool]) -> Callable[[ProductPoint], bool]:
    def pred(p: ProductPoint) -> bool:
        if cyl is not None:
            for j, sigma in cyl.items():
                if j >= p.n or p.sign(j) != sigma:
                    return False
        return b(p.i, p.n)

    return pred


B_ALL = ("all", lambda i, n: True)
B_EVEN = ("even", lambda i, n: i % 2 == 0)
B_SMALL = ("i<3", lambda i, n: i < 3)


def product_family() -> TestFamily:
    """Rectangles [A]x[B] with A a sign cylinder (or everything) and B a fixed set."""
    fs = []
    for cname, cyl in (("s(0)=+1", {0: 1}), ("s(0)=+1,s(1)=-1", {0: 1, 1: -1}), ("all", None),
                       ("s(1)=-1", {1: -1})):
        for bname, b in (B_ALL, B_EVEN, B_SMALL):
            fs.append(indicator(f"[{cname}]x[{bname}]", rect_predicate(cyl, b), rect=(cyl, b)))
    return TestFamily("cylinders", tuple(fs))


def omega_family() -> TestFamily:
    from .algebras import SchachermayerSet, membership

    descs = [
        ("pairs all", SchachermayerSet(lambda k: True)),
        ("pairs mod 3", SchachermayerSet(lambda k: k % 3 == 0)),
        ("{0}", SchachermayerSet(frozenset(), frozenset({0}))),
        ("{0..5} u {7}", SchachermayerSet(frozenset({0, 1, 2}), frozenset({7}))),
        ("pairs k>=4 minus 9", SchachermayerSet(lambda k: k >= 4, frozenset({9}))),
    ]
    fs = [indicator(name, lambda p, _d=d: membership(_d, p)) for name, d in descs]
    return TestFamily("schachermayer", tuple(fs))


def canonical_family(space_id: str, depth: int = 3) -> TestFamily:
    if space_id == "unit_square":
        return square_family()
    if space_id == "omega":
        return omega_family()
    if space_id == "cantor":
        return cylinder_family(depth)
    if space_id == "product_omega_sigma":
        return product_family()
    if space_id == "doubled_cantor":
        return doubled_family(depth)
    if space_id == "duplicate_pairs":
        return duplicate_family()
    raise KeyError(space_id)


FAMILY_NAMES = {
    "square": square_family,
    "schachermayer": omega_family,
    "cylinders": None,
    "duplicate": duplicate_family,
}


def family_by_name(name: str, space_id: str) -> TestFamily:
    if name in ("canonical", "default"):
        return canonical_family(space_id)
    if name == "cylinders":
        return product_family() if space_id == "product_omega_sigma" else (
            doubled_family() if space_id == "doubled_cantor" else cylinder_family())
    if name in FAMILY_NAMES and FAMILY_NAMES[name] is not None:
        return FAMILY_NAMES[name]()
    raise KeyError(f"unknown test family {name!r}")
