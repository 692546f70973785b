"""Constructors for the explicit measure sequences, each with an exact limit oracle."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Any, Callable

from .enumeration import LazySequence, rational_at, rational_index, van_der_corput_word
from .handles import (
    ZERO_NOW,
    LimitOracle,
    PointLimit,
    Progression,
    SequenceHandle,
    constant_after,
    decaying_to_zero,
    oscillating,
    zero_after,
    zero_oracle,
)
from .measure import CylinderMeasure, FiniteSignedMeasure, as_fraction
from .spaces import (
    CANTOR,
    DoubledPoint,
    DuplicatePoint,
    PointDomain,
    ProductPoint,
    SquarePoint,
    WordPoint,
    cantor_point,
    doubled_cantor,
    sq,
)


class GeneratorError(ValueError):
    """Invalid generator parameters."""


HALF = Fraction(1, 2)
QUARTER = Fraction(1, 4)
EIGHTH = Fraction(1, 8)


def _least_power_below(eps: Fraction, offset: int = 1) -> int:
    """Least ``n >= 0`` with ``1/2^(n+offset) < eps``."""
    n = 0
    while Fraction(1, 2 ** (n + offset)) >= eps:
        n += 1
    return n


def _v(base: int, k: int) -> int:
    """Exponent of ``base`` in ``k`` (k >= 1)."""
    e = 0
    while k % base == 0:
        k //= base
        e += 1
    return e


# ---------------------------------------------------------------------------
# convergent pairs


def conv_pair(xs: Callable[[int], Any], x: Any, space: str = "unit_square", *,
              index_of: Callable[[Any], int | None] | None = None, check_horizon: int = 256,
              name: str = "conv-pair", params: dict | None = None) -> SequenceHandle:
    """``mu_n = 1/2 (delta_{xs(n)} - delta_x)``."""
    seen: dict = {}
    injective = True
    for n in range(check_horizon):
        p = xs(n)
        if p == x:
            raise GeneratorError(f"xs({n}) coincides with the limit point {x!r}")
        if p in seen:
            injective = False
        seen.setdefault(p, n)

    def at(n: int) -> FiniteSignedMeasure:
        p = xs(n)
        if p == x:
            raise GeneratorError(f"xs({n}) coincides with the limit point {x!r}")
        return FiniteSignedMeasure._trusted(space, {p: HALF, x: -HALF})

    def point(y: Any) -> PointLimit:
        if y == x:
            return constant_after(-HALF, 0)
        m = index_of(y) if index_of is not None else seen.get(y)
        if m is None:
            return ZERO_NOW if index_of is not None else PointLimit(Fraction(0), Fraction(0), Fraction(0), None)
        return zero_after(m + 1)

    oracle = None
    if injective:
        oracle = LimitOracle(point, l_norm_limit=HALF, l_mass=HALF,
                             l_groups=lambda g: [x] if g == 0 else None,
                             l_tail=lambda g: Fraction(0))
    return SequenceHandle(space, at, name=name, params=params or {}, oracle=oracle,
                          balance_envelope=lambda n: Fraction(0))


def square_conv_pair() -> SequenceHandle:
    """The default pair ``(0, 1/(n+1)) -> (0, 0)`` on the unit square."""

    def index_of(p: SquarePoint) -> int | None:
        if p.x == 0 and p.y > 0 and p.y.numerator == 1:
            return p.y.denominator - 1
        return None

    return conv_pair(lambda n: sq(0, Fraction(1, n + 1)), sq(0, 0), "unit_square", index_of=index_of)


# ---------------------------------------------------------------------------
# the four sequences on the unit square


def square1() -> SequenceHandle:
    zero, half, one = Fraction(0), HALF, Fraction(1)
    origin, mid, right = sq(0, 0), sq(half, 0), sq(one, 0)

    def at(n: int) -> FiniteSignedMeasure:
        y = Fraction(1, n + 1)
        atoms = {origin: QUARTER, sq(zero, y): -QUARTER}
        if n % 2 == 0:
            atoms[mid] = QUARTER
            atoms[sq(half, y)] = -QUARTER
        else:
            atoms[mid] = EIGHTH
            atoms[sq(half, y)] = -EIGHTH
            atoms[right] = EIGHTH
            atoms[sq(one, y)] = -EIGHTH
        return FiniteSignedMeasure._trusted("unit_square", atoms)

    def moving(p: SquarePoint) -> PointLimit | None:
        if p.y > 0 and p.y.numerator == 1 and p.x in (zero, half, one):
            return zero_after(p.y.denominator)
        return None

    def base_point(p: SquarePoint) -> PointLimit:
        if p == origin:
            return constant_after(QUARTER, 0)
        if p == mid:
            return oscillating(EIGHTH, QUARTER)
        if p == right:
            return oscillating(Fraction(0), EIGHTH)
        return moving(p) or ZERO_NOW

    def even_point(p: SquarePoint) -> PointLimit:
        if p in (origin, mid):
            return constant_after(QUARTER, 0)
        return moving(p) or ZERO_NOW

    def odd_point(p: SquarePoint) -> PointLimit:
        if p == origin:
            return constant_after(QUARTER, 0)
        if p in (mid, right):
            return constant_after(EIGHTH, 0)
        return moving(p) or ZERO_NOW

    even = LimitOracle(even_point, l_norm_limit=HALF, l_mass=HALF,
                       l_groups=lambda g: [[origin], [mid]][g] if g < 2 else None,
                       l_tail=lambda g: QUARTER if g == 0 else Fraction(0))
    odd = LimitOracle(odd_point, l_norm_limit=HALF, l_mass=HALF,
                      l_groups=lambda g: [[origin], [mid, right]][g] if g < 2 else None,
                      l_tail=lambda g: QUARTER if g == 0 else Fraction(0))
    oracle = LimitOracle(base_point, l_norm_limit=QUARTER, l_mass=QUARTER,
                         progressions=(Progression(0, 2, even, "even"), Progression(1, 2, odd, "odd")),
                         l_groups=lambda g: [origin] if g == 0 else None,
                         l_tail=lambda g: Fraction(0))
    return SequenceHandle("unit_square", at, name="square1", params={}, oracle=oracle,
                          balance_envelope=lambda n: Fraction(0))


SQUARE2_PARTITIONS: dict[str, tuple[Callable[[int], int], int, int]] = {
    # block of k, and a progression of k lying in block 0
    "dyadic": (lambda k: _v(2, k + 1), 2, 2),
    "triadic": (lambda k: _v(3, k + 1), 3, 3),
}


def square2(partition: str = "dyadic") -> SequenceHandle:
    """``mu_k = 1/2 (delta_(q_n,0) - delta_(q_n,1/k))`` for ``k`` in block ``n``; indices start at 1."""
    if partition not in SQUARE2_PARTITIONS:
        raise GeneratorError(f"unknown partition {partition!r}; choose from {sorted(SQUARE2_PARTITIONS)}")
    block, prog_start, prog_step = SQUARE2_PARTITIONS[partition]

    def at(k: int) -> FiniteSignedMeasure:
        q = rational_at(block(k))
        return FiniteSignedMeasure._trusted("unit_square", {sq(q, 0): HALF, sq(q, Fraction(1, k)): -HALF})

    def moving(p: SquarePoint) -> PointLimit:
        if p.y.numerator == 1 and block(p.y.denominator) == rational_index(p.x):
            return zero_after(p.y.denominator + 1)
        return ZERO_NOW

    def point(p: SquarePoint) -> PointLimit:
        if p.y == 0:
            return oscillating(Fraction(0), HALF)
        return moving(p)

    anchor = sq(rational_at(0), 0)

    def prog_point(p: SquarePoint) -> PointLimit:
        if p == anchor:
            return constant_after(HALF, 0)
        if p.y == 0:
            return ZERO_NOW
        return moving(p)

    prog = LimitOracle(prog_point, l_norm_limit=HALF, l_mass=HALF,
                       l_groups=lambda g: [anchor] if g == 0 else None, l_tail=lambda g: Fraction(0))
    oracle = LimitOracle(point, l_norm_limit=Fraction(0), l_mass=Fraction(0),
                         progressions=(Progression(prog_start, prog_step, prog, "block 0"),),
                         l_groups=lambda g: None, l_tail=lambda g: Fraction(0))
    handle = SequenceHandle("unit_square", at, name="square2", params={"partition": partition},
                            oracle=oracle, index_origin=1, balance_envelope=lambda n: Fraction(0))
    handle.aux["block"] = block
    return handle


def square3(alpha: Any = Fraction(1, 3)) -> SequenceHandle:
    a = as_fraction(alpha)
    if not 0 < a < 1:
        raise GeneratorError(f"alpha must lie in (0,1), got {a}")
    q = rational_at
    zero_at = rational_index(Fraction(0))
    if zero_at <= 2:
        raise GeneratorError("the enumeration must place 0 at an index > 2")
    rest = 1 - a

    def at(n: int) -> FiniteSignedMeasure:
        atoms: dict = {}
        top = Fraction(1, n + 1)
        for k in range(n + 1):
            c = rest / 2 ** (k + 2)
            for p, v in ((sq(q(k), 0), c), (sq(q(k), top), -c)):
                atoms[p] = atoms.get(p, 0) + v
        c = a / 2 + rest / 2 ** (n + 2)
        for p, v in ((sq(0, 1 - Fraction(1, n + 1)), c), (sq(0, 1 - Fraction(1, n + 2)), -c)):
            atoms[p] = atoms.get(p, 0) + v
        return FiniteSignedMeasure("unit_square", atoms)

    def point(p: SquarePoint) -> PointLimit:
        if p.y == 0:
            k = rational_index(p.x)
            settle = max(k, 1) if p.x == 0 else k
            return constant_after(rest / 2 ** (k + 2), settle)
        settle = 0
        if p.y.numerator == 1:
            m = p.y.denominator - 1
            if rational_index(p.x) <= m:
                settle = m + 1
        if p.x == 0 and p.y.numerator + 1 == p.y.denominator:
            settle = max(settle, p.y.numerator + 1)
        return zero_after(settle)

    oracle = LimitOracle(point, l_norm_limit=rest / 2, l_mass=rest / 2,
                         l_groups=lambda g: [sq(q(g), 0)],
                         l_tail=lambda g: rest / 2 ** (g + 2))
    return SequenceHandle("unit_square", at, name="square3", params={"alpha": str(a)}, oracle=oracle,
                          balance_envelope=lambda n: Fraction(0))


def square4_alpha(n: int, k: int) -> Fraction:
    """Coefficient ``alpha_k^n`` in closed form."""
    if k == 0:
        return QUARTER
    j = _v(2, k)
    return Fraction(1, 2 ** (2 * (n - j) + 1))


def square4_alpha_recursive(n: int, k: int) -> Fraction:
    """The same coefficient by the defining recursion."""
    if n == 0:
        return QUARTER
    if k % 2 == 0:
        return square4_alpha_recursive(n - 1, k // 2)
    return Fraction(1, 2 ** (n + 1)) / 2 ** n


def _square4_nu(n: int) -> FiniteSignedMeasure:
    atoms = {}
    den = 2 ** (n + 1)
    for k in range(2 ** n):
        c = square4_alpha(n, k)
        atoms[sq(Fraction(2 * k, den), 0)] = c
        atoms[sq(Fraction(2 * k + 1, den), 0)] = -c
    return FiniteSignedMeasure._trusted("unit_square", atoms)


def square4(cap: int | None = 16) -> SequenceHandle:
    origin = sq(0, 0)

    def at(n: int) -> FiniteSignedMeasure:
        nu = _square4_nu(n)
        atoms = dict(nu.atoms)
        atoms[origin] = atoms[origin] + Fraction(1, 2 ** (n + 1))
        return FiniteSignedMeasure._trusted("unit_square", atoms)

    def point(p: SquarePoint) -> PointLimit:
        if p.y != 0:
            return ZERO_NOW
        if p.x == 0:
            return PointLimit(QUARTER, QUARTER, QUARTER, lambda eps: _least_power_below(eps))
        den = p.x.denominator
        if p.x == 1 or den & (den - 1):
            return ZERO_NOW
        level = den.bit_length() - 1
        return constant_after(Fraction(1, 2 ** (2 * level + 1)), level)

    def groups(g: int) -> list:
        if g == 0:
            return [origin]
        return [sq(Fraction(m, 2 ** g), 0) for m in range(1, 2 ** g, 2)]

    oracle = LimitOracle(point, l_norm_limit=Fraction(1), l_mass=HALF, l_groups=groups,
                         l_tail=lambda g: Fraction(1, 2 ** (g + 2)))
    nu = SequenceHandle("unit_square", _square4_nu, name="square4-aux", params={}, cap=cap,
                        pre_normalization=True)
    return SequenceHandle("unit_square", at, name="square4", params={}, oracle=oracle, cap=cap,
                          balance_envelope=lambda n: Fraction(1, 2 ** (n + 2)),
                          support_size=lambda n: 2 ** (n + 1), aux={"nu": nu})


# ---------------------------------------------------------------------------
# omega and its relatives


def schachermayer_seq() -> SequenceHandle:
    def at(n: int) -> FiniteSignedMeasure:
        return FiniteSignedMeasure._trusted("omega", {2 * n: HALF, 2 * n + 1: -HALF})

    return SequenceHandle("omega", at, name="schachermayer", params={},
                          oracle=zero_oracle(lambda k: k // 2 + 1),
                          balance_envelope=lambda n: Fraction(0), disjoint_supports=True,
                          support_size=lambda n: 2)


def ad_duplicate_seq(index: Callable[[int], int] | None = None,
                     inverse: Callable[[int], int | None] | None = None, *,
                     check_horizon: int = 256) -> SequenceHandle:
    """``mu_n = 1/2 (delta_(k_n,1) - delta_(k_n,0))`` on pairs of the duplicate."""
    if index is None:
        index, inverse = (lambda n: n), (lambda k: k)
    seen: dict[int, int] = {}
    for n in range(check_horizon):
        k = index(n)
        if k in seen:
            raise GeneratorError(f"index repeats: k_{seen[k]} = k_{n} = {k}")
        seen[k] = n

    def at(n: int) -> FiniteSignedMeasure:
        k = index(n)
        return FiniteSignedMeasure._trusted("duplicate_pairs",
                                            {DuplicatePoint(k, 1): HALF, DuplicatePoint(k, 0): -HALF})

    def settle(p: DuplicatePoint) -> int:
        m = inverse(p.k) if inverse is not None else seen.get(p.k)
        return 0 if m is None else m + 1

    return SequenceHandle("duplicate_pairs", at, name="ad-dup", params={}, oracle=zero_oracle(settle),
                          balance_envelope=lambda n: Fraction(0), disjoint_supports=True,
                          support_size=lambda n: 2)


# ---------------------------------------------------------------------------
# the product of Omega and Sigma


def _popcount(x: int) -> int:
    return bin(x).count("1")


def product_rect_closed(n: int, cyl: dict[int, int] | None, b: Callable[[int, int], bool]) -> Fraction:
    """``mu_n([A] x [B])`` for ``A`` the sign cylinder ``cyl`` (None for all of Omega)."""
    if n < 1:
        raise GeneratorError("product indices start at 1")
    if cyl is None:
        return Fraction(0)
    if any(j >= n for j in cyl):
        return Fraction(0)
    total = sum(sigma for i, sigma in cyl.items() if b(i, n))
    return Fraction(total, n * 2 ** len(cyl))


def _cylinder_as_mask(cyl: dict[int, int] | None) -> Callable[[int, int], bool]:
    if cyl is None:
        return lambda mask, n: True
    care = sum(1 << j for j in cyl)
    want = sum(1 << j for j, s in cyl.items() if s == 1)
    return lambda mask, n: all(j < n for j in cyl) and (mask & care) == want


def product_rect_brute(n: int, a: Callable[[int, int], bool], b: Callable[[int, int], bool]) -> Fraction:
    """Exhaustive sum over ``Omega_n x Sigma_n``; ``a(mask, n)`` decides membership of a sign vector."""
    bmask = sum(1 << i for i in range(n) if b(i, n))
    bsize = _popcount(bmask)
    total = 0
    for mask in range(1 << n):
        if a(mask, n):
            total += 2 * _popcount(mask & bmask) - bsize
    return Fraction(total, n * 2 ** n)


class ProductRectEvaluator:
    """Evaluates ``mu_n([A] x [B])``; cylinders use the closed form, cross-checked when small."""

    def __init__(self, brute_cap: int = 14, check: bool = True):
        self.brute_cap = brute_cap
        self.check = check

    def __call__(self, n: int, a: Any, b: Callable[[int, int], bool]) -> Fraction:
        if a is None or isinstance(a, dict):
            value = product_rect_closed(n, a, b)
            if self.check and n <= self.brute_cap:
                brute = product_rect_brute(n, _cylinder_as_mask(a), b)
                if brute != value:
                    raise ArithmeticError(f"closed form {value} disagrees with enumeration {brute} at n={n}")
            return value
        if n > self.brute_cap:
            raise GeneratorError(f"predicate rectangles need n <= {self.brute_cap}, got n={n}")
        return product_rect_brute(n, a, b)


def evaluate_rect(n: int, a: Any, b: Callable[[int, int], bool], *, check: bool = True,
                  brute_cap: int = 14) -> Fraction:
    return ProductRectEvaluator(brute_cap, check)(n, a, b)


def product_seq(cap: int = 18, brute_cap: int = 14) -> SequenceHandle:
    """``mu_n = sum s(i)/(n 2^n) delta_(s,i)`` over ``Omega_n x Sigma_n``; indices start at 1."""

    def at(n: int) -> FiniteSignedMeasure:
        pos = Fraction(1, n * 2 ** n)
        neg = -pos
        atoms = {}
        for mask in range(1 << n):
            for i in range(n):
                atoms[ProductPoint(n, mask, i)] = pos if (mask >> i) & 1 else neg
        return FiniteSignedMeasure._trusted("product_omega_sigma", atoms)

    def settle(p: ProductPoint) -> int:
        return p.n + 1

    return SequenceHandle("product_omega_sigma", at, name="product", params={}, cap=cap, index_origin=1,
                          oracle=zero_oracle(settle), balance_envelope=lambda n: Fraction(0),
                          rect_evaluator=ProductRectEvaluator(brute_cap),
                          support_size=lambda n: n * 2 ** n, disjoint_supports=True)


# ---------------------------------------------------------------------------
# Cantor space


def _words(n: int) -> list[str]:
    return [format(k, f"0{n}b") for k in range(1 << n)] if n else [""]


def _cantor_settle(p: Any) -> Callable[[Fraction], int]:
    return lambda eps: _least_power_below(eps)


def cantor_canonical(cap: int | None = 20) -> SequenceHandle:
    """``mu_n = 2^-(n+1) sum_{|s|=n} (delta_{s 1^w} - delta_{s 0^w})``."""

    def at(n: int) -> FiniteSignedMeasure:
        c = Fraction(1, 2 ** (n + 1))
        atoms = {}
        for s in _words(n):
            atoms[cantor_point(s, 1)] = c
            atoms[cantor_point(s, 0)] = -c
        return FiniteSignedMeasure._trusted("cantor", atoms)

    return SequenceHandle("cantor", at, name="cantor", params={}, cap=cap,
                          oracle=zero_oracle(_cantor_settle), balance_envelope=lambda n: Fraction(0),
                          support_size=lambda n: 2 ** (n + 1))


def rademacher_rule(n: int) -> Callable[[str], Fraction]:
    def rule(s: str) -> Fraction:
        if n >= len(s):
            return Fraction(0)
        return Fraction(1 if s[n] == "1" else -1, 2 ** len(s))

    return rule


def rademacher_rl() -> LazySequence:
    """Element ``n`` is the cylinder measure ``lambda(B_n & .) - lambda(B_n^c & .)``, ``B_n = {x(n) = 1}``."""
    return LazySequence(lambda n: CylinderMeasure(rademacher_rule(n), Fraction(1), f"rademacher[{n}]", {"n": n}))


def transport_seq(section: Callable[[WordPoint], Any] | None = None, domain: PointDomain | None = None, *,
                  doubled: tuple = (), cap: int | None = 20) -> SequenceHandle:
    """Push the canonical Cantor sequence through ``section``.

    On the doubled Cantor space every image must lie in the fiber of its
    source point.  Other target spaces are accepted as asserted, and
    injectivity is checked on every materialized measure.
    """
    if domain is None:
        domain = doubled_cantor(doubled) if doubled else CANTOR
    if section is None:
        if domain.kind == "DoubledCantor":
            section = lambda x, _d=domain.doubled: DoubledPoint(x, 1 if x in _d else 0)  # noqa: E731
        else:
            section = lambda x: x  # noqa: E731
    checked = domain.kind in ("DoubledCantor", "CantorWordSpace")

    def image(x: WordPoint) -> Any:
        y = section(x)
        if domain.kind == "DoubledCantor":
            domain.validate(y)
            if domain.collapse(y) != x:
                raise GeneratorError(f"section maps {x!r} to {y!r}, outside its fiber")
        elif domain.kind == "CantorWordSpace" and y != x:
            raise GeneratorError(f"section maps {x!r} to {y!r}, outside its fiber")
        return y

    def at(n: int) -> FiniteSignedMeasure:
        c = Fraction(1, 2 ** (n + 1))
        atoms = {}
        for s in _words(n):
            for tail, coef in ((1, c), (0, -c)):
                y = image(cantor_point(s, tail))
                if y in atoms:
                    raise GeneratorError(f"section is not injective at index {n}: {y!r}")
                atoms[y] = coef
        return FiniteSignedMeasure._trusted(domain.id, atoms)

    params = {"doubled": [[p.word, p.tail] for p in sorted(domain.doubled)]} if domain.kind == "DoubledCantor" else {}
    handle = SequenceHandle(domain.id, at, name="transport", params=params, cap=cap, domain=domain,
                            oracle=zero_oracle(_cantor_settle), balance_envelope=lambda n: Fraction(0),
                            support_size=lambda n: 2 ** (n + 1))
    handle.flags["hypothesis"] = "checked" if checked else "asserted"
    return handle


# ---------------------------------------------------------------------------
# uniformly distributed sequences


def dyadic_blocks(n: int) -> tuple[int, int]:
    """``P_n = [2^n - 1, 2^(n+1) - 2]``."""
    return 2 ** n - 1, 2 ** (n + 1) - 2


def vdc_point(k: int) -> WordPoint:
    return cantor_point(van_der_corput_word(k), 0)


def check_partition(blocks: Callable[[int], tuple[int, int]], upto: int) -> None:
    for n in range(1, upto + 1):
        lo, hi = blocks(n)
        if hi < lo or hi < 1:
            raise GeneratorError(f"block {n} = [{lo}, {hi}] is empty or has max 0")
        if Fraction(hi - lo + 1, hi) < HALF:
            raise GeneratorError(f"block {n}: |P_n|/max P_n = {Fraction(hi - lo + 1, hi)} < 1/2")
        nlo, _ = blocks(n + 1)
        if nlo != hi + 1:
            raise GeneratorError(f"blocks {n} and {n + 1} are not consecutive")


def uds_seq(xs: Callable[[int], Any] = vdc_point, blocks: Callable[[int], tuple[int, int]] = dyadic_blocks,
            space: str = "cantor", *, check_horizon: int = 12, cap: int | None = 18) -> SequenceHandle:
    """Normalized differences of consecutive block averages along ``xs``; indices start at 1."""
    check_partition(blocks, check_horizon + 1)
    top = blocks(check_horizon + 1)[1]
    seen = set()
    for k in range(top + 1):
        p = xs(k)
        if p in seen:
            raise GeneratorError(f"point sequence repeats at k={k}")
        seen.add(p)

    def nu(n: int) -> FiniteSignedMeasure:
        m0, m1 = blocks(n)[1], blocks(n + 1)[1]
        inner = Fraction(1, m1) - Fraction(1, m0)
        outer = Fraction(1, m1)
        atoms = {}
        for k in range(m1 + 1):
            atoms[xs(k)] = inner if k <= m0 else outer
        return FiniteSignedMeasure._trusted(space, atoms)

    pre = SequenceHandle(space, nu, name="uds-pre", params={}, index_origin=1, cap=cap,
                         pre_normalization=True)

    def at(n: int) -> FiniteSignedMeasure:
        v = pre.at(n)
        return v.scale(1 / v.norm())

    def envelope(n: int) -> Fraction:
        v = pre.at(n)
        return abs(v.total_mass()) / (2 * v.norm())

    def settle_eps(eps: Fraction) -> int:
        n = 1
        while Fraction(2, blocks(n)[1]) >= eps:
            n += 1
        return n

    handle = SequenceHandle(space, at, name="uds", params={}, index_origin=1, cap=cap,
                            oracle=zero_oracle(lambda p: settle_eps), balance_envelope=envelope,
                            support_size=lambda n: blocks(n + 1)[1] + 1, aux={"pre": pre})
    return handle
