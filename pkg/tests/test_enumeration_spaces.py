from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fsjn.enumeration import (
    LazySequence,
    VirtualMeasureError,
    calkin_wilf,
    calkin_wilf_position,
    rational_at,
    rational_index,
)
from fsjn.spaces import (
    CANTOR,
    DUPLICATE,
    OMEGA,
    PRODUCT,
    UNIT_SQUARE,
    DoubledPoint,
    DuplicatePoint,
    cantor_point,
    doubled_cantor,
    product_point,
    sort_key,
    sq,
)


def test_rational_enumeration_starts_as_documented():
    assert [rational_at(n) for n in range(7)] == [
        Fraction(1), Fraction(1, 2), Fraction(1, 3), Fraction(0), Fraction(2, 3), Fraction(1, 4), Fraction(3, 5)]


def test_rational_enumeration_is_injective_and_covers_small_denominators():
    seen = [rational_at(n) for n in range(4000)]
    assert len(set(seen)) == len(seen)
    wanted = {Fraction(a, b) for b in range(1, 12) for a in range(b + 1)}
    assert wanted <= set(seen)


@given(st.integers(1, 10 ** 6))
def test_calkin_wilf_position_inverts(pos):
    assert calkin_wilf_position(calkin_wilf(pos)) == pos


@given(st.integers(0, 10 ** 5))
def test_rational_index_inverts(n):
    assert rational_index(rational_at(n)) == n


def test_lazy_sequence_memoizes_and_caps():
    calls = []

    def f(n):
        calls.append(n)
        return n * n

    seq = LazySequence(f, origin=1, length=5, cap=3)
    assert seq.at(2) == 4 and seq.at(2) == 4
    assert calls == [2]
    with pytest.raises(VirtualMeasureError):
        seq.at(4)
    with pytest.raises(IndexError):
        seq.at(0)
    with pytest.raises(IndexError):
        seq.at(6)
    assert list(seq.indices(10)) == [1, 2, 3, 4, 5]


def test_cantor_points_are_canonical():
    assert cantor_point("0100", 0) == cantor_point("01", 0)
    assert cantor_point("0111", 1).word == "0"
    p = cantor_point("01", 1)
    assert p.prefix(5) == "01111" and p.in_cylinder("011") and not p.in_cylinder("00")


@pytest.mark.parametrize("domain,point", [
    (UNIT_SQUARE, sq(Fraction(1, 3), 0)),
    (OMEGA, 17),
    (CANTOR, cantor_point("0110", 1)),
    (PRODUCT, product_point("+-+", 2)),
    (DUPLICATE, DuplicatePoint(4, 1)),
])
def test_point_encoding_round_trips(domain, point):
    domain.validate(point)
    assert domain.decode(domain.encode(point)) == point


def test_doubled_cantor_fibers_and_validation():
    d = cantor_point("1", 0)
    dom = doubled_cantor([d])
    assert dom.fiber(d) == [DoubledPoint(d, 0), DoubledPoint(d, 1)]
    other = cantor_point("0", 1)
    assert dom.fiber(other) == [DoubledPoint(other, 0)]
    with pytest.raises(ValueError):
        dom.validate(DoubledPoint(other, 1))
    assert dom.collapse(DoubledPoint(d, 1)) == d


def test_invalid_points_rejected():
    with pytest.raises(ValueError):
        UNIT_SQUARE.validate(sq(2, 0))
    with pytest.raises(ValueError):
        product_point("+-", 2)
    with pytest.raises(ValueError):
        OMEGA.validate(-1)


def test_sort_key_orders_squares_lexicographically():
    pts = [sq(1, 0), sq(0, 1), sq(0, 0)]
    assert sorted(pts, key=sort_key) == [sq(0, 0), sq(0, 1), sq(1, 0)]
