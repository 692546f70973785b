from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from fsjn import generators as gen
from fsjn.analysis import oracle_consistency
from fsjn.enumeration import rational_at
from fsjn.measure import FiniteSignedMeasure, check_additivity, cylinder_eval, jordan_split
from fsjn.spaces import ProductPoint, cantor_point, doubled_cantor, sq

Q = Fraction


def square1_formula(n):
    y = Q(1, n + 1)
    if n % 2 == 0:
        parts = [(Q(1, 4), 0), (Q(1, 4), Q(1, 2))]
    else:
        parts = [(Q(1, 4), 0), (Q(1, 8), Q(1, 2)), (Q(1, 8), 1)]
    atoms = {}
    for c, x in parts:
        atoms[sq(x, 0)] = c
        atoms[sq(x, y)] = -c
    return FiniteSignedMeasure("unit_square", atoms)


def square3_formula(n, alpha):
    atoms = {}

    def add(p, c):
        atoms[p] = atoms.get(p, 0) + c

    for k in range(n + 1):
        c = (1 - alpha) / 2 ** (k + 2)
        add(sq(rational_at(k), 0), c)
        add(sq(rational_at(k), Q(1, n + 1)), -c)
    c = alpha / 2 + (1 - alpha) / 2 ** (n + 2)
    add(sq(0, 1 - Q(1, n + 1)), c)
    add(sq(0, 1 - Q(1, n + 2)), -c)
    return FiniteSignedMeasure("unit_square", atoms)


def test_square1_matches_displayed_formula():
    h = gen.square1()
    for n in range(40):
        assert h.at(n) == square1_formula(n)
        assert h.at(n).norm() == 1


@pytest.mark.parametrize("alpha", [Q(1, 3), Q(1, 2), Q(7, 8)])
def test_square3_matches_displayed_formula(alpha):
    h = gen.square3(alpha)
    for n in range(30):
        assert h.at(n) == square3_formula(n, alpha)
        assert h.at(n).norm() == 1


def test_square3_rejects_alpha_outside_unit_interval():
    with pytest.raises(gen.GeneratorError):
        gen.square3(Q(3, 2))


def test_square2_blocks_partition_and_coefficients():
    h = gen.square2()
    block = h.aux["block"]
    for k in range(1, 200):
        m = h.at(k)
        assert m.norm() == 1
        on_axis = [c for p, c in m.items() if p.y == 0]
        assert on_axis == [Q(1, 2)]
        assert sq(rational_at(block(k)), 0) in m
    assert {block(k) for k in range(1, 63)} == set(range(6))


def test_square4_coefficients_closed_form_equals_recursion():
    for n in range(9):
        for k in range(2 ** n):
            assert gen.square4_alpha(n, k) == gen.square4_alpha_recursive(n, k)


def test_square4_aux_norm_and_normalized_measures():
    h = gen.square4(cap=12)
    nu = h.aux["nu"]
    for n in range(12):
        assert nu.at(n).norm() == 1 - Q(1, 2 ** (n + 1))
        assert h.at(n).norm() == 1
        assert len(h.at(n)) == 2 ** (n + 1)


def product_coefficients(n):
    """Independent sweep over sign vectors: coefficient s(i)/(n 2^n)."""
    out = {}
    for mask in range(1 << n):
        signs = [1 if mask >> j & 1 else -1 for j in range(n)]
        for i in range(n):
            out[ProductPoint(n, mask, i)] = Q(signs[i], n * 2 ** n)
    return out


def test_product_measures_match_sign_sweep():
    h = gen.product_seq(cap=10)
    for n in range(1, 9):
        assert dict(h.at(n).atoms) == product_coefficients(n)
        assert jordan_split(h.at(n)).positive.norm() == Q(1, 2)


cylinders = st.dictionaries(st.integers(0, 5), st.sampled_from([1, -1]), max_size=4)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), cylinders, st.sets(st.integers(0, 9)))
def test_product_closed_form_equals_enumeration(n, cyl, bset):
    b = lambda i, m: i in bset  # noqa: E731
    closed = gen.product_rect_closed(n, cyl, b)
    h = gen.product_seq(cap=10)
    direct = sum((c for p, c in h.at(n).items()
                  if b(p.i, n) and all(j < n and p.sign(j) == s for j, s in cyl.items())), Q(0))
    assert closed == direct == gen.product_rect_brute(n, gen._cylinder_as_mask(cyl), b)


def test_product_predicate_rectangles_refused_past_brute_cap():
    ev = gen.ProductRectEvaluator(brute_cap=6)
    with pytest.raises(gen.GeneratorError):
        ev(7, lambda mask, n: True, lambda i, n: True)


def test_rademacher_additive_and_vanishing():
    seq = gen.rademacher_rl()
    for n in range(13):
        c = seq.at(n)
        assert check_additivity(c, 12) == []
        for length in range(n + 1):
            for k in range(1 << length):
                word = format(k, f"0{length}b") if length else ""
                assert cylinder_eval(c, word) == 0
        assert cylinder_eval(c, "0" * n + "1") == Q(1, 2 ** (n + 1))


def test_cantor_and_transport():
    c = gen.cantor_canonical(cap=10)
    d = cantor_point("1", 0)
    t = gen.transport_seq(doubled=(d,), cap=10)
    assert t.flags["hypothesis"] == "checked"
    dom = doubled_cantor([d])
    for n in range(8):
        assert c.at(n).norm() == 1 and t.at(n).norm() == 1
        pushed = {}
        for p, v in t.at(n).items():
            pushed[dom.collapse(p)] = pushed.get(dom.collapse(p), 0) + v
        assert FiniteSignedMeasure("cantor", pushed) == c.at(n)


def test_transport_rejects_sections_outside_fibers():
    d = cantor_point("1", 0)
    dom = doubled_cantor([d])
    bad = gen.transport_seq(lambda x: gen.DoubledPoint(cantor_point("0", 0), 0), dom, cap=4)
    with pytest.raises(gen.GeneratorError):
        bad.at(1)


def test_uds_measures_normalized_with_envelope():
    h = gen.uds_seq(cap=10)
    for n in range(1, 10):
        m = h.at(n)
        assert m.norm() == 1
        dev = abs(jordan_split(m).positive.norm() - Q(1, 2))
        assert dev <= h.balance_envelope(n)


def test_conv_pair_rejects_collisions_and_drops_oracle_when_not_injective():
    with pytest.raises(gen.GeneratorError):
        gen.conv_pair(lambda n: sq(0, 0), sq(0, 0))
    assert gen.conv_pair(lambda n: sq(0, Q(1, 2)), sq(0, 0)).oracle is None
    assert gen.square_conv_pair().oracle.limit(sq(0, 0)) == Q(-1, 2)


def test_schachermayer_and_duplicate_are_disjoint_halves():
    for h in (gen.schachermayer_seq(), gen.ad_duplicate_seq()):
        seen = set()
        for n in range(50):
            m = h.at(n)
            assert m.norm() == 1 and sorted(m.atoms.values()) == [Q(-1, 2), Q(1, 2)]
            assert not seen & set(m.support())
            seen |= set(m.support())


@pytest.mark.parametrize("build,horizon", [
    (gen.square_conv_pair, 40), (gen.square1, 40), (gen.square2, 40), (lambda: gen.square3(Q(1, 3)), 30),
    (lambda: gen.square4(cap=10), 10), (gen.schachermayer_seq, 40), (lambda: gen.product_seq(cap=8), 8),
    (lambda: gen.cantor_canonical(cap=10), 10), (lambda: gen.uds_seq(cap=9), 9), (gen.ad_duplicate_seq, 40),
])
def test_oracle_thresholds_hold_on_materialized_indices(build, horizon):
    assert oracle_consistency(build(), horizon) == []
