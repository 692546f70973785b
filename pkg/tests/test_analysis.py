from fractions import Fraction

import pytest

from fsjn import analysis as an
from fsjn import generators as gen
from fsjn.handles import SequenceHandle
from fsjn.measure import FiniteSignedMeasure
from fsjn.spaces import canonical_family, product_family, sq

Q = Fraction


def brute_rect(n, a, b):
    """Independent oracle: sum s(i)/(n 2^n) over sign vectors in A and indices in B."""
    total = Q(0)
    for mask in range(1 << n):
        if not a(mask, n):
            continue
        for i in range(n):
            if b(i, n):
                total += Q(1 if mask >> i & 1 else -1, n * 2 ** n)
    return total


def test_square1_limit_sets_are_nested_with_expected_points():
    rep = an.limit_sets(gen.square1(), horizon=32)
    assert rep.nested()
    assert rep.bases() == {"oracle-exact"}
    assert set(rep.L) == {sq(0, 0)}
    assert set(rep.LI) == {sq(0, 0), sq(Q(1, 2), 0)}
    assert set(rep.LS) == {sq(0, 0), sq(Q(1, 2), 0), sq(1, 0)}
    assert len(rep.S) > len(rep.LS)


def test_limit_sets_estimated_without_oracle():
    base = gen.square1()
    bare = SequenceHandle("unit_square", base.at, name="bare")
    rep = an.limit_sets(bare, horizon=32)
    assert rep.bases() == {"horizon-estimated"}
    assert rep.nested()
    assert sq(0, 0) in rep.L


def test_limit_sets_warn_on_finite_support():
    fixed = SequenceHandle("omega", lambda n: FiniteSignedMeasure("omega", {0: Q(1, 2), 1: Q(-1, 2)}),
                           name="fixed")
    rep = an.limit_sets(fixed, horizon=8)
    assert any("finite" in w for w in rep.warnings)


def test_balance_with_and_without_envelope():
    assert an.balance_check(gen.square1(), horizon=32).passed
    assert an.balance_check(gen.uds_seq(cap=9), horizon=9).passed
    lopsided = SequenceHandle("omega", lambda n: FiniteSignedMeasure("omega", {n: 1}), name="lopsided")
    rep = an.balance_check(lopsided, horizon=16)
    assert rep.tail_max_deviation == Q(1, 2) and not rep.passed


def test_l_mass_closed_form_and_group_sums():
    rep = an.l_mass_sum(gen.square3(Q(1, 3)))
    assert rep.total == Q(1, 3)
    assert rep.agrees is not False and rep.passed
    assert an.l_mass_sum(gen.square1()).total == Q(1, 4)


def test_l_mass_needs_an_oracle():
    bare = SequenceHandle("omega", lambda n: FiniteSignedMeasure("omega", {n: 1}), name="bare")
    with pytest.raises(an.UsageError, match="limit oracle required"):
        an.l_mass_sum(bare)


def test_decay_report_on_product_cylinders():
    h = gen.product_seq(cap=12)
    rep = an.decay_report(h, product_family(), horizon=20)
    assert rep.indices == list(range(1, 21))
    vals = rep.values["[s(0)=+1]x[all]"]
    assert vals == [Q(1, 2 * n) for n in rep.indices]
    csv_text = rep.to_csv()
    assert csv_text.splitlines()[0] == "functional,n,value,float"
    assert "[s(0)=+1]x[all],3,1/6," in csv_text
    assert rep.eventually_zero_from("[all]x[all]") == 1


def test_decay_square2_depends_on_horizon():
    h = gen.square2()
    fam = canonical_family("unit_square")
    assert not an.decay_report(h, fam, horizon=32).consistent
    assert an.decay_report(h, fam, horizon=64).consistent


def test_product_audit_large_b_estimates():
    audit = an.product_proof_audit({0: 1}, lambda i, n: True, Q(1, 12), range(1, 15), i1_threshold=0)
    for row in audit.rows:
        assert row.case == "I1" and row.dagger_ok and row.estimates_ok
        assert row.value == brute_rect(row.n, lambda m, n: m & 1 == 1, lambda i, n: True)
        assert row.on_delta + row.off_delta == row.value
    assert not audit.rows[0].below_2eps and not audit.passed


def test_product_audit_default_threshold_puts_small_b_in_first_case():
    audit = an.product_proof_audit({0: 1}, lambda i, n: i < 3, Q(1, 12), range(1, 30))
    assert audit.i0_threshold == 2 * 12 ** 4
    assert all(r.case == "I0" for r in audit.rows)
    assert all(r.dagger_ok for r in audit.rows)


def test_product_audit_rejects_bad_eps():
    with pytest.raises(an.UsageError):
        an.product_proof_audit(None, lambda i, n: True, Q(1, 2), range(1, 4))


def test_random_rectangles_satisfy_dagger_against_brute_force():
    for rect in an.random_rectangles(7, 5, 9):
        audit = an.product_proof_audit(rect.a, rect.b, Q(1, 12), range(1, 10))
        for row in audit.rows:
            assert row.value == brute_rect(row.n, rect.a, rect.b)
            assert row.dagger_ok


def test_random_rectangles_are_seeded():
    a = an.random_rectangles(3, 2, 5)
    b = an.random_rectangles(3, 2, 5)
    assert a == b
    assert a != an.random_rectangles(4, 2, 5)
