from fractions import Fraction

import pytest

from fsjn import generators as gen
from fsjn import transforms as tr
from fsjn.handles import SequenceHandle, zero_oracle
from fsjn.measure import FiniteSignedMeasure
from fsjn.spaces import canonical_family, sq, tent

Q = Fraction


def supports_disjoint(h, count):
    seen = set()
    for k in h.indices(count):
        s = set(h.at(k).support())
        if seen & s:
            return False
        seen |= s
    return True


@pytest.mark.parametrize("build,case,alpha", [
    (gen.square1, "alpha in (0,1)", Q(1, 2)),
    (lambda: gen.square3(Q(1, 3)), "alpha in (0,1)", Q(1, 3)),
    (gen.schachermayer_seq, "L empty", Q(0)),
])
def test_disjointify_outputs(build, case, alpha):
    out = tr.disjointify(build(), horizon=64, verify=30)
    step = out.provenance[-1]
    assert step.summary["case"] == case
    assert step.summary["alpha"] == alpha
    assert supports_disjoint(out, 30)
    assert all(out.at(k).norm() == 1 for k in out.indices(30))
    assert tr.check_pairwise_disjoint(out, 30) == []


def test_disjointify_provenance_is_deterministic():
    a = tr.disjointify(gen.square1()).provenance[-1].to_json(20)
    b = tr.disjointify(gen.square1()).provenance[-1].to_json(20)
    assert a == b
    assert [s["name"] for s in a["substeps"]][:2] == ["extract", "restrict-off-L"]


def test_extract_uses_exact_progression_for_square1():
    sub, flag = tr.extract_pointwise_convergent(gen.square1())
    assert flag == "exact"
    assert sub.oracle.limit(sq(Q(1, 2), 0)) == Q(1, 4)
    assert all(sub.at(k) == gen.square1().at(2 * k) for k in range(10))


def test_extract_without_oracle_is_estimated():
    base = gen.square1()
    bare = SequenceHandle("unit_square", base.at, name="bare")
    sub, flag = tr.extract_pointwise_convergent(bare, horizon=32)
    assert flag == "estimated"
    assert len(list(sub.indices(5))) == 5


def test_restrict_off_L_refuses_points_without_limit():
    with pytest.raises(tr.TransformError):
        tr.restrict_renormalize_offL(gen.square2(), horizon=16)


def test_restrict_off_L_supports_meet_only_inside_L():
    h = gen.square3(Q(1, 3))
    out = tr.restrict_renormalize_offL(h, horizon=32)
    seen = set()
    for k in range(12):
        cert = out.provenance[-1].certificate(k)
        assert cert["k"] == k
        if k >= 1:
            assert 1 <= cert["alpha"] < 1 + Q(1, k)
        m = out.at(k)
        assert m.norm() == 1
        assert all(h.oracle.in_L(p) for p in seen & set(m.support()))
        seen |= set(m.support())


def test_restrict_to_L_square4_has_unit_norm():
    out = tr.restrict_to_L(gen.square4(cap=12), horizon=12)
    for k in range(8):
        assert out.at(k).norm() == 1
        assert all(p.y == 0 for p in out.at(k).support())


def test_restrict_to_L_rejects_when_L_norm_below_one():
    with pytest.raises(tr.TransformError):
        tr.restrict_to_L(gen.square1())


def test_difference_normalize_uses_consecutive_pairs():
    h = gen.schachermayer_seq()
    out = tr.difference_normalize(h, Q(1))
    for k in range(5):
        expected = FiniteSignedMeasure("omega", {4 * k: Q(1, 4), 4 * k + 1: Q(-1, 4),
                                                 4 * k + 2: Q(-1, 4), 4 * k + 3: Q(1, 4)})
        assert out.at(k) == expected


def test_normalize_rejects_small_norms():
    tiny = SequenceHandle("omega", lambda n: FiniteSignedMeasure("omega", {n: Q(1, 4)}), name="tiny",
                          oracle=zero_oracle(lambda k: k + 1))
    with pytest.raises(tr.TransformError):
        tr.normalize(tiny, Q(1, 2), horizon=4)
    ok = tr.normalize(tiny, Q(1, 8), horizon=4)
    assert ok.at(3).norm() == 1


def test_truncation_of_geometric_countable_sequence():
    cs = tr.geometric_countable()
    out = tr.truncate_cs_to_fs(cs, lambda n: 2 * cs.tail_norm(n), canonical_family("omega"), horizon=12)
    for n in range(1, 10):
        assert out.at(n).norm() == 1
        assert len(out.at(n)) == 4 * n
    with pytest.raises(tr.TransformError):
        tr.truncate_cs_to_fs(cs, cs.tail_norm, horizon=4)


def test_geometric_tail_partial_sums_converge_to_closed_form():
    cs = tr.geometric_countable()
    for n in range(1, 6):
        gap = cs.tail_norm(n) - tr.geometric_tail_partial(n, 30)
        assert gap == Q(1, 2 ** (2 * n + 30))


def synthetic_three_atom():
    def at(n):
        c = Q(1, n + 2)
        return FiniteSignedMeasure("unit_square", {
            sq(0, Q(1, n + 1)): (1 - c) / 2, sq(0, 0): -(1 - c) / 2, sq(1, 1): c})

    return SequenceHandle("unit_square", at, name="synthetic", index_origin=2)


def test_drop_small_atom_then_pair_reduce():
    h = synthetic_three_atom()
    dropped = tr.drop_small_atom(h)
    reduced = tr.pair_reduce(dropped, horizon=32)
    for n in range(2, 30):
        m = reduced.at(n)
        assert m == FiniteSignedMeasure("unit_square", {sq(0, 0): Q(-1, 2), sq(0, Q(1, n + 1)): Q(1, 2)})
        cert = dropped.provenance[-1].certificate(n)
        assert cert["dropped"] < cert["bound"]


def test_drop_small_atom_fails_certificate_when_atom_too_big():
    big = SequenceHandle("omega", lambda n: FiniteSignedMeasure("omega", {0: Q(1, 2), 1: Q(-1, 2)}), name="big",
                         index_origin=1)
    with pytest.raises(tr.TransformError):
        tr.drop_small_atom(big)


def test_pair_reduce_needs_constant_support_size():
    with pytest.raises(tr.TransformError):
        tr.pair_reduce(gen.square1(), horizon=8)


def test_stabilize_finds_exact_limit_vector():
    h = synthetic_three_atom()
    out, alpha, exact = tr.stabilize_coefficients(tr.pair_reduce(tr.drop_small_atom(h), horizon=16), horizon=16)
    assert exact and sorted(alpha) == [Q(-1, 2), Q(1, 2)]
    assert out.aux["alpha"] == alpha


def test_concentrate_at_isolated_point():
    h = gen.square1()
    x = sq(Q(1, 2), 0)
    out = tr.concentrate_at_isolated(h, x, tent(Q(1, 2), 0), horizon=32)
    for k in range(10):
        m = out.at(k)
        assert m.norm() == 1
        assert abs(m[x]) > 0
    with pytest.raises(tr.TransformError):
        tr.concentrate_at_isolated(h, sq(Q(1, 3), Q(1, 3)), tent(Q(1, 3), Q(1, 3)))


def test_selector_reports_exhaustion():
    h = SequenceHandle("omega", lambda n: FiniteSignedMeasure("omega", {n: 1}), name="finite", length=3)
    sel = tr.Selector(h, lambda k, n: None, scan_limit=10)
    with pytest.raises(tr.TransformError):
        sel.index(0)


def test_disjointified_outputs_decay_on_canonical_family():
    from fsjn.analysis import decay_report

    out = tr.disjointify(gen.square3(Q(1, 3)))
    rep = decay_report(out, canonical_family("unit_square"), horizon=64)
    assert rep.consistent
