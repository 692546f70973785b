from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fsjn.measure import (
    CylinderMeasure,
    EvaluationError,
    FiniteSignedMeasure,
    SpaceMismatchError,
    as_fraction,
    check_additivity,
    check_declared_norm,
    combine,
    evaluate,
    jordan_split,
    norm,
    restrict,
)

fractions = st.fractions(min_value=-8, max_value=8, max_denominator=12)
atom_maps = st.dictionaries(st.integers(0, 15), fractions, max_size=8)
weights = st.dictionaries(st.integers(0, 15), fractions)


def omega(atoms):
    return FiniteSignedMeasure("omega", atoms)


def test_zero_coefficients_are_dropped():
    m = omega({0: 1, 1: 0, 2: Fraction(-1, 2)})
    assert m.support() == frozenset({0, 2})
    assert m.norm() == Fraction(3, 2)
    assert m.total_mass() == Fraction(1, 2)


def test_as_fraction_rejects_floats():
    assert as_fraction("3/4") == Fraction(3, 4)
    with pytest.raises(TypeError):
        as_fraction(0.5)


def test_combine_needs_same_space():
    with pytest.raises(SpaceMismatchError):
        combine(omega({0: 1}), FiniteSignedMeasure("cantor", {}))


def test_evaluate_rejects_non_rational_values():
    with pytest.raises(EvaluationError):
        evaluate(omega({0: 1}), lambda p: 0.25)


@given(atom_maps, atom_maps, weights, fractions, fractions)
def test_evaluate_is_linear_in_the_measure(a, b, f, ca, cb):
    ma, mb = omega(a), omega(b)
    func = lambda p: f.get(p, 0)  # noqa: E731
    lhs = evaluate(combine(ma, mb, ca, cb), func)
    assert lhs == ca * evaluate(ma, func) + cb * evaluate(mb, func)


@given(atom_maps, st.sets(st.integers(0, 15)))
def test_restriction_splits_the_norm(a, keep):
    m = omega(a)
    inside = restrict(m, lambda p: p in keep)
    outside = restrict(m, lambda p: p not in keep)
    assert norm(inside) + norm(outside) == norm(m)


@given(atom_maps)
def test_jordan_split_reconstructs(a):
    m = omega(a)
    js = jordan_split(m)
    assert combine(js.positive, js.negative, 1, 1) == m
    assert all(c > 0 for c in js.positive.atoms.values())
    assert all(c < 0 for c in js.negative.atoms.values())
    assert js.positive.norm() + js.negative.norm() == m.norm()


@given(atom_maps, atom_maps)
def test_norm_triangle_inequality(a, b):
    assert norm(combine(omega(a), omega(b))) <= norm(omega(a)) + norm(omega(b))


def test_cylinder_measure_checks():
    lebesgue = CylinderMeasure(lambda s: Fraction(1, 2 ** len(s)), Fraction(1))
    assert check_additivity(lebesgue, 8) == []
    assert check_declared_norm(lebesgue, 6)
    broken = CylinderMeasure(lambda s: Fraction(1) if s == "" else Fraction(1, 3), Fraction(1))
    assert check_additivity(broken, 2) != []
