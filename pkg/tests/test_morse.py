import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from milnor.errors import DegenerateCritical, DimensionMismatch
from milnor.germ import PolynomialGerm, power_germ, quadratic_form
from milnor.morse import (Box, Morsification, MorseVector, critical_points_csv, euler_sum, find_critical_points,
                          morse_index, morse_vectors, newton_solve)

X4_Y2 = PolynomialGerm.from_terms(2, {(4, 0): 1, (0, 2): -1})
M_X4_Y2 = Morsification.of(X4_Y2, [2, 0])


def as_dict(points, digits=9):
    return {tuple(round(v, digits) + 0.0 for v in p.location): p.morse_index for p in points}


def test_realize_is_exact():
    f = M_X4_Y2.realize(Fraction(1, 3))
    assert {m.exponents: m.coefficient for m in f.terms} == {(4, 0): 1, (2, 0): Fraction(2, 3), (0, 2): -1}
    assert M_X4_Y2.realize(0) == X4_Y2


def test_x4_minus_y2_positive_s():
    pts = find_critical_points(M_X4_Y2.realize(1), Box.cube(2))
    assert as_dict(pts) == {(0.0, 0.0): 1}


def test_x4_minus_y2_negative_s():
    pts = find_critical_points(M_X4_Y2.realize(-1), Box.cube(2))
    assert as_dict(pts) == {(-1.0, 0.0): 1, (0.0, 0.0): 2, (1.0, 0.0): 1}
    lam, lam0 = morse_vectors(pts)
    assert lam == MorseVector((1, 1, 2)) and len(lam0) == 0


@pytest.mark.parametrize("s", [-0.9, -0.5, -0.1, -0.01])
def test_x4_minus_y2_matches_analytic_solve(s):
    # grad = (4x^3 + 4 s x, -2y): x = 0 or x = +-sqrt(-s)
    pts = find_critical_points(M_X4_Y2.realize(s), Box.cube(2))
    r = math.sqrt(-s)
    np.testing.assert_allclose([p.location[0] for p in pts], [-r, 0.0, r], atol=1e-12)
    np.testing.assert_allclose([p.value for p in pts], [-s * s, 0.0, -s * s], atol=1e-12)


def test_x_squared_plus_x():
    M = Morsification.of(power_germ(2), [0], [1])
    pts = find_critical_points(M.realize(1), Box.cube(1))
    assert len(pts) == 1
    assert pts[0].location == pytest.approx((-0.5,), abs=1e-12)
    assert pts[0].morse_index == 0 and pts[0].value == pytest.approx(-0.25)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_all_diagonal_quadratic_forms(m):
    grid = 32 if m <= 2 else 16
    for signs in itertools.product((1, -1), repeat=m):
        pts = find_critical_points(quadratic_form(signs), Box.cube(m), grid)
        assert len(pts) == 1
        assert pts[0].location == (0.0,) * m
        assert pts[0].morse_index == signs.count(-1)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([-3, -2, -1, 1, 2, 3]), st.integers(-3, 3)), min_size=1, max_size=3))
def test_shifted_quadratics_property(coeffs):
    # f = sum q_i x_i^2 + l_i x_i has its single critical point at -l_i / (2 q_i)
    m = len(coeffs)
    terms = {}
    for i, (q, l) in enumerate(coeffs):
        e2 = [0] * m
        e2[i] = 2
        terms[tuple(e2)] = Fraction(q, 4)
        if l:
            e1 = [0] * m
            e1[i] = 1
            terms[tuple(e1)] = Fraction(l, 4)
    f = PolynomialGerm.from_terms(m, terms)
    pts = find_critical_points(f, Box.cube(m, 3.0), 12)
    assert len(pts) == 1
    np.testing.assert_allclose(pts[0].location, [-l / (2 * q) for q, l in coeffs], atol=1e-12)
    assert pts[0].morse_index == sum(q < 0 for q, _ in coeffs)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.0, 1.0).filter(lambda s: abs(s) > 1e-3))
def test_euler_sum_is_constant_in_s(s):
    # the index sum over the box is the degree of grad f_s, which does not depend on s
    assert euler_sum(find_critical_points(M_X4_Y2.realize(s), Box.cube(2))) == -1


def test_degenerate_raises():
    with pytest.raises(DegenerateCritical):
        find_critical_points(X4_Y2, Box.cube(2))
    with pytest.raises(DegenerateCritical):
        find_critical_points(power_germ(3), Box.cube(1))


def test_morse_index_matrix():
    assert morse_index(np.diag([2.0, -2.0, -1.0])) == 2
    with pytest.raises(DegenerateCritical):
        morse_index(np.diag([2.0, 0.0]))
    with pytest.raises(DimensionMismatch):
        morse_index(np.ones((2, 3)))


def test_newton_solve_quadratic_convergence():
    f = PolynomialGerm.from_terms(1, {(3,): 1, (1,): -3})  # critical points at +-1
    x, gn, ok = newton_solve(f, np.array([[0.5], [2.0]]), max_iter=8)
    assert ok.all()
    np.testing.assert_allclose(x[:, 0], [1.0, 1.0], atol=1e-14)


def test_box_filter_and_dimension():
    f = PolynomialGerm.from_terms(1, {(3,): 1, (1,): -3})
    pts = find_critical_points(f, Box((0.0,), (2.0,)))
    assert as_dict(pts) == {(1.0,): 0}
    with pytest.raises(DimensionMismatch):
        find_critical_points(f, Box.cube(2))


def test_box_parse():
    b = Box.parse("-1,1;0,2", 2)
    assert b.lower == (-1.0, 0.0) and b.upper == (1.0, 2.0)
    assert str(Box.parse("-2,2", 2)) == "-2,2;-2,2"


def test_csv_is_stable():
    pts = find_critical_points(M_X4_Y2.realize(-1), Box.cube(2))
    text = critical_points_csv(pts, 2)
    assert text.splitlines()[0] == "x1,x2,value,index,eig1,eig2"
    assert text == critical_points_csv(find_critical_points(M_X4_Y2.realize(-1), Box.cube(2)), 2)
