import math

import numpy as np
import pytest

from milnor.errors import NotIsolated
from milnor.fiber import (BettiDatum, FiberSample, MilnorData, Sign, betti_quadratic, choose_milnor_data,
                          component_plateau, count_components, fiber_csv, isolated_in_ball, sample_fiber,
                          top_homology_rank)
from milnor.germ import PolynomialGerm, power_germ, quadratic_form
from milnor.morse import Morsification

X4_Y2 = PolynomialGerm.from_terms(2, {(4, 0): 1, (0, 2): -1})


def _components(f, sign=Sign.POSITIVE, n=4000):
    md = choose_milnor_data(f, sign)
    fs = sample_fiber(f, md, n)
    return fs, count_components(fs)


@pytest.mark.parametrize("k,expected", [(2, 2), (3, 1), (4, 2), (5, 1), (6, 2)])
def test_power_components(k, expected):
    fs, c = _components(power_germ(k))
    assert c == expected
    # analytic fiber: the real k-th roots of eta inside the ball
    roots = {round(fs.eta ** (1 / k), 9), round(-fs.eta ** (1 / k), 9)} if k % 2 == 0 else {round(fs.eta ** (1 / k), 9)}
    assert {round(v, 9) for v in fs.points[:, 0]} == roots


def test_negative_fiber_of_odd_power():
    fs, c = _components(power_germ(3), Sign.NEGATIVE)
    assert c == 1
    assert np.all(fs.points < 0)


def test_empty_negative_fiber():
    fs, c = _components(quadratic_form([1, 1]), Sign.NEGATIVE)
    assert len(fs) == 0 and c == 0


@pytest.mark.parametrize("signs,sign,expected", [
    ((1, 1), Sign.POSITIVE, 1),       # circle
    ((1, -1), Sign.POSITIVE, 2),      # hyperbola branches
    ((1, 1, 1), Sign.POSITIVE, 1),    # sphere
    ((1, 1, -1), Sign.POSITIVE, 1),   # one-sheeted hyperboloid
    ((1, 1, -1), Sign.NEGATIVE, 2),   # two sheets
])
def test_quadric_components(signs, sign, expected):
    assert _components(quadratic_form(signs), sign)[1] == expected


def test_x4_minus_y2_both_signs():
    assert _components(X4_Y2, Sign.POSITIVE)[1] == 2
    assert _components(X4_Y2, Sign.NEGATIVE)[1] == 2


def test_samples_lie_on_fiber():
    f = quadratic_form([1, 1, -1])
    md = choose_milnor_data(f)
    fs = sample_fiber(f, md, 2000)
    assert len(fs) == 2000
    assert np.max(np.abs(f.evaluate_many(fs.points) - md.eta)) <= 1e-10
    assert np.max(np.linalg.norm(fs.points, axis=1)) <= md.delta


def test_milnor_data_invariants():
    md = choose_milnor_data(X4_Y2)
    assert 0 < md.eta <= md.epsilon <= 1
    assert md.eta == md.epsilon / 2
    with pytest.raises(ValueError):
        MilnorData(1.0, 0.5, 0.75)


def test_isolation():
    assert isolated_in_ball(power_germ(6), 1.0)
    assert not isolated_in_ball(PolynomialGerm.from_terms(1, {(1,): 1}), 1.0)
    # x^3 - 3/16 x^2 ... has a second critical point at 1/8
    g = PolynomialGerm.from_terms(1, {(3,): 1, (2,): "-3/16"})
    assert not isolated_in_ball(g, 1.0)
    assert isolated_in_ball(g, 2 ** -4)


def test_non_isolated_origin():
    # f = x^2 * y vanishes to first order along both axes; every point of the x axis is critical
    f = PolynomialGerm.from_terms(2, {(2, 1): 1})
    with pytest.raises(NotIsolated):
        choose_milnor_data(f)


def test_sampling_is_deterministic():
    f = quadratic_form([1, -1])
    md = choose_milnor_data(f)
    a = sample_fiber(f, md, 500, seed=7)
    b = sample_fiber(f, md, 500, seed=7)
    c = sample_fiber(f, md, 500, seed=8)
    assert fiber_csv(a) == fiber_csv(b)
    assert fiber_csv(a) != fiber_csv(c)


def test_plateau_and_link_radius():
    fs, c = _components(quadratic_form([1, 1]))
    plateau = component_plateau(fs)
    assert [n for _, n in plateau] == [1] * len(plateau)
    assert plateau[-1][0] == pytest.approx(3 * plateau[0][0])
    # a radius far below the sampling density shatters the circle
    assert count_components(fs, 1e-9) > 1
    with pytest.raises(ValueError):
        count_components(fs, 0.0)


def test_hand_built_clusters():
    rng = np.random.default_rng(3)
    pts = np.vstack([rng.normal(0, 0.01, (200, 2)), rng.normal(5, 0.01, (200, 2)), rng.normal(-5, 0.01, (200, 2))])
    assert count_components(FiberSample(pts, 1.0, 1e-10)) == 3


@pytest.mark.parametrize("m,lam,expected", [
    (2, 0, BettiDatum(1, 1)), (3, 0, BettiDatum(2, 1)), (3, 1, BettiDatum(1, 1)),
    (3, 2, BettiDatum(0, 1)), (2, 2, BettiDatum(0, 0, empty_fiber=True)),
])
def test_betti_quadratic(m, lam, expected):
    assert betti_quadratic(m, lam) == expected


def test_betti_quadratic_matches_sampled_h0():
    # degree-0 entries (lambda = m - 1) mean two components; all others are connected
    for m, lam in [(2, 1), (3, 2), (2, 0), (3, 1)]:
        datum = betti_quadratic(m, lam)
        c = _components(quadratic_form([1] * (m - lam) + [-1] * lam))[1]
        assert c == (2 if datum.degree == 0 else 1)


def test_top_homology_rank():
    assert top_homology_rank(Morsification.of(quadratic_form([1, 1]), [1, 1]), "1/2") == 1
    assert top_homology_rank(Morsification.of(quadratic_form([1, 1, 1]), [1, 1, 1]), "1/2", grid_per_axis=12) == 1
    assert top_homology_rank(Morsification.of(X4_Y2, [2, 0]), "1/2") == 0
    assert top_homology_rank(Morsification.of(power_germ(2), [0], [1]), 1) == 1


def test_sign_parse():
    assert Sign.parse("+") is Sign.POSITIVE and Sign.parse("negative") is Sign.NEGATIVE
    with pytest.raises(ValueError):
        Sign.parse("sideways")
    assert math.isinf(FiberSample(np.zeros((0, 1)), 1.0, 1e-10).delta)
