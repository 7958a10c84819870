import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoscope import InvalidMapError, build_linear, build_mp, build_piecewise_poly, map_from_spec
from thermoscope.circle_map import MPParams
from thermoscope.exceptions import DomainError, ResourceError


@pytest.mark.parametrize("slopes", [[2, 2], [2, 4, 4], [3, 3, 3], [4, 4, 4, 4], [3, 1.5]])
def test_linear_maps_are_full_branch(slopes):
    m = build_linear(slopes)
    assert m.degree == len(slopes)
    assert m.h_top == pytest.approx(math.log(len(slopes)))
    assert np.all(m.eval(m.break_points) == 0.0)
    xs = np.linspace(0, 1, 50, endpoint=False)
    idx, _ = m.locate(xs)
    np.testing.assert_allclose(m.deriv(xs), np.asarray(slopes, float)[idx])


@pytest.mark.parametrize("slopes, msg", [
    ([2], "at least two"),
    ([2, 3], "sum to"),
    ([0.5, 2], ">= 1"),
    ([2, float("inf")], "finite"),
])
def test_linear_map_validation(slopes, msg):
    with pytest.raises(InvalidMapError, match=msg):
        build_linear(slopes)


def test_doubling_values(doubling):
    assert doubling.eval(0.3) == pytest.approx(0.6)
    assert doubling.eval(0.75) == pytest.approx(0.5)
    assert doubling.eval(0.5) == 0.0
    assert doubling.name == "doubling"


@given(st.floats(0, 1, exclude_max=True), st.sampled_from([0.0, 0.25, 0.5, 1.0]))
@settings(max_examples=60, deadline=None)
def test_inverse_branches_invert(x, alpha):
    m = build_mp(alpha)
    pre = m.preimages(x)
    assert pre.shape == (2, 1)
    for k in range(2):
        y = pre[k, 0]
        assert m.branches[k].start - 1e-12 <= y <= m.branches[k].end + 1e-12
        back = m.branches[k].forward(np.array([y]))[0]
        assert back == pytest.approx(x, abs=1e-11)


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_mp_has_single_neutral_fixed_point(alpha):
    m = build_mp(alpha)
    assert m.neutral_points == (0.0,)
    assert m.deriv(0.0, "right") == pytest.approx(1.0)
    assert m.deriv(0.0, "left") == pytest.approx(1.0)
    assert m.eval(0.0) == 0.0
    ys = np.linspace(1e-3, 1, 2001, endpoint=False)
    assert np.all(m.deriv(ys) > 1.0)


def test_mp_coefficients_known_cases():
    p1 = MPParams.from_alpha(1.0)
    p0 = MPParams.from_alpha(0.0)
    assert (p1.a, p1.b) == (20.0, -24.0)
    assert (p0.a, p0.b) == (8.0, -8.0)
    for alpha in (0.25, 0.5, 0.75):
        p = MPParams.from_alpha(alpha)
        assert float(p.g(0.5)) == pytest.approx(1.0, abs=1e-14)
        assert float(p.dg(0.0)) == 1.0


@pytest.mark.parametrize("alpha", [-0.1, 1.5])
def test_mp_alpha_range(alpha):
    with pytest.raises(DomainError):
        build_mp(alpha)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_periodic_points_one_per_itinerary(m244, n):
    pp = m244.periodic_points(n)
    assert len(pp) == 3 ** n
    x = pp.points
    y = x.copy()
    for _ in range(n):
        y = m244.eval(y)
    d = np.abs(y - x)
    assert np.all(np.minimum(d, 1 - d) < 1e-9)


def test_periodic_points_cached_and_readonly(doubling):
    a = doubling.periodic_points(4)
    b = doubling.periodic_points(4)
    assert a is b
    with pytest.raises(ValueError):
        a.orbits[0, 0] = 0.3


def test_periodic_cap(doubling):
    with pytest.raises(ResourceError):
        doubling.periodic_points(20)


def test_orbit_averages_of_geometric_on_linear_map(m244):
    from thermoscope import geometric
    pp = m244.periodic_points(2)
    avg = pp.orbit_averages(geometric(m244), m244)
    counts4 = np.sum(pp.itineraries > 1, axis=1)
    np.testing.assert_allclose(avg, -(counts4 * math.log(4) + (2 - counts4) * math.log(2)) / 2)


def test_birkhoff_sum_runs_from_zero(doubling):
    from thermoscope import indicator
    # 1/3 -> 2/3 -> 1/3: only the second point lies in [1/2, 1)
    assert doubling.birkhoff_sum(indicator(0.5, 1.0), 1 / 3, 2) == 1.0
    assert doubling.birkhoff_sum(indicator(0.5, 1.0), 1 / 3, 1) == 0.0


def test_piecewise_poly_map():
    m = build_piecewise_poly([
        {"domain": [0.0, 0.5], "coeffs": [0.0, 1.5, 1.0]},
        {"domain": [0.5, 1.0], "coeffs": [0.0, 2.5, -1.0]},
    ])
    assert m.degree == 2
    assert m.eval(0.25) == pytest.approx(1.5 * 0.25 + 0.0625)
    assert m.deriv(0.5, "left") == pytest.approx(2.5)
    assert m.deriv(0.5, "right") == pytest.approx(2.5)
    assert m.neutral_points == ()


@pytest.mark.parametrize("branches, msg", [
    ([{"domain": [0.0, 0.5], "coeffs": [0.0, 2.0]}], "at least 2"),
    ([{"domain": [0.0, 0.5], "coeffs": [0.0, 2.0]}, {"domain": [0.5, 0.9], "coeffs": [0.0, 2.5]}],
     "end at 1"),
    ([{"domain": [0.0, 0.5], "coeffs": [0.0, 3.0]}, {"domain": [0.5, 1.0], "coeffs": [0.0, 2.0]}],
     "not full"),
    ([{"domain": [0.0, 0.5], "coeffs": [0.0, 4.0, -4.0]},
      {"domain": [0.5, 1.0], "coeffs": [0.0, 2.0]}], "derivative vanishes|not full"),
    ([{"domain": [0.0, 0.5]}, {"domain": [0.5, 1.0], "coeffs": [0.0, 2.0]}], "coeffs"),
])
def test_piecewise_poly_validation(branches, msg):
    with pytest.raises(InvalidMapError, match=msg):
        build_piecewise_poly(branches)


def test_contracting_break_point_is_flagged():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        m = build_piecewise_poly([
            {"domain": [0.0, 0.5], "coeffs": [0.0, 0.5, 3.0]},
            {"domain": [0.5, 1.0], "coeffs": [0.0, 2.0]},
        ])
    assert any("|Df| < 1" in f for f in m.flags)
    assert caught


@pytest.mark.parametrize("spec, degree", [
    ({"type": "linear_full_branch", "slopes": [2, 4, 4]}, 3),
    ({"type": "manneville_pomeau", "alpha": 0.5}, 2),
    ({"type": "piecewise_poly", "branches": [{"domain": [0, 0.5], "coeffs": [0, 2]},
                                             {"domain": [0.5, 1], "coeffs": [0, 2]}]}, 2),
])
def test_from_spec(spec, degree):
    m = map_from_spec(spec)
    assert m.degree == degree
    assert m.descriptor["type"] == spec["type"]


@pytest.mark.parametrize("spec", [{}, [], {"type": "tent"}, {"type": "manneville_pomeau"}])
def test_from_spec_rejects(spec):
    with pytest.raises(InvalidMapError):
        map_from_spec(spec)
