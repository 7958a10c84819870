import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoscope import (PressureConfig, PressureSolver, ResourceError, beta_max, beta_min,
                         build_linear, build_mp, cohomologous_to_constant, constant, geometric,
                         indicator, is_expanding, is_hyperbolic, pressure, pressure_curve,
                         transition_points)
from thermoscope.potential import TrigSeries
from thermoscope.pressure import (CONVEX, LINEAR, UNDETERMINED, classify_zones,
                                  divided_differences)

SMALL = PressureConfig(ulam_n=256)


# ------------------------------------------------------------- config

@pytest.mark.parametrize("kwargs", [
    {"ulam_n": 0}, {"n_max": 5, "window": 10}, {"tol_flat": 0.0}, {"tol_strict": -1.0},
    {"max_period": 0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        PressureConfig(**kwargs)


def test_period_limit():
    cfg = PressureConfig()
    assert cfg.period_limit(2) == 12
    assert cfg.period_limit(3) == 12
    assert cfg.period_limit(4) == 9
    assert PressureConfig(max_period=5).period_limit(3) == 5
    with pytest.raises(ResourceError):
        PressureConfig(max_period=13).period_limit(3)


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("THERMOSCOPE_THREADS", "3")
    assert PressureConfig().n_threads() == 3
    monkeypatch.setenv("THERMOSCOPE_THREADS", "junk")
    assert PressureConfig().n_threads() == 1
    assert PressureConfig(threads=2).n_threads() == 2


# ------------------------------------------------------------ extremes

def test_beta_of_indicator(doubling):
    ind = indicator(0.5, 1.0)
    assert beta_max(doubling, ind).value == 1.0
    assert beta_min(doubling, ind).value == 0.0


def test_beta_of_mp_geometric_is_neutral_fixed_point(mp1):
    b = beta_max(mp1, geometric(mp1))
    assert b.value == 0.0
    assert b.period == 1
    lo = beta_min(mp1, geometric(mp1))
    assert lo.value < -1.0


@given(st.floats(-3, 3).filter(lambda c: abs(c) > 1e-3))
@settings(max_examples=20, deadline=None)
def test_beta_scales_with_potential(c):
    m = build_linear([2, 4, 4])
    phi = TrigSeries([0.5], [0.2])
    hi, lo = beta_max(m, phi, 6).value, beta_min(m, phi, 6).value
    scaled_hi = beta_max(m, phi.scale(c), 6).value
    expected = c * hi if c > 0 else c * lo
    assert scaled_hi == pytest.approx(expected, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("name, make, expected", [
    ("constant", lambda m: constant(0.3), True),
    ("doubling geometric", lambda m: geometric(build_linear([2, 2])), True),
    ("244 geometric", lambda m: geometric(m), False),
    ("trig", lambda m: TrigSeries([0.2]), False),
    ("indicator", lambda m: indicator(0.5, 1.0), False),
])
def test_cohomology_flag(m244, name, make, expected):
    cmap = build_linear([2, 2]) if name == "doubling geometric" else m244
    coh = cohomologous_to_constant(cmap, make(m244))
    assert coh.cohomologous is expected
    if expected:
        assert coh.spread < 1e-9


# ------------------------------------------------------------- values

def test_pressure_point_fields(doubling):
    pt = pressure(doubling, indicator(0.5, 1.0), SMALL)
    value, diag = pt
    assert value == pytest.approx(math.log(1 + math.e), abs=1e-9)
    assert diag.confidence >= abs(diag.ulam - diag.ulam_fine)
    assert diag.converged


@pytest.mark.parametrize("cmap", [build_linear([2, 2]), build_linear([2, 4, 4]), build_mp(1.0),
                                  build_mp(0.25)], ids=["doubling", "244", "mp1", "mp025"])
def test_zero_parameter_gives_entropy(cmap):
    pt = PressureSolver(cmap, TrigSeries([0.7], [0.3]), SMALL).at(0.0)
    assert pt.value == pytest.approx(math.log(cmap.degree), abs=1e-6)


def test_threaded_sweep_matches_serial(m244):
    phi = TrigSeries([0.3])
    ts = np.linspace(-1, 1, 6)
    serial = PressureSolver(m244, phi, SMALL).sweep(ts)
    threaded = PressureSolver(m244, phi, PressureConfig(ulam_n=256, threads=3)).sweep(ts)
    assert [p.value for p in serial] == [p.value for p in threaded]


# ------------------------------------------------------------- curves

def test_divided_differences_nonuniform():
    t = np.array([0.0, 0.1, 0.3, 0.35, 1.0, 2.0])
    d1, d2 = divided_differences(t, t ** 2)
    np.testing.assert_allclose(d2[1:-1], 2.0, rtol=1e-12)
    assert d1.shape == t.shape


@pytest.mark.parametrize("grid", [np.linspace(0, 1, 4), np.array([0, 1, 1, 2, 3.0]),
                                  np.array([0, 1, np.nan, 2, 3.0])])
def test_curve_grid_validation(doubling, grid):
    with pytest.raises(ValueError):
        pressure_curve(doubling, constant(0.0), grid, SMALL)


@given(st.lists(st.floats(-0.8, 0.8), min_size=1, max_size=3),
       st.lists(st.floats(-0.8, 0.8), min_size=0, max_size=2))
@settings(max_examples=8, deadline=None)
def test_curves_are_convex_and_start_at_entropy(cos, sin):
    m = build_linear([2, 4, 4])
    phi = TrigSeries(cos, sin)
    cfg = PressureConfig(ulam_n=128, max_period=6)
    curve = pressure_curve(m, phi, np.linspace(-2, 2, 9), cfg, densify=0)
    assert curve.convexity_defect() >= -1e-6
    assert curve.at(0.0) == pytest.approx(math.log(3), abs=1e-6)


def test_constant_potential_curve_is_affine(doubling):
    curve = pressure_curve(doubling, constant(-0.4), np.linspace(-2, 2, 9), SMALL)
    assert curve.cohomologous
    np.testing.assert_allclose(curve.reconciled, math.log(2) - 0.4 * curve.t, atol=1e-15)
    assert set(curve.zone) == {LINEAR}


def test_indicator_curve_is_strictly_convex(doubling):
    curve = pressure_curve(doubling, indicator(0.5, 1.0), np.linspace(-4, 4, 41), SMALL)
    exact = np.log1p(np.exp(curve.t))
    np.testing.assert_allclose(curve.reconciled, exact, atol=1e-9)
    assert set(curve.zone[1:-1]) == {CONVEX}


def test_mp_curve_zones_and_densification(mp1):
    curve = pressure_curve(mp1, geometric(mp1), np.linspace(-1, 2, 13), SMALL)
    assert curve.t.size > 13  # cells near the closing gap were bisected
    assert curve.zone[-1] == LINEAR
    assert CONVEX in curve.zone
    assert curve.convexity_defect() >= -1e-6
    assert np.all(curve.reconciled[curve.t >= 1.0] == 0.0)


def test_curve_csv(tmp_path, doubling):
    curve = pressure_curve(doubling, indicator(0.5, 1.0), np.linspace(-1, 1, 5), SMALL)
    path = tmp_path / "p.csv"
    curve.to_csv(path, header_lines=["config: {}"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# config: {}"
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["t", "P_norm_growth", "P_ulam", "P_reconciled", "d1", "d2", "zone",
                       "confidence"]
    assert len(rows) == 1 + curve.t.size
    for row, p in zip(rows[1:], curve.reconciled):
        assert float(row[3]) == p  # 17 significant digits round-trip


def test_classify_zones_rules():
    t = np.linspace(-1, 3, 9)
    d2 = np.array([0.5, 0.5, 0.5, 0.5, 0.5, 1e-6, 1e-6, 1e-6, 0.5])
    zones = classify_zones(t, d2, -math.inf, 1.5, 1e-4, 1e-4)
    assert zones[:5] == (CONVEX,) * 5
    assert zones[5:8] == (LINEAR,) * 3
    assert zones[8] == UNDETERMINED
    assert set(classify_zones(t, d2, -math.inf, math.inf, 1e-4, 1e-4, True)) == {LINEAR}


# ---------------------------------------------------- classification

def test_hyperbolicity(doubling, mp1):
    yes = is_hyperbolic(doubling, indicator(0.5, 1.0), SMALL)
    assert yes.value and yes.verdict == "yes"
    assert yes.margin == pytest.approx(math.log(1 + math.e) - 1.0, abs=1e-9)
    no = is_hyperbolic(mp1, geometric(mp1), SMALL)
    assert not no.value
    assert no.at_boundary and no.verdict == "undetermined"


def test_expanding_without_neutral_point(m244):
    res = is_expanding(m244, geometric(m244))
    assert res.value and res.margin == math.inf


def test_expanding_mp(mp1):
    g = geometric(mp1)
    assert not is_expanding(mp1, g.scale(2.0), SMALL).value
    yes = is_expanding(mp1, g.scale(0.5), SMALL)
    assert yes.value and not yes.at_boundary


# -------------------------------------------------------- transitions

def test_no_transition_for_indicator(doubling):
    rep = transition_points(doubling, indicator(0.5, 1.0), SMALL, -6, 6, 61)
    assert rep.no_transition
    assert rep.summary() == "no finite transition in window"
    assert rep.beta_max == 1.0 and rep.beta_min == 0.0
    json.dumps(rep.to_dict())


def test_cohomologous_transitions_suppressed(doubling):
    rep = transition_points(doubling, constant(1.0), SMALL, -2, 2, 9)
    assert rep.cohomologous
    assert "transitions suppressed" in rep.summary()


def test_window_must_contain_zero(doubling):
    with pytest.raises(ValueError):
        transition_points(doubling, constant(1.0), SMALL, 0.5, 2, 9)


@pytest.mark.slow
@pytest.mark.parametrize("c", [2.0, 0.5])
def test_transition_scales_inversely_with_potential(mp1, c):
    g = geometric(mp1)
    cfg = PressureConfig(ulam_n=256)
    base = transition_points(mp1, g, cfg, -2, 4, 61)
    scaled = transition_points(mp1, g.scale(c), cfg, -2 / c, 4 / c, 61)
    assert math.isfinite(base.t2)
    assert scaled.t2 == pytest.approx(base.t2 / c, abs=2 * cfg.bisect_tol / min(c, 1))
    assert scaled.t1 == base.t1 == -math.inf
    assert scaled.beta_max == pytest.approx(c * base.beta_max, abs=1e-15)


@pytest.mark.slow
def test_negative_scaling_swaps_sides(mp1):
    g = geometric(mp1)
    cfg = PressureConfig(ulam_n=256)
    rep = transition_points(mp1, g.scale(-1.0), cfg, -4, 2, 31)
    assert rep.t2 == math.inf
    assert rep.t1 == pytest.approx(-1.0, abs=0.1)
    assert rep.beta_min == 0.0
