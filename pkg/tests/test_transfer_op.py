import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoscope import (apply, build_linear, build_mp, constant, ess_radius_bound, geometric,
                         growth_rate_pressure, indicator, leading_eigenpair, spectral_report,
                         subleading_modulus, ulam_matrix)
from thermoscope.potential import TrigSeries
from thermoscope.transfer_op import (CollocationOperator, GridFunction, UlamDiscretization,
                                     base_partition, ess_radius_bound_bv, spectral_sweep)


def test_base_partition_contains_breaks_and_refines_neutral_point(mp1, m244):
    e = base_partition(m244, 64)
    assert e[0] == 0.0 and e[-1] == 1.0
    assert np.all(np.diff(e) > 0)
    assert {0.5, 0.75} <= set(e.tolist())
    fine = base_partition(mp1, 64)
    assert fine[1] < 1.0 / 64 / 1000
    assert 1 - fine[-2] < 1.0 / 64 / 1000


# --------------------------------------------------------------- apply

@given(st.lists(st.floats(-5, 5), min_size=64, max_size=64),
       st.lists(st.floats(-5, 5), min_size=64, max_size=64), st.floats(-3, 3))
@settings(max_examples=25, deadline=None)
def test_apply_is_linear(a, b, c):
    m = build_linear([2, 4, 4])
    phi = TrigSeries([0.4], [0.2])
    g = GridFunction.on_map_grid(m, 64)
    ga, gb = g.with_values(a), g.with_values(b)
    lhs = apply(m, phi, ga.with_values(np.asarray(a) + c * np.asarray(b)))
    rhs = apply(m, phi, ga).values + c * apply(m, phi, gb).values
    np.testing.assert_allclose(lhs.values, rhs, atol=1e-9 * (1 + np.max(np.abs(rhs))))


MP_GRID = GridFunction.on_map_grid(build_mp(1.0), 64)


@given(st.lists(st.floats(0, 10), min_size=MP_GRID.size, max_size=MP_GRID.size))
@settings(max_examples=25, deadline=None)
def test_apply_preserves_positivity(vals):
    m = build_mp(1.0)
    g = MP_GRID
    out = apply(m, geometric(m), g.with_values(vals))
    assert np.all(out.values >= 0)
    if max(vals) > 0:
        assert out.values.max() > 0


def test_apply_constant_function():
    m = build_linear([2, 4, 4])
    g = GridFunction.on_map_grid(m, 128)
    out = apply(m, constant(0.0), g)
    np.testing.assert_allclose(out.values, 3.0)
    out = apply(m, geometric(m), g)
    np.testing.assert_allclose(out.values, 0.5 + 0.25 + 0.25)


def test_grid_function_is_periodic():
    g = GridFunction(np.array([0.0, 0.5]), np.array([0.0, 1.0]))
    assert g(0.75) == pytest.approx(0.5)
    assert g(1.25) == pytest.approx(0.5)
    assert g.sup_norm() == 1.0


# ---------------------------------------------------------------- Ulam

@pytest.mark.parametrize("cmap", [build_linear([2, 2]), build_linear([2, 4, 4]), build_mp(1.0),
                                  build_mp(0.5)], ids=["doubling", "244", "mp1", "mp05"])
def test_lebesgue_is_left_eigenvector_of_geometric(cmap):
    U = ulam_matrix(cmap, geometric(cmap), 128)
    M = U.dense()
    np.testing.assert_allclose(U.widths @ M, U.widths, rtol=1e-12, atol=1e-15)


def test_ulam_column_masses_for_zero_potential(m244):
    U = ulam_matrix(m244, constant(0.0), 96)
    # integral of |Df| over a cell: the image length, which equals 3 cells worth at t = 0
    col = U.widths @ U.dense()
    np.testing.assert_allclose(col / U.widths, np.array([m244.deriv(x) for x in U.midpoints]),
                               rtol=1e-12)


def test_ulam_needs_degree_cells(m244):
    with pytest.raises(ValueError):
        UlamDiscretization(m244, constant(0.0), 2)


def test_ulam_log_scale_keeps_large_t_finite(doubling):
    U = UlamDiscretization(doubling, geometric(doubling), 64).at(-400.0)
    lead = leading_eigenpair(U)
    assert lead.log_lam == pytest.approx(401 * math.log(2), rel=1e-12)
    assert math.isinf(lead.lam) or lead.lam > 1e100


def test_ulam_csv(tmp_path, doubling):
    U = ulam_matrix(doubling, geometric(doubling), 8)
    U.to_csv(tmp_path / "u.csv")
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "row,col,weight"
    assert len(lines) == 1 + U.matrix.nnz


# --------------------------------------------------------- eigen data

@pytest.mark.parametrize("slopes, t", [([2, 2], 0.0), ([2, 2], 1.0), ([2, 4, 4], -1.0),
                                       ([2, 4, 4], 2.0)])
def test_leading_eigenvalue_closed_form(slopes, t):
    m = build_linear(slopes)
    U = UlamDiscretization(m, geometric(m), 256).at(t)
    lead = leading_eigenpair(U)
    assert lead.converged
    assert lead.lam == pytest.approx(sum(s ** -t * 1.0 for s in slopes), rel=1e-12)
    assert lead.nu.sum() == pytest.approx(1.0)
    assert float(lead.h @ lead.nu) == pytest.approx(1.0)
    assert lead.bracket[0] <= lead.lam * (1 + 1e-12) and lead.lam <= lead.bracket[1] * (1 + 1e-12)


def test_leading_vectors_are_eigenvectors(mp1):
    U = ulam_matrix(mp1, TrigSeries([0.5], [0.3]), 256)
    lead = leading_eigenpair(U)
    M = U.dense()
    assert lead.converged
    # residuals are controlled relative to the sup norm of each vector
    tol_h = 1e-9 * lead.lam * lead.h.max()
    tol_nu = 1e-9 * lead.lam * lead.nu.max()
    assert np.max(np.abs(M @ lead.h - lead.lam * lead.h)) <= tol_h
    assert np.max(np.abs(lead.nu @ M - lead.lam * lead.nu)) <= tol_nu
    assert np.all(lead.h > 0)


def test_leading_eigenvalue_matches_dense(mp1):
    U = UlamDiscretization(mp1, geometric(mp1), 200).at(0.4)
    lead = leading_eigenpair(U)
    ev = np.linalg.eigvals(U.dense())
    assert lead.lam == pytest.approx(float(np.max(np.abs(ev))), rel=1e-10)


@pytest.mark.parametrize("case", ["mp_geometric_t0.3", "mp_geometric_t0.8", "mp_trig",
                                  "doubling_trig", "mp05_trig"])
def test_subleading_matches_dense_eig(case):
    if case.startswith("mp_geometric"):
        m = build_mp(1.0)
        U = UlamDiscretization(m, geometric(m), 200).at(float(case.split("_t")[1]))
    elif case == "mp_trig":
        U = ulam_matrix(build_mp(1.0), TrigSeries([0.5], [0.25]), 200)
    elif case == "mp05_trig":
        U = ulam_matrix(build_mp(0.5), TrigSeries([0.2, 0.1], [0.4]), 160)
    else:
        U = ulam_matrix(build_linear([2, 2]), TrigSeries([0.6], [0.1]), 200)
    lead = leading_eigenpair(U)
    sub = subleading_modulus(U, lead)
    mods = np.sort(np.abs(np.linalg.eigvals(U.dense())))[::-1]
    assert lead.lam == pytest.approx(mods[0], rel=1e-10)
    assert sub.modulus == pytest.approx(mods[1], rel=1e-6, abs=1e-6)
    assert sub.gap_ratio == pytest.approx(mods[1] / mods[0], rel=1e-6, abs=1e-6)
    assert not sub.flagged


def test_subleading_vanishes_for_rank_one_operator(doubling):
    # geometric potential on the doubling map projects onto constants
    U = ulam_matrix(doubling, geometric(doubling), 64)
    sub = subleading_modulus(U, leading_eigenpair(U))
    assert sub.modulus == pytest.approx(0.0, abs=1e-12)


# ------------------------------------------------------- norm growth

@pytest.mark.parametrize("slopes", [[2, 2], [2, 4, 4], [3, 3, 3]])
def test_growth_rate_linear_maps(slopes):
    m = build_linear(slopes)
    g = growth_rate_pressure(m, constant(0.0), grid_n=256)
    assert g.value == pytest.approx(math.log(len(slopes)), abs=1e-12)
    g = growth_rate_pressure(m, indicator(0.5, 1.0), grid_n=1024)
    assert not math.isnan(g.value)


def test_growth_rate_flags_slow_convergence(mp1):
    g = growth_rate_pressure(mp1, geometric(mp1), grid_n=1024)
    assert g.value > 0
    assert g.low_confidence


def test_growth_rate_window_validation(doubling):
    op = CollocationOperator(doubling, constant(0.0), base_partition(doubling, 16)[:-1])
    from thermoscope.transfer_op import growth_rate_from_operator
    with pytest.raises(ValueError):
        growth_rate_from_operator(op, n_max=5, window=10)


# -------------------------------------------------- essential radius

def test_essential_bound_certificate(mp1):
    g = geometric(mp1)
    good = ess_radius_bound(mp1, g.scale(0.2), 1.0)
    bad = ess_radius_bound(mp1, g.scale(1.5), 1.0)
    assert good.certificate and good.margin > 1e-3
    assert good.bound < good.rho
    assert not bad.certificate
    assert bad.margin < 1e-3


def test_essential_bound_bv_is_upper_bound_only(m244):
    er = ess_radius_bound_bv(m244, indicator(0.5, 1.0), max_period=6)
    assert er.upper_bound_only
    assert er.bound == pytest.approx(math.e)  # max orbit average of the indicator is 1
    assert er.certificate


def test_spectral_report_and_sweep(mp1):
    rep = spectral_report(mp1, geometric(mp1).scale(0.5), n=256)
    assert rep.converged
    assert 0 < rep.gap_ratio < 1
    assert rep.h.size > 256  # refined near the neutral point
    rows = list(spectral_sweep(mp1, geometric(mp1), [0.2, 0.6], n=256))
    assert [r["t"] for r in rows] == [0.2, 0.6]
    assert rows[0]["ratio"] < rows[1]["ratio"]
    rep_bv = spectral_report(build_linear([2, 4, 4]), indicator(0.5, 1.0), n=128)
    assert any("BV" in f for f in rep_bv.flags)
