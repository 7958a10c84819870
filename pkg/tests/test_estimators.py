import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from thermoscope import (PressureConfig, PressureEstimator, SpectrumEstimator, geometric,
                         indicator, pressure_curve)


def test_pressure_estimator_params():
    est = PressureEstimator(ulam_n=128, tol_flat=1e-3)
    params = est.get_params()
    assert params["ulam_n"] == 128 and params["tol_flat"] == 1e-3
    est.set_params(ulam_n=64)
    assert clone(est).ulam_n == 64
    assert "ulam_n=64" in repr(est)


def test_pressure_estimator_predicts_closed_form(m244):
    est = PressureEstimator(ulam_n=256).fit(m244, geometric(m244))
    t = np.array([-1.0, 0.0, 1.0, 2.0])
    np.testing.assert_allclose(est.predict(t), np.log(2.0 ** -t + 2 * 4.0 ** -t), atol=1e-12)
    assert est.predict(0.5).shape == (1,)
    assert est.predict(t.reshape(-1, 1)).shape == (4,)
    assert est.h_top_ == pytest.approx(math.log(3))
    pts = est.predict_points([0.0])
    assert pts[0].confidence < 1e-9


def test_pressure_estimator_curve_and_transitions(doubling):
    est = PressureEstimator(ulam_n=128).fit(doubling, indicator(0.5, 1.0))
    curve = est.curve(np.linspace(-2, 2, 9))
    assert curve.convexity_defect() >= -1e-6
    assert est.transitions(-3, 3, 31).no_transition


def test_pressure_estimator_validation(doubling):
    est = PressureEstimator(ulam_n=128)
    with pytest.raises(NotFittedError):
        est.predict([0.0])
    with pytest.raises(TypeError):
        est.fit("doubling", geometric(doubling))
    with pytest.raises(TypeError):
        est.fit(doubling, lambda x: x)
    with pytest.raises(ValueError):
        PressureEstimator(ulam_n=1).fit(doubling, geometric(doubling))
    est.fit(doubling, geometric(doubling))
    with pytest.raises(ValueError):
        est.predict([0.0, np.nan])
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 2)))


def test_spectrum_estimator_from_map(doubling):
    est = SpectrumEstimator(ulam_n=128, t_samples=121).fit(doubling, indicator(0.5, 1.0))
    s = np.array([0.2, 0.5, 0.7])
    exact = math.log(2) + s * np.log(s) + (1 - s) * np.log(1 - s)
    np.testing.assert_allclose(est.transform(s), exact, atol=1e-6)
    np.testing.assert_allclose(est.entropy(s), math.log(2) - exact, atol=1e-6)
    assert est.s_star_ == pytest.approx(0.5)
    assert est.support_ == (0.0, 1.0)
    res = est.spectrum([(0.4, 0.6), (0.25, 0.25)])
    assert res[0].h_x == pytest.approx(math.log(2))


def test_spectrum_estimator_from_curve(doubling):
    curve = pressure_curve(doubling, indicator(0.5, 1.0), np.linspace(-6, 6, 121),
                           PressureConfig(ulam_n=128))
    est = SpectrumEstimator().fit(curve)
    assert est.transitions_ is None
    assert est.transform([0.5])[0] == pytest.approx(0.0, abs=1e-9)


def test_spectrum_estimator_validation(doubling):
    with pytest.raises(NotFittedError):
        SpectrumEstimator().transform([0.5])
    with pytest.raises(ValueError):
        SpectrumEstimator(t_min=0.5).fit(doubling, indicator(0.5, 1.0))
