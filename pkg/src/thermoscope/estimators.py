"""scikit-learn style wrappers around the pressure and spectrum pipelines.

    est = PressureEstimator(ulam_n=512).fit(build_linear([2, 2]), geometric_potential)
    est.predict([0.0, 1.0])
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .circle_map import CircleMap
from .potential import Potential
from .pressure import PressureConfig, PressureCurve, PressureSolver, pressure_curve, transition_points
from .spectra import birkhoff_spectrum, rate_function


def _check_pair(cmap, phi):
    if not isinstance(cmap, CircleMap):
        raise TypeError(f"expected a CircleMap, got {type(cmap).__name__}")
    if not isinstance(phi, Potential):
        raise TypeError(f"expected a Potential, got {type(phi).__name__}")


def _as_1d(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim > 1:
        raise ValueError(f"{name} must be 1-d or a single column")
    arr = np.atleast_1d(arr)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


class PressureEstimator(BaseEstimator):
    """``t -> P(f, t phi)`` for a fixed map and potential.

    ``fit`` only builds the discretisations; ``predict`` solves one Ulam
    eigenproblem pair per requested ``t``.
    """

    def __init__(self, ulam_n=1024, n_max=60, window=10, refine_depth=12, max_iter=20000,
                 tol_flat=1e-4, tol_strict=1e-4, max_period=None, threads=None):
        self.ulam_n = ulam_n
        self.n_max = n_max
        self.window = window
        self.refine_depth = refine_depth
        self.max_iter = max_iter
        self.tol_flat = tol_flat
        self.tol_strict = tol_strict
        self.max_period = max_period
        self.threads = threads

    def _config(self) -> PressureConfig:
        return PressureConfig(ulam_n=self.ulam_n, n_max=self.n_max, window=self.window,
                              refine_depth=self.refine_depth, max_iter=self.max_iter,
                              tol_flat=self.tol_flat, tol_strict=self.tol_strict,
                              max_period=self.max_period, threads=self.threads)

    def fit(self, cmap, phi):
        _check_pair(cmap, phi)
        self.config_ = self._config()
        if self.config_.ulam_n < cmap.degree:
            raise ValueError(f"ulam_n={self.ulam_n} is below the map degree {cmap.degree}")
        self.cmap_ = cmap
        self.phi_ = phi
        self.solver_ = PressureSolver(cmap, phi, self.config_)
        self.h_top_ = cmap.h_top
        return self

    def _check_fitted(self):
        if not hasattr(self, "solver_"):
            raise NotFittedError("call fit(cmap, phi) first")

    def predict(self, t) -> np.ndarray:
        self._check_fitted()
        ts = _as_1d(t, "t")
        return np.array([p.value for p in self.solver_.sweep(ts)])

    def predict_points(self, t):
        """Full ``PressurePoint`` records (all estimators and the confidence)."""
        self._check_fitted()
        return self.solver_.sweep(_as_1d(t, "t"))

    def curve(self, t_grid, densify=6) -> PressureCurve:
        self._check_fitted()
        return pressure_curve(self.cmap_, self.phi_, t_grid, self.config_, self.solver_,
                              densify=densify)

    def transitions(self, t_lo=-6.0, t_hi=6.0, samples=121):
        self._check_fitted()
        return transition_points(self.cmap_, self.phi_, self.config_, t_lo, t_hi, samples,
                                 solver=self.solver_)


class SpectrumEstimator(TransformerMixin, BaseEstimator):
    """Rate function and Birkhoff entropy spectrum from a pressure curve.

    Fit either on a ready ``PressureCurve`` or on ``(cmap, phi)``, in which
    case the curve is sampled on ``linspace(t_min, t_max, t_samples)``.
    ``transform(s)`` returns ``I(s)``; ``entropy(s)`` returns ``h_top - I(s)``.
    """

    def __init__(self, t_min=-6.0, t_max=6.0, t_samples=121, ulam_n=1024, n_s=401,
                 tol_flat=1e-4, tol_strict=1e-4, max_period=None):
        self.t_min = t_min
        self.t_max = t_max
        self.t_samples = t_samples
        self.ulam_n = ulam_n
        self.n_s = n_s
        self.tol_flat = tol_flat
        self.tol_strict = tol_strict
        self.max_period = max_period

    def fit(self, X, phi=None):
        if isinstance(X, PressureCurve):
            curve, report = X, None
        else:
            _check_pair(X, phi)
            if not self.t_min < 0 < self.t_max:
                raise ValueError("t window must contain 0 in its interior")
            cfg = PressureConfig(ulam_n=self.ulam_n, tol_flat=self.tol_flat,
                                 tol_strict=self.tol_strict, max_period=self.max_period)
            solver = PressureSolver(X, phi, cfg)
            curve = pressure_curve(X, phi, np.linspace(self.t_min, self.t_max, self.t_samples),
                                   cfg, solver)
            report = transition_points(X, phi, cfg, self.t_min, self.t_max, curve=curve,
                                       solver=solver)
        self.curve_ = curve
        self.transitions_ = report
        self.rate_ = rate_function(curve, report, n_s=self.n_s)
        self.s_star_ = self.rate_.s_star
        self.support_ = (self.rate_.beta_min, self.rate_.beta_max)
        return self

    def _check_fitted(self):
        if not hasattr(self, "rate_"):
            raise NotFittedError("call fit first")

    def transform(self, s) -> np.ndarray:
        self._check_fitted()
        return np.asarray(self.rate_(_as_1d(s, "s")), dtype=float)

    def entropy(self, s) -> np.ndarray:
        self._check_fitted()
        return self.rate_.h_top - self.transform(s)

    def spectrum(self, intervals):
        """``SpectrumResult`` for each ``(a, b)``."""
        self._check_fitted()
        return [birkhoff_spectrum(self.rate_, a, b) for a, b in intervals]
