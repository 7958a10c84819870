"""Large deviations and Birkhoff spectra from a pressure curve.

With ``E(t) = P(t phi) - h_top`` on the strictly convex zone, the rate
function is ``I(s) = sup_t (s t - E(t))`` and the entropy of the level set of
Birkhoff averages in ``[a, b]`` is ``h_top - inf_{[a, b]} I``. Outside the
zone's slope range ``[lam_min, lam_max]`` the pressure is affine in ``t``
(slopes ``beta_min`` / ``beta_max``), which makes ``I`` affine there too.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import DomainError, ResolutionError
from .pressure import CONVEX, PressureCurve, TransitionReport, _sample_transitions

DELTA1, DELTA2, DELTA3 = "Delta1", "Delta2", "Delta3"
MIN_ZONE = 5


@dataclass(frozen=True)
class FreeEnergy:
    t: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        return np.interp(t, self.t, self.values)


def _convex_run(curve: PressureCurve) -> slice:
    """Contiguous run of strictly convex samples around t = 0."""
    zone = np.array([z == CONVEX for z in curve.zone])
    i0 = int(np.argmin(np.abs(curve.t)))
    if not zone[i0]:
        return slice(i0, i0)
    lo = i0
    while lo > 0 and zone[lo - 1]:
        lo -= 1
    hi = i0
    while hi + 1 < zone.size and zone[hi + 1]:
        hi += 1
    return slice(lo, hi + 1)


def free_energy(curve: PressureCurve) -> FreeEnergy:
    """``P(t phi) - h_top`` restricted to the strictly convex zone around 0.

    Cohomologous-to-constant curves have no convex zone; they come back whole,
    since the affine formula is exact there.
    """
    if curve.cohomologous:
        return FreeEnergy(curve.t.copy(), curve.reconciled - curve.h_top)
    sl = _convex_run(curve)
    return FreeEnergy(curve.t[sl].copy(), curve.reconciled[sl] - curve.h_top)


def _one_sided_slope(t, p, side):
    """Three-point one-sided derivative at the first (``left``) or last sample."""
    if side == "left":
        x0, x1, x2 = t[:3]
        y0, y1, y2 = p[:3]
        h1, h2 = x1 - x0, x2 - x0
    else:
        x0, x1, x2 = t[-1], t[-2], t[-3]
        y0, y1, y2 = p[-1], p[-2], p[-3]
        h1, h2 = x1 - x0, x2 - x0
    # derivative at x0 of the quadratic through the three points
    return (-(h1 + h2) / (h1 * h2) * y0 + h2 / (h1 * (h2 - h1)) * y1
            - h1 / (h2 * (h2 - h1)) * y2)


@dataclass(frozen=True)
class RateFunction:
    s: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    lam_min: float
    lam_max: float
    beta_min: float
    beta_max: float
    s_star: float
    t1: float
    t2: float
    h_top: float
    degenerate: bool = False
    continuity_gap: tuple[float, float] = (0.0, 0.0)
    s_tol: float = 1e-6
    _knots_s: np.ndarray = field(default=None, repr=False)
    _knots_t: np.ndarray = field(default=None, repr=False)
    _energy: object = field(default=None, repr=False)

    @property
    def left_resolved(self) -> bool:
        return math.isfinite(self.t1) or self.lam_min <= self.beta_min

    @property
    def right_resolved(self) -> bool:
        return math.isfinite(self.t2) or self.lam_max >= self.beta_max

    def t_of_s(self, s):
        """Parameter ``t`` whose pressure slope equals ``s`` (interior only)."""
        return np.interp(s, self._knots_s, self._knots_t)

    def _interior(self, s):
        t = self.t_of_s(s)
        return s * t - self._energy(t)

    def __call__(self, s):
        """Pointwise ``I(s)``: ``inf`` outside the spectrum, ``nan`` on unresolved flanks."""
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.full(s.shape, np.nan)
        if self.degenerate:
            out = np.where(np.abs(s - self.s_star) <= self.s_tol, 0.0, np.inf)
            return float(out[0]) if scalar else out
        out[(s < self.beta_min) | (s > self.beta_max)] = np.inf
        mid = (s >= self.lam_min) & (s <= self.lam_max)
        out[mid] = np.maximum(self._interior(s[mid]), 0.0)
        left = (s >= self.beta_min) & (s < self.lam_min)
        if math.isfinite(self.t1):
            out[left] = self.h_top + self.t1 * (s[left] - self.beta_min)
        right = (s > self.lam_max) & (s <= self.beta_max)
        if math.isfinite(self.t2):
            out[right] = self.h_top - self.t2 * (self.beta_max - s[right])
        return float(out[0]) if scalar else out

    def tau_hat(self, s):
        """Entropy spectrum ``h_top - I(s)`` (``nan`` where unresolved)."""
        return self.h_top - self(s)

    def zone_of(self, s) -> str:
        if s < self.beta_min or s > self.beta_max:
            return "outside"
        if s < self.lam_min:
            return "left-flank" if math.isfinite(self.t1) else "unresolved"
        if s > self.lam_max:
            return "right-flank" if math.isfinite(self.t2) else "unresolved"
        return "interior"

    def to_csv(self, path, n: int = 401, header_lines=()):
        if self.degenerate:
            grid = np.array([self.s_star])
        else:
            grid = np.unique(np.concatenate([np.linspace(self.beta_min, self.beta_max, n),
                                             self.s, [self.lam_min, self.lam_max]]))
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "I", "tau_hat", "zone"])
            for s in grid:
                i = self(float(s))
                w.writerow([f"{s:.17g}", _fmt(i), _fmt(self.h_top - i), self.zone_of(float(s))])


def _fmt(x):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def rate_function(curve: PressureCurve, transitions: TransitionReport | None = None,
                  n_s: int = 401, s_tol: float = 1e-6) -> RateFunction:
    """Discrete Legendre transform of the free energy by slope matching.

    Each ``s`` in ``[lam_min, lam_max]`` is matched to the ``t`` where the
    monotone piecewise slope of ``P`` equals ``s``; ``I(s) = s t - E(t)`` with
    ``E`` a cubic spline through the zone samples.
    """
    h_top = curve.h_top
    if curve.cohomologous:
        c = curve.beta_max
        return RateFunction(np.array([c]), np.array([0.0]), c, c, c, c, c, -math.inf,
                            math.inf, h_top, degenerate=True, s_tol=s_tol)
    if transitions is not None:
        t1, t2 = transitions.t1, transitions.t2
        bmin, bmax = transitions.beta_min, transitions.beta_max
    else:
        bmin, bmax = curve.beta_min, curve.beta_max
        t1, t2 = _sample_transitions(curve.t, curve.reconciled, bmax, bmin,
                                     curve.config.tol_flat)
    fe = free_energy(curve)
    if fe.t.size < MIN_ZONE:
        raise ResolutionError(f"strictly convex zone has {fe.t.size} samples, need {MIN_ZONE}")
    t, e = fe.t, fe.values
    lam_min = float(_one_sided_slope(t, e, "left"))
    lam_max = float(_one_sided_slope(t, e, "right"))
    slopes = np.diff(e) / np.diff(t)
    knots_s = np.concatenate([[lam_min], slopes, [lam_max]])
    knots_s = np.maximum.accumulate(knots_s)  # guard against round-off wiggles
    mids = 0.5 * (t[:-1] + t[1:])
    knots_t = np.concatenate([[t[0]], mids, [t[-1]]])
    energy = CubicSpline(t, e)
    if t[0] <= 0.0 <= t[-1]:
        s_star = float(energy(0.0, 1))
    else:
        s_star = float(np.interp(0.0, knots_t, knots_s))
    grid = np.unique(np.concatenate([np.linspace(lam_min, lam_max, n_s), [s_star]]))
    rate = RateFunction(grid, np.zeros_like(grid), lam_min, lam_max, float(bmin), float(bmax),
                        s_star, float(t1), float(t2), h_top, s_tol=s_tol,
                        _knots_s=knots_s, _knots_t=knots_t, _energy=energy)
    vals = np.maximum(rate._interior(grid), 0.0)
    # affine flanks should meet the interior at lam_min / lam_max
    gaps = [0.0, 0.0]
    if math.isfinite(t1):
        gaps[0] = float(h_top + t1 * (lam_min - bmin) - rate._interior(np.array([lam_min]))[0])
    if math.isfinite(t2):
        gaps[1] = float(h_top - t2 * (bmax - lam_max) - rate._interior(np.array([lam_max]))[0])
    return RateFunction(grid, vals, lam_min, lam_max, float(bmin), float(bmax), s_star,
                        float(t1), float(t2), h_top, False, (gaps[0], gaps[1]), s_tol,
                        knots_s, knots_t, energy)


# --------------------------------------------------------------- intervals

@dataclass(frozen=True)
class SpectrumResult:
    interval: tuple[float, float]
    ld: float
    h_x: float
    region: str
    resolved: bool = True
    clamped: bool = False
    tau_hat: tuple[tuple[float, float], ...] = field(default=(), repr=False)
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"interval": list(self.interval), "LD": self.ld, "h_X": self.h_x,
                "region": self.region, "resolved": self.resolved, "clamped": self.clamped,
                "warnings": list(self.warnings)}


def _clamp(rate: RateFunction, a: float, b: float):
    if a > b:
        raise DomainError(f"empty interval [{a}, {b}]")
    lo, hi = rate.beta_min, rate.beta_max
    if rate.degenerate:
        lo = hi = rate.s_star
        if b < lo - rate.s_tol or a > hi + rate.s_tol:
            raise DomainError(f"[{a}, {b}] misses the one-point spectrum {{{rate.s_star}}}")
        return lo, hi, (a, b) != (lo, hi)
    if b < lo or a > hi:
        raise DomainError(f"[{a}, {b}] is disjoint from the Birkhoff spectrum [{lo}, {hi}]")
    ca, cb = max(a, lo), min(b, hi)
    return ca, cb, (ca, cb) != (a, b)


def _closest_to_mean(rate: RateFunction, a: float, b: float) -> float:
    return min(max(rate.s_star, a), b)


def region_of(rate: RateFunction, a: float, b: float) -> str:
    """Region of ``[a, b]``, i.e. where ``inf I`` over it is attained."""
    return delta_regions(rate).classify(a, b)


def _ld(rate: RateFunction, a: float, b: float):
    """``-inf_{[a, b]} I`` and whether it is exact (vs an upper bound)."""
    if region_of(rate, a, b) == DELTA2:
        return 0.0, True
    c = _closest_to_mean(rate, a, b)
    val = rate(c)
    if math.isnan(val):
        # unresolved flank: I is monotone there, so the zone edge bounds it
        edge = rate.lam_min if c < rate.lam_min else rate.lam_max
        return -float(rate(edge)), False
    return -float(val), True


def ld_interval(rate: RateFunction, a: float, b: float) -> float:
    """``LD_{phi,a,b} = -inf_{[a,b]} I`` after clamping to the spectrum.

    On an unresolved flank the value is an upper bound and a warning is issued.
    """
    ca, cb, clamped = _clamp(rate, float(a), float(b))
    if clamped:
        warnings.warn(f"interval [{a}, {b}] clamped to [{ca}, {cb}]", stacklevel=2)
    val, exact = _ld(rate, ca, cb)
    if not exact:
        warnings.warn("interval reaches an unresolved flank; value is an upper bound",
                      stacklevel=2)
    return val


def birkhoff_spectrum(rate: RateFunction, a: float, b: float) -> SpectrumResult:
    """Entropy ``h_X = h_top + LD`` of points with Birkhoff averages accumulating in ``[a, b]``."""
    ca, cb, clamped = _clamp(rate, float(a), float(b))
    notes = []
    if clamped:
        notes.append(f"interval clamped to [{ca:.17g}, {cb:.17g}]")
    ld, exact = _ld(rate, ca, cb)
    if not exact:
        notes.append("reaches an unresolved flank: LD and h_X are upper bounds")
    h_x = rate.h_top + ld
    region = region_of(rate, ca, cb)
    if rate.degenerate:
        samples = ((rate.s_star, rate.h_top),)
    else:
        grid = rate.s[(rate.s >= ca) & (rate.s <= cb)]
        grid = np.unique(np.concatenate([[ca, cb], grid]))
        samples = tuple((float(s), float(rate.tau_hat(float(s)))) for s in grid)
    return SpectrumResult((float(a), float(b)), ld, h_x, region, exact, clamped, samples,
                          tuple(notes))


@dataclass(frozen=True)
class DeltaRegions:
    lam_min: float
    lam_max: float
    s_star: float
    s_tol: float = 1e-6

    def classify(self, a: float, b: float) -> str:
        if a - self.s_tol <= self.s_star <= b + self.s_tol:
            return DELTA2
        if b < self.lam_min or a > self.lam_max:
            return DELTA1
        return DELTA3

    def describe(self) -> dict:
        return {
            DELTA1: f"b < {self.lam_min:.6g} or a > {self.lam_max:.6g}",
            DELTA2: f"a <= {self.s_star:.6g} <= b",
            DELTA3: "otherwise (interval meets the strictly convex part on one side of the mean)",
        }


def delta_regions(rate: RateFunction) -> DeltaRegions:
    return DeltaRegions(rate.lam_min, rate.lam_max, rate.s_star, rate.s_tol)
