"""Pressure curves ``t -> P(f, t phi)`` and what can be read off them.

Three estimates are made at each ``t``: the Ulam log-eigenvalue on ``N`` and
``2N`` cells and the norm-growth slope. The finer Ulam value is reported as
the pressure; the largest pairwise gap between the three is its confidence.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .circle_map import DEFAULT_PERIODIC_CAP
from .exceptions import NumericError, ResourceError
from .potential import Potential
from .transfer_op import (
    CollocationOperator,
    UlamDiscretization,
    base_partition,
    growth_rate_from_operator,
    leading_eigenpair,
)

LINEAR = "linear-zone"
CONVEX = "strictly-convex-analytic-zone"
UNDETERMINED = "undetermined"

MAX_PERIOD_DEFAULT = 12


@dataclass(frozen=True)
class PressureConfig:
    ulam_n: int = 1024
    n_max: int = 60
    window: int = 10
    refine_depth: int = 12
    max_iter: int = 20000
    max_period: int | None = None
    period_cap: int = DEFAULT_PERIODIC_CAP
    tol_flat: float = 1e-4
    tol_strict: float = 1e-4
    decision_factor: float = 10.0
    decision_floor: float = 1e-9
    cohomology_tol: float = 1e-9
    bisect_tol: float = 1e-4
    threads: int | None = None

    def __post_init__(self):
        if self.ulam_n < 1:
            raise ValueError("ulam_n must be positive")
        if not (self.n_max >= self.window >= 2):
            raise ValueError("need n_max >= window >= 2")
        for name in ("tol_flat", "tol_strict", "decision_factor", "cohomology_tol", "bisect_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_period is not None and self.max_period < 1:
            raise ValueError("max_period must be >= 1")

    def period_limit(self, degree: int) -> int:
        """Requested period bound, or the largest default one that fits under the cap."""
        if self.max_period is not None:
            if degree ** self.max_period > self.period_cap:
                raise ResourceError(f"{degree}^{self.max_period} periodic itineraries exceed "
                                    f"cap {self.period_cap}")
            return self.max_period
        p = 1
        while p < MAX_PERIOD_DEFAULT and degree ** (p + 1) <= self.period_cap:
            p += 1
        return p

    def n_threads(self) -> int:
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get("THERMOSCOPE_THREADS")
        try:
            return max(1, int(env)) if env else 1
        except ValueError:
            return 1

    def to_dict(self) -> dict:
        return asdict(self)


# ----------------------------------------------------------- periodic data

@dataclass(frozen=True)
class OrbitExtreme:
    value: float
    point: float
    itinerary: tuple[int, ...]
    period: int


def _sampled_bounds(cmap, phi: Potential) -> tuple[float, float]:
    xs = np.concatenate([np.linspace(0.0, 1.0, 4097, endpoint=False), cmap.break_points,
                         np.asarray(cmap.neutral_points, dtype=float),
                         cmap.fixed_points().points])
    vals = np.concatenate([phi.evaluate(xs, "right"), phi.evaluate(xs, "left")])
    return float(vals.max()), float(vals.min())


def orbit_extremes(cmap, phi: Potential, max_period: int) -> tuple[OrbitExtreme, OrbitExtreme]:
    """Largest and smallest periodic-orbit averages of ``phi`` up to ``max_period``.

    A side stops early once a fixed point reaches the sampled sup (inf) of
    ``phi``, since no orbit average can exceed it.
    """
    sup, inf = _sampled_bounds(cmap, phi)
    best_hi = best_lo = None
    done_hi = done_lo = False
    for p in range(1, max_period + 1):
        if done_hi and done_lo:
            break
        pts = cmap.periodic_points(p)
        avg = pts.orbit_averages(phi, cmap)
        i, j = int(np.argmax(avg)), int(np.argmin(avg))
        if not done_hi and (best_hi is None or avg[i] > best_hi.value):
            best_hi = OrbitExtreme(float(avg[i]), float(pts.points[i]),
                                   tuple(int(c) for c in pts.itineraries[i]), p)
        if not done_lo and (best_lo is None or avg[j] < best_lo.value):
            best_lo = OrbitExtreme(float(avg[j]), float(pts.points[j]),
                                   tuple(int(c) for c in pts.itineraries[j]), p)
        if p == 1:
            done_hi = best_hi.value >= sup
            done_lo = best_lo.value <= inf
    return best_hi, best_lo


def beta_max(cmap, phi: Potential, max_period: int | None = None,
             config: PressureConfig | None = None) -> OrbitExtreme:
    """Maximum periodic-orbit average of ``phi``, with the orbit attaining it."""
    cfg = config or PressureConfig()
    if max_period is not None:
        cfg = replace(cfg, max_period=max_period)
    return orbit_extremes(cmap, phi, cfg.period_limit(cmap.degree))[0]


def beta_min(cmap, phi: Potential, max_period: int | None = None,
             config: PressureConfig | None = None) -> OrbitExtreme:
    cfg = config or PressureConfig()
    if max_period is not None:
        cfg = replace(cfg, max_period=max_period)
    return orbit_extremes(cmap, phi, cfg.period_limit(cmap.degree))[1]


@dataclass(frozen=True)
class Cohomology:
    cohomologous: bool
    spread: float
    value: float  # the common average when cohomologous, else the midpoint

    def __iter__(self):
        return iter((self.cohomologous, self.spread))


def cohomologous_to_constant(cmap, phi: Potential, max_period: int | None = None,
                             config: PressureConfig | None = None) -> Cohomology:
    """Spread of periodic-orbit averages; zero spread means cohomologous to a constant."""
    cfg = config or PressureConfig()
    if max_period is not None:
        cfg = replace(cfg, max_period=max_period)
    limit = cfg.period_limit(cmap.degree)
    c = phi.constant_value
    if c is not None:
        return Cohomology(True, 0.0, float(c))
    hi, lo = -math.inf, math.inf
    for p in range(1, limit + 1):
        avg = cmap.periodic_points(p).orbit_averages(phi, cmap)
        hi, lo = max(hi, float(avg.max())), min(lo, float(avg.min()))
        if hi - lo >= cfg.cohomology_tol:
            break
    spread = hi - lo
    return Cohomology(spread < cfg.cohomology_tol, spread, 0.5 * (hi + lo))


# ------------------------------------------------------------- estimators

@dataclass(frozen=True)
class PressurePoint:
    t: float
    value: float
    ulam: float
    ulam_fine: float
    norm_growth: float
    confidence: float
    converged: bool
    growth_drift: float

    def __iter__(self):
        return iter((self.value, self))


class PressureSolver:
    """Shared geometry for evaluating ``P(t * phi)`` at many ``t``."""

    def __init__(self, cmap, phi: Potential, config: PressureConfig | None = None):
        self.cmap = cmap
        self.phi = phi
        self.config = cfg = config or PressureConfig()
        if cfg.ulam_n < cmap.degree:
            raise ValueError(f"Ulam size {cfg.ulam_n} below map degree {cmap.degree}")
        self.coarse = UlamDiscretization(cmap, phi, cfg.ulam_n, cfg.refine_depth)
        self.fine = UlamDiscretization(cmap, phi, 2 * cfg.ulam_n, cfg.refine_depth)
        nodes = base_partition(cmap, cfg.ulam_n, cfg.refine_depth)[:-1]
        self.collocation = CollocationOperator(cmap, phi, nodes)

    def at(self, t: float) -> PressurePoint:
        cfg = self.config
        t = float(t)
        a = leading_eigenpair(self.coarse.at(t), max_iter=cfg.max_iter, vectors=False)
        b = leading_eigenpair(self.fine.at(t), max_iter=cfg.max_iter, vectors=False)
        g = growth_rate_from_operator(self.collocation, t, cfg.n_max, cfg.window)
        vals = (a.log_lam, b.log_lam, g.value)
        if not all(math.isfinite(v) for v in vals):
            raise NumericError(f"non-finite pressure estimate at t={t}")
        conf = max(abs(x - y) for x in vals for y in vals)
        return PressurePoint(t, b.log_lam, a.log_lam, b.log_lam, g.value, conf,
                             a.converged and b.converged, g.drift)

    def sweep(self, ts) -> list[PressurePoint]:
        ts = [float(t) for t in ts]
        n = self.config.n_threads()
        if n <= 1 or len(ts) < 2:
            return [self.at(t) for t in ts]
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(self.at, ts))


def pressure(cmap, phi: Potential, config: PressureConfig | None = None) -> PressurePoint:
    """Reconciled ``P_top(f, phi)``; iterate to get ``(value, diagnostics)``."""
    return PressureSolver(cmap, phi, config).at(1.0)


# ------------------------------------------------------------------ curves

def divided_differences(t, p):
    """First and second divided differences, padded to the grid length.

    ``d1[i]`` is the slope on ``[t[i], t[i+1]]`` (last entry repeats);
    ``d2[i]`` is the second difference centred at ``t[i]`` (ends copy their
    neighbours).
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    h = np.diff(t)
    slope = np.diff(p) / h
    d1 = np.append(slope, slope[-1])
    inner = 2.0 * np.diff(slope) / (h[:-1] + h[1:])
    d2 = np.concatenate([[inner[0]], inner, [inner[-1]]])
    return d1, d2


@dataclass(frozen=True)
class PressureCurve:
    descriptor: dict
    t: np.ndarray
    p_norm_growth: np.ndarray
    p_ulam: np.ndarray
    p_ulam_fine: np.ndarray
    reconciled: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    confidence: np.ndarray
    converged: np.ndarray
    zone: tuple[str, ...]
    h_top: float
    cohomologous: bool
    beta_max: float
    beta_min: float
    config: PressureConfig = field(repr=False)
    warnings: tuple[str, ...] = ()

    def __len__(self):
        return self.t.size

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.reconciled))))

    def convexity_defect(self) -> float:
        """Most negative second difference relative to the curve scale (0 if convex).

        On a non-uniform grid the divided difference at ``t[i]`` is multiplied
        by ``h[i-1] * h[i]``, which reduces to the plain second difference when
        the spacing is uniform.
        """
        h = np.diff(self.t)
        if h.size < 2:
            return 0.0
        raw = self.d2[1:-1] * h[:-1] * h[1:]
        return float(min(0.0, raw.min()) / self.scale)

    def at(self, t: float) -> float:
        return float(np.interp(t, self.t, self.reconciled))

    def rows(self):
        for i in range(self.t.size):
            yield (self.t[i], self.p_norm_growth[i], self.p_ulam[i], self.reconciled[i],
                   self.d1[i], self.d2[i], self.zone[i], self.confidence[i])

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "P_norm_growth", "P_ulam", "P_reconciled", "d1", "d2", "zone",
                        "confidence"])
            for row in self.rows():
                w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])


def _fmt(x) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 5:
        raise ValueError("t grid needs at least 5 points")
    if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
        raise ValueError("t grid must be finite and strictly increasing")
    return t


def _sample_transitions(t, p, bmax, bmin, tol):
    """Grid-level t1/t2: the first samples (outward from 0) where the gap closes."""
    t1, t2 = -math.inf, math.inf
    gap_hi = p - t * bmax
    gap_lo = p - t * bmin
    for i in range(t.size):
        if t[i] > 0 and gap_hi[i] < tol:
            t2 = float(t[i])
            break
    for i in range(t.size - 1, -1, -1):
        if t[i] < 0 and gap_lo[i] < tol:
            t1 = float(t[i])
            break
    return t1, t2


def classify_zones(t, d2, t1, t2, tol_flat, tol_strict, cohomologous=False) -> tuple[str, ...]:
    out = []
    for ti, c in zip(t, d2):
        if cohomologous:
            out.append(LINEAR)
        elif ti >= t2 or ti <= t1:
            out.append(LINEAR if abs(c) < tol_flat else UNDETERMINED)
        else:
            out.append(CONVEX if c > tol_strict else UNDETERMINED)
    return tuple(out)


def _densify(solver, pts, bmax, bmin, tol, levels):
    """Bisect the grid cells where the pressure gap first closes, adding the midpoints."""
    pts = sorted(pts, key=lambda q: q.t)
    t = np.array([q.t for q in pts])
    p = np.array([q.value for q in pts])
    t1, t2 = _sample_transitions(t, p, bmax, bmin, tol)
    extra = []
    for edge, beta, outward in ((t2, bmax, 1), (t1, bmin, -1)):
        if not math.isfinite(edge):
            continue
        i = int(np.searchsorted(t, edge))
        j = i - outward
        if j < 0 or j >= t.size or t[j] * outward < 0:
            continue
        open_side, closed_side = float(t[j]), float(edge)
        for _ in range(levels):
            q = solver.at(0.5 * (open_side + closed_side))
            extra.append(q)
            if q.value - q.t * beta < tol:
                closed_side = q.t
            else:
                open_side = q.t
    return sorted(pts + extra, key=lambda q: q.t)


def pressure_curve(cmap, phi: Potential, t_grid, config: PressureConfig | None = None,
                   solver: PressureSolver | None = None, densify: int = 6) -> PressureCurve:
    """Reconciled ``P(t phi)`` on a sorted grid of at least five points.

    Potentials cohomologous to a constant ``c`` get the affine curve
    ``h_top + t c``; the estimator columns are still filled in so the
    discrepancy stays visible. Otherwise the grid cell where a flat zone
    starts is bisected ``densify`` times and the midpoints join the curve.
    """
    cfg = config or (solver.config if solver else PressureConfig())
    t = _check_grid(t_grid)
    solver = solver or PressureSolver(cmap, phi, cfg)
    pts = solver.sweep(t)
    coh = cohomologous_to_constant(cmap, phi, config=cfg)
    if not coh.cohomologous:
        ext_hi, ext_lo = orbit_extremes(cmap, phi, cfg.period_limit(cmap.degree))
        if densify > 0:
            pts = _densify(solver, pts, ext_hi.value, ext_lo.value, cfg.tol_flat, densify)
            t = np.array([q.t for q in pts])
    ng = np.array([q.norm_growth for q in pts])
    ul = np.array([q.ulam for q in pts])
    uf = np.array([q.ulam_fine for q in pts])
    conf = np.array([q.confidence for q in pts])
    conv = np.array([q.converged for q in pts])
    warnings = []
    if coh.cohomologous:
        rec = cmap.h_top + t * coh.value
        conf = np.maximum(conf, np.max(np.abs(np.vstack([ng, ul, uf]) - rec), axis=0))
        hi = lo = coh.value
    else:
        rec = uf.copy()
        hi, lo = ext_hi.value, ext_lo.value
    if not np.all(np.isfinite(rec)):
        raise NumericError("reconciled pressure is not finite")
    d1, d2 = divided_differences(t, rec)
    t1, t2 = _sample_transitions(t, rec, hi, lo, cfg.tol_flat)
    zones = classify_zones(t, d2, t1, t2, cfg.tol_flat, cfg.tol_strict, coh.cohomologous)
    if not conv.all():
        warnings.append(f"{int((~conv).sum())} Ulam eigenvalue solves hit the iteration cap")
    curve = PressureCurve(dict(phi.descriptor), t, ng, ul, uf, rec, d1, d2, conf, conv, zones,
                          cmap.h_top, coh.cohomologous, hi, lo, cfg, ())
    if curve.convexity_defect() < -1e-6:
        warnings.append(f"convexity defect {curve.convexity_defect():.3e}")
    return replace(curve, warnings=tuple(warnings))


# ---------------------------------------------------------- classification

@dataclass(frozen=True)
class Classification:
    """Outcome of a strict inequality test with its margin.

    ``value`` is the strict verdict; ``at_boundary`` marks margins within the
    decision tolerance, where the verdict should be read as undetermined.
    """

    value: bool
    margin: float
    tolerance: float
    at_boundary: bool
    note: str = ""

    def __bool__(self):
        return self.value

    def __iter__(self):
        return iter((self.value, self.margin))

    @property
    def verdict(self) -> str:
        if self.at_boundary:
            return "undetermined"
        return "yes" if self.value else "no"


def _decide(margin: float, confidence: float, cfg: PressureConfig, note="") -> Classification:
    tol = max(cfg.decision_factor * confidence, cfg.decision_floor)
    return Classification(bool(margin > tol), float(margin), tol, bool(abs(margin) <= tol), note)


def is_hyperbolic(cmap, phi: Potential, config: PressureConfig | None = None) -> Classification:
    """``beta(phi) < P(phi)`` with margin ``P - beta``."""
    cfg = config or PressureConfig()
    P = pressure(cmap, phi, cfg)
    b = beta_max(cmap, phi, config=cfg)
    return _decide(P.value - b.value, P.confidence, cfg)


def is_expanding(cmap, phi: Potential, config: PressureConfig | None = None) -> Classification:
    """``max phi(p) < P(phi)`` over neutral fixed points ``p``.

    With no neutral fixed point the answer is yes with infinite margin. For
    maps with more than one neutral point the test is only sufficient.
    """
    cfg = config or PressureConfig()
    neutral = cmap.neutral_points
    if not neutral:
        return Classification(True, math.inf, 0.0, False, "no neutral fixed point")
    P = pressure(cmap, phi, cfg)
    top = max(max(phi.evaluate(p, "right"), phi.evaluate(p, "left")) for p in neutral)
    note = "sufficient condition only" if len(neutral) > 1 else ""
    return _decide(P.value - top, P.confidence, cfg, note)


# ------------------------------------------------------------ transitions

@dataclass(frozen=True)
class TransitionReport:
    t1: float
    t2: float
    beta_max: float
    beta_min: float
    beta_max_orbit: tuple[int, ...] | None
    beta_min_orbit: tuple[int, ...] | None
    cohomologous: bool
    spread: float
    t: np.ndarray = field(repr=False)
    zones: tuple[str, ...] = field(repr=False)
    window: tuple[float, float] = (-6.0, 6.0)
    undetermined_ends: tuple[str, ...] = ()
    gap_collapse: tuple[float, ...] = ()
    notes: tuple[str, ...] = ()

    @property
    def no_transition(self) -> bool:
        return math.isinf(self.t1) and math.isinf(self.t2)

    def to_dict(self) -> dict:
        def ext(x):
            return None if x is None else (_fmt(x) if math.isinf(x) else x)
        return {
            "t1": ext(self.t1), "t2": ext(self.t2),
            "beta_max": self.beta_max, "beta_min": self.beta_min,
            "beta_max_orbit": list(self.beta_max_orbit) if self.beta_max_orbit else None,
            "beta_min_orbit": list(self.beta_min_orbit) if self.beta_min_orbit else None,
            "cohomologous": self.cohomologous, "spread": self.spread,
            "window": list(self.window),
            "no_transition": self.no_transition,
            "summary": self.summary(),
            "undetermined_ends": list(self.undetermined_ends),
            "gap_collapse": list(self.gap_collapse),
            "zones": [{"t": float(t), "zone": z} for t, z in zip(self.t, self.zones)],
            "notes": list(self.notes),
        }

    def summary(self) -> str:
        if self.cohomologous:
            return "cohomologous to a constant: affine pressure, transitions suppressed"
        if self.no_transition:
            return "no finite transition in window"
        parts = []
        if math.isfinite(self.t1):
            parts.append(f"t1 = {self.t1:.6g}")
        if math.isfinite(self.t2):
            parts.append(f"t2 = {self.t2:.6g}")
        return ", ".join(parts)


def _bisect_edge(gap, open_side, closed_side, tol, width):
    """Point where ``gap`` first drops below ``tol`` between ``open_side`` and ``closed_side``."""
    while abs(closed_side - open_side) > width:
        mid = 0.5 * (open_side + closed_side)
        if gap(mid) < tol:
            closed_side = mid
        else:
            open_side = mid
    return closed_side


def transition_points(cmap, phi: Potential, config: PressureConfig | None = None,
                      t_lo: float = -6.0, t_hi: float = 6.0, samples: int = 121,
                      curve: PressureCurve | None = None,
                      solver: PressureSolver | None = None) -> TransitionReport:
    """``t2`` (and ``t1``) where the pressure gap ``P(t phi) - t beta`` closes.

    The gap is convex and nonnegative. The first grid sample where it drops
    below ``tol_flat`` is refined by bisection with fresh pressure evaluations;
    if it stays open up to the window edge the point is reported infinite.
    """
    cfg = config or PressureConfig()
    if not t_lo < 0 < t_hi:
        raise ValueError("window must contain 0 in its interior")
    if curve is None:
        solver = solver or PressureSolver(cmap, phi, cfg)
        curve = pressure_curve(cmap, phi, np.linspace(t_lo, t_hi, samples), cfg, solver)
    t = curve.t
    coh = cohomologous_to_constant(cmap, phi, config=cfg)
    notes = list(curve.warnings)
    if coh.cohomologous:
        return TransitionReport(-math.inf, math.inf, coh.value, coh.value, None, None, True,
                                coh.spread, t, curve.zone, (float(t[0]), float(t[-1])),
                                notes=tuple(notes))
    ext_hi, ext_lo = orbit_extremes(cmap, phi, cfg.period_limit(cmap.degree))
    bmax, bmin = ext_hi.value, ext_lo.value
    t1s, t2s = _sample_transitions(t, curve.reconciled, bmax, bmin, cfg.tol_flat)
    solver = solver or PressureSolver(cmap, phi, cfg)
    tol = cfg.tol_flat

    t2 = t2s
    if math.isfinite(t2s):
        i = int(np.searchsorted(t, t2s))
        lo = max(0.0, float(t[i - 1])) if i > 0 else 0.0
        t2 = _bisect_edge(lambda s: solver.at(s).value - s * bmax, lo, t2s, tol, cfg.bisect_tol)
    t1 = t1s
    if math.isfinite(t1s):
        i = int(np.searchsorted(t, t1s))
        hi = min(0.0, float(t[i + 1])) if i + 1 < t.size else 0.0
        t1 = _bisect_edge(lambda s: solver.at(s).value - s * bmin, hi, t1s, tol, cfg.bisect_tol)
    zones = classify_zones(t, curve.d2, t1, t2, tol, cfg.tol_strict)
    ends = []
    if zones[0] == UNDETERMINED:
        ends.append("left")
    if zones[-1] == UNDETERMINED:
        ends.append("right")
    for zname, side in ((t1, "t1"), (t2, "t2")):
        if math.isfinite(zname):
            lin = [i for i, z in enumerate(zones) if z == LINEAR
                   and ((side == "t2" and t[i] >= zname) or (side == "t1" and t[i] <= zname))]
            if lin:
                slope = np.polyfit(t[lin], curve.reconciled[lin], 1)[0] if len(lin) > 1 \
                    else curve.d1[lin[0]]
                target = bmax if side == "t2" else bmin
                if abs(slope - target) >= 1e-3:
                    notes.append(f"flat zone beyond {side} has slope {slope:.6g}, "
                                 f"expected {target:.6g}")
    return TransitionReport(float(t1), float(t2), bmax, bmin, ext_hi.itinerary, ext_lo.itinerary,
                            False, coh.spread, t, zones, (float(t[0]), float(t[-1])),
                            tuple(ends), (), tuple(notes))

