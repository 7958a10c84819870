"""Full-branch circle maps with break points.

Coordinates live on ``[0, 1)`` with ``1 == 0``. A map is stored as ``k``
branches; branch ``m`` is the closed arc ``[start_m, end_m]`` together with a
monotone lift sending it onto ``[0, 1]``. Branch arcs tile ``[0, 1]`` starting
at ``0``, so every break point is mapped to ``0``.

Branch indices are 1-based in the public API (``inverse_branch(m, x)``,
itineraries) and 0-based in internal arrays.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .exceptions import DomainError, InvalidMapError, NumericError, ResourceError

WIDTH_TOL = 1e-12
NEUTRAL_TOL = 1e-9
FIXED_DERIV_TOL = 1e-9
DEDUP_TOL = 1e-9
DEFAULT_PERIODIC_CAP = 3**12


def bisect_monotone(forward, x, lo, hi, increasing=True, max_iter=200):
    """Vectorised bisection for ``forward(y) = x`` on ``[lo, hi]``.

    Runs until the bracket stops shrinking in floating point, which gives
    relative rather than absolute accuracy near ``y = 0``.
    """
    x = np.asarray(x, dtype=float)
    a = np.full(x.shape, float(lo))
    b = np.full(x.shape, float(hi))
    for _ in range(max_iter):
        mid = 0.5 * (a + b)
        val = forward(mid)
        go_right = (val < x) if increasing else (val > x)
        a_new = np.where(go_right, mid, a)
        b_new = np.where(go_right, b, mid)
        if np.array_equal(a_new, a) and np.array_equal(b_new, b):
            break
        a, b = a_new, b_new
    y = 0.5 * (a + b)
    # a bracket that never closed means forward() is not monotone on [lo, hi]
    if np.any(b - a > 1e-14):
        bad = np.flatnonzero(b - a > 1e-14)
        raise NumericError(
            f"inverse bisection did not converge for {bad.size} target(s); "
            f"first target x={x.flat[bad[0]]!r}, bracket width {float((b - a).flat[bad[0]]):.3e}"
        )
    return y


@dataclass(frozen=True)
class Branch:
    """One full branch ``f|J_m`` with its lift onto ``[0, 1]``."""

    index: int
    start: float
    end: float
    forward: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray] | None = None
    increasing: bool = True

    @property
    def width(self) -> float:
        return self.end - self.start

    def invert(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        if self.inverse is not None:
            y = self.inverse(x)
        else:
            y = bisect_monotone(self.forward, x, self.start, self.end, self.increasing)
        return np.clip(y, self.start, self.end)


@dataclass(frozen=True)
class MPParams:
    """Coefficients of ``g(y) = y + a y^(3+alpha) + b y^(4+alpha)``."""

    alpha: float
    a: float
    b: float

    @classmethod
    def from_alpha(cls, alpha: float) -> "MPParams":
        alpha = float(alpha)
        if not 0.0 <= alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
        # closed form of the g(1/2) = 1, g'(0) = 1 solve; exact for integer alpha
        b = -(2 + alpha) * 2.0 ** (2 + alpha)
        a = (4 + alpha) * 2.0 ** (1 + alpha)
        return cls(alpha, a, b)

    def g(self, y):
        y = np.asarray(y, dtype=float)
        al = self.alpha
        return y + self.a * y ** (3 + al) + self.b * y ** (4 + al)

    def dg(self, y):
        y = np.asarray(y, dtype=float)
        al = self.alpha
        return 1.0 + (3 + al) * self.a * y ** (2 + al) + (4 + al) * self.b * y ** (3 + al)

    def ginv(self, x):
        # g is increasing and convex on [0, 1/2] with g(y) >= y, so Newton
        # started at min(x, 1/2) decreases monotonically onto the root.
        x = np.asarray(x, dtype=float)
        y = np.minimum(x, 0.5)
        for _ in range(60):
            step = (self.g(y) - x) / self.dg(y)
            y_new = np.maximum(y - np.maximum(step, 0.0), 0.0)
            if np.array_equal(y_new, y):
                return y
            y = y_new
        return bisect_monotone(self.g, x, 0.0, 0.5)


@dataclass(frozen=True)
class PeriodicPoints:
    """Period-``n`` points, one per itinerary.

    ``orbits[r, i]`` is the lifted coordinate of ``f^i`` of the ``r``-th point;
    it lies in the closed arc of branch ``itineraries[r, i]`` (1-based), so an
    orbit passing through a break point keeps the branch-side it was solved on.
    """

    period: int
    itineraries: np.ndarray
    orbits: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return np.mod(self.orbits[:, 0], 1.0)

    def __len__(self) -> int:
        return self.itineraries.shape[0]

    def __iter__(self) -> Iterator[tuple[float, tuple[int, ...]]]:
        for p, w in zip(self.points, self.itineraries):
            yield float(p), tuple(int(s) for s in w)

    def distinct_points(self, tol: float = DEDUP_TOL) -> np.ndarray:
        """Circle points with itinerary duplicates merged (circle distance < tol)."""
        pts = np.sort(self.points)
        keep: list[float] = []
        for p in pts:
            if keep and min(abs(p - keep[-1]), 1 - abs(p - keep[-1])) < tol:
                continue
            keep.append(p)
        if len(keep) > 1 and min(abs(keep[-1] - keep[0]), 1 - abs(keep[-1] - keep[0])) < tol:
            keep.pop()
        return np.array(keep)

    def orbit_averages(self, phi, cmap) -> np.ndarray:
        """Mean of ``phi`` along each orbit, evaluated from inside each branch."""
        total = np.zeros(len(self))
        for i in range(self.period):
            total += phi.evaluate_on_branch(self.orbits[:, i], self.itineraries[:, i] - 1, cmap)
        return total / self.period


class CircleMap:
    """Transitive full-branch local diffeomorphism of the circle with break points.

    Immutable after construction. ``flags`` collects non-fatal class
    violations (e.g. a fixed point whose one-sided derivatives disagree).
    """

    def __init__(self, branches: Sequence[Branch], *, name: str = "custom",
                 descriptor: dict | None = None, params=None, validate: bool = True):
        self.branches: tuple[Branch, ...] = tuple(branches)
        self.name = name
        self.descriptor = dict(descriptor or {"type": name})
        self.params = params
        starts = np.array([b.start for b in self.branches], dtype=float)
        ends = np.array([b.end for b in self.branches], dtype=float)
        starts.setflags(write=False)
        ends.setflags(write=False)
        self._starts = starts
        self._ends = ends
        self.flags: tuple[str, ...] = ()
        self._periodic_cache: dict = {}
        if validate:
            self._validate()
        self.neutral_points: tuple[float, ...] = tuple(self._find_neutral())
        self.flags = self.flags + tuple(self._check_fixed_derivatives())

    # ------------------------------------------------------------------ basics
    @property
    def degree(self) -> int:
        return len(self.branches)

    @property
    def break_points(self) -> np.ndarray:
        return self._starts

    @property
    def h_top(self) -> float:
        return math.log(self.degree)

    def __repr__(self) -> str:
        return f"CircleMap({self.name!r}, degree={self.degree})"

    def _validate(self) -> None:
        k = len(self.branches)
        if k < 2:
            raise InvalidMapError("a map in this class needs at least 2 branches")
        if abs(self._starts[0]) > WIDTH_TOL:
            raise InvalidMapError("branch arcs must start at 0")
        if abs(self._ends[-1] - 1.0) > WIDTH_TOL:
            raise InvalidMapError(f"branch arcs must end at 1, last ends at {self._ends[-1]!r}")
        if np.any(np.abs(self._ends[:-1] - self._starts[1:]) > WIDTH_TOL):
            raise InvalidMapError("branch arcs must be contiguous with disjoint interiors")
        if np.any(self._ends <= self._starts):
            raise InvalidMapError("every branch arc needs positive width")
        orient = {b.increasing for b in self.branches}
        if len(orient) != 1:
            raise InvalidMapError("all branches must share one orientation")
        flags = []
        for br in self.branches:
            lo, hi = (0.0, 1.0) if br.increasing else (1.0, 0.0)
            f0 = float(br.forward(np.array(br.start)))
            f1 = float(br.forward(np.array(br.end)))
            if abs(f0 - lo) > 1e-9 or abs(f1 - hi) > 1e-9:
                raise InvalidMapError(
                    f"branch {br.index} is not full: lift maps endpoints to ({f0}, {f1})")
            ys = np.linspace(br.start, br.end, 513)
            d = np.asarray(br.derivative(ys), dtype=float)
            if not np.all(np.isfinite(d)) or np.any(np.abs(d) <= 0):
                raise InvalidMapError(f"branch {br.index} has a critical point")
            if br.increasing and np.any(d < 0) or (not br.increasing and np.any(d > 0)):
                raise InvalidMapError(f"branch {br.index} is not monotone")
            for side_val in (d[0], d[-1]):
                if abs(side_val) < 1 - 1e-12:
                    flags.append(f"branch {br.index}: |Df| < 1 at a break point")
        if flags:
            warnings.warn("; ".join(flags), stacklevel=3)
        self.flags = tuple(flags)

    # ------------------------------------------------------------ evaluation
    def locate(self, x, side: str = "right"):
        """Return (0-based branch index, lifted coordinate) seen from ``side``."""
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        if side == "right":
            idx = np.searchsorted(self._starts, x, side="right") - 1
            y = x
        elif side == "left":
            idx = np.searchsorted(self._starts, x, side="left") - 1
            wrap = idx < 0
            idx = np.where(wrap, self.degree - 1, idx)
            y = np.where(wrap, x + 1.0, x)
        else:
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        return idx.astype(int), y

    def _per_branch(self, idx, y, attr):
        out = np.empty(np.shape(y), dtype=float)
        for m, br in enumerate(self.branches):
            mask = idx == m
            if np.any(mask):
                out[mask] = getattr(br, attr)(y[mask])
        return out

    def eval(self, x):
        """``f(x)`` reduced mod 1."""
        scalar = np.ndim(x) == 0
        idx, y = self.locate(np.atleast_1d(x))
        out = np.mod(self._per_branch(idx, y, "forward"), 1.0)
        out[out >= 1.0] = 0.0
        return float(out[0]) if scalar else out

    __call__ = eval

    def deriv(self, x, side: str = "right"):
        """One-sided derivative; the side picks the branch at break points."""
        scalar = np.ndim(x) == 0
        idx, y = self.locate(np.atleast_1d(x), side)
        out = self._per_branch(idx, y, "derivative")
        return float(out[0]) if scalar else out

    def deriv_on_branch(self, y, branch):
        """Derivative of branch ``branch`` (0-based, array allowed) at lifted ``y``."""
        y = np.asarray(y, dtype=float)
        idx = np.broadcast_to(np.asarray(branch, dtype=int), y.shape)
        return self._per_branch(idx, y, "derivative")

    def inverse_branch(self, m: int, x):
        """Unique ``y`` in ``J_m`` (1-based ``m``) with ``f(y) = x``, lifted coordinate."""
        if not 1 <= m <= self.degree:
            raise IndexError(f"branch index {m} outside 1..{self.degree}")
        scalar = np.ndim(x) == 0
        y = self.branches[m - 1].invert(np.atleast_1d(np.asarray(x, dtype=float)))
        return float(y[0]) if scalar else y

    def preimages(self, x):
        """Array of shape (k, len(x)) of lifted preimages of circle points ``x``."""
        x = np.mod(np.atleast_1d(np.asarray(x, dtype=float)), 1.0)
        return np.stack([br.invert(x) for br in self.branches])

    # --------------------------------------------------------- orbit tools
    def orbit(self, x, n: int) -> np.ndarray:
        pts = np.empty(n)
        cur = float(np.mod(x, 1.0))
        for i in range(n):
            pts[i] = cur
            cur = self.eval(cur)
        return pts

    def birkhoff_sum(self, phi, x, n: int) -> float:
        """``sum_{i=0}^{n-1} phi(f^i x)``."""
        if n < 1:
            raise ValueError("n must be >= 1")
        return float(np.sum(phi(self.orbit(x, n))))

    def lyapunov_avg(self, x, n: int) -> float:
        if n < 1:
            raise ValueError("n must be >= 1")
        return float(np.mean(np.log(np.abs(self.deriv(self.orbit(x, n))))))

    def periodic_points(self, n: int, cap: int = DEFAULT_PERIODIC_CAP,
                        tol: float = 1e-12, max_sweeps: int = 200) -> PeriodicPoints:
        """One point of period ``n`` per itinerary in ``{1..k}^n``. Results are cached."""
        key = (n, tol, max_sweeps)
        if key in self._periodic_cache:
            return self._periodic_cache[key]
        if n < 1:
            raise ValueError("period must be >= 1")
        k = self.degree
        count = k**n
        if count > cap:
            raise ResourceError(f"{k}^{n} = {count} itineraries exceeds cap {cap}")
        codes = np.arange(count)
        words = np.empty((count, n), dtype=int)
        for i in range(n - 1, -1, -1):
            words[:, i] = codes % k
            codes //= k
        orbits = self._solve_orbits(words, tol, max_sweeps)
        orbits.setflags(write=False)
        pts = PeriodicPoints(n, words + 1, orbits)
        self._periodic_cache[key] = pts
        return pts

    def _pull_back(self, words_col, x_next):
        out = np.empty_like(x_next)
        for m, br in enumerate(self.branches):
            mask = words_col == m
            if np.any(mask):
                out[mask] = br.invert(x_next[mask])
        return out

    def _sweep(self, words, x0):
        """Apply the composed inverse branches once; returns the whole orbit."""
        n = words.shape[1]
        orb = np.empty((words.shape[0], n))
        nxt = x0
        for i in range(n - 1, -1, -1):
            orb[:, i] = self._pull_back(words[:, i], nxt)
            nxt = orb[:, i]
        return orb

    def _solve_orbits(self, words, tol, max_sweeps):
        count = words.shape[0]
        orb = np.empty((count, words.shape[1]))
        todo = np.ones(count, dtype=bool)
        # orbits through 0 == 1 sit on an arc endpoint; the neutral case is
        # too flat there for iteration or bisection to resolve in floating point
        for end in (0.0, 1.0):
            cand = self._sweep(words[todo], np.full(int(todo.sum()), end))
            hit = np.abs(cand[:, 0] - end) <= 1e-15
            rows = np.flatnonzero(todo)[hit]
            orb[rows] = cand[hit]
            orb[rows, 0] = end
            todo[rows] = False
        rows = np.flatnonzero(todo)
        if rows.size == 0:
            return orb
        sub = words[rows]
        cur = self._sweep(sub, np.full(rows.size, 0.5))
        delta = np.full(rows.size, np.inf)
        for _ in range(max_sweeps):
            new = self._sweep(sub, cur[:, 0])
            new_delta = np.abs(new[:, 0] - cur[:, 0])
            cur = new
            if np.all((new_delta == 0) | (new_delta >= delta)):
                delta = new_delta
                break
            delta = new_delta
        orb[rows] = cur
        slow = delta >= tol
        if np.any(slow):
            # weak contraction near a neutral point: bisection on Psi(x) - x
            srows = rows[slow]
            ssub = words[srows]
            lo = np.zeros(srows.size)
            hi = np.ones(srows.size)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                gap = self._sweep(ssub, mid)[:, 0] - mid
                lo_new = np.where(gap > 0, mid, lo)
                hi_new = np.where(gap > 0, hi, mid)
                if np.array_equal(lo_new, lo) and np.array_equal(hi_new, hi):
                    break
                lo, hi = lo_new, hi_new
            if np.any(hi - lo > 1e-10):
                bad = ssub[np.argmax(hi - lo)] + 1
                raise NumericError(f"periodic point for itinerary {tuple(bad)} did not converge")
            orb[srows] = self._sweep(ssub, 0.5 * (lo + hi))
        return orb

    def fixed_points(self) -> PeriodicPoints:
        return self.periodic_points(1)

    def _fixed_point_derivs(self):
        fp = self.fixed_points()
        y = fp.orbits[:, 0]
        d = self.deriv_on_branch(y, fp.itineraries[:, 0] - 1)
        return fp, y, d

    def _find_neutral(self):
        fp, _, d = self._fixed_point_derivs()
        pts = fp.points[np.abs(np.abs(d) - 1.0) < NEUTRAL_TOL]
        found: list[float] = []
        for p in np.sort(pts):
            p = 0.0 if p > 1 - DEDUP_TOL else float(p)
            if not any(min(abs(p - q), 1 - abs(p - q)) < DEDUP_TOL for q in found):
                found.append(p)
        return found

    def _check_fixed_derivatives(self):
        flags = []
        fp = self.fixed_points()
        for p in fp.distinct_points():
            left, right = self.deriv(p, "left"), self.deriv(p, "right")
            if abs(left - right) > FIXED_DERIV_TOL:
                flags.append(f"fixed point {p:.12g}: one-sided derivatives differ ({left:g} vs {right:g})")
        return flags

    def neutral_fixed_points(self) -> tuple[float, ...]:
        return self.neutral_points


# ------------------------------------------------------------------ builders

def _linear_branch(m, start, slope):
    return Branch(
        index=m,
        start=start,
        end=start + 1.0 / slope,
        forward=lambda y, s=slope, a=start: s * (np.asarray(y, dtype=float) - a),
        derivative=lambda y, s=slope: np.full(np.shape(y), s, dtype=float),
        inverse=lambda x, s=slope, a=start: a + np.asarray(x, dtype=float) / s,
    )


def build_linear(slopes: Sequence[float]) -> CircleMap:
    """Full-branch piecewise-linear map; branch ``m`` has slope ``slopes[m]``."""
    slopes = [float(s) for s in slopes]
    if len(slopes) < 2:
        raise InvalidMapError("need at least two slopes")
    if any(not math.isfinite(s) or s < 1.0 for s in slopes):
        raise InvalidMapError(f"slopes must be finite and >= 1, got {slopes}")
    total = math.fsum(1.0 / s for s in slopes)
    if abs(total - 1.0) > WIDTH_TOL:
        raise InvalidMapError(f"branch widths 1/slope sum to {total!r}, not 1")
    branches = []
    start = 0.0
    for m, s in enumerate(slopes, start=1):
        br = _linear_branch(m, start, s)
        branches.append(br)
        start = br.end
    # absorb rounding so the arcs close exactly at 1
    last = branches[-1]
    branches[-1] = Branch(last.index, last.start, 1.0, last.forward, last.derivative,
                          last.inverse)
    name = "doubling" if slopes == [2.0, 2.0] else "linear_full_branch"
    return CircleMap(branches, name=name,
                     descriptor={"type": "linear_full_branch", "slopes": slopes})


def build_mp(alpha: float) -> CircleMap:
    """Two-branch Manneville-Pomeau-like map with a neutral fixed point at 0."""
    p = MPParams.from_alpha(alpha)
    left = Branch(
        index=1, start=0.0, end=0.5,
        forward=p.g, derivative=p.dg, inverse=p.ginv,
    )
    right = Branch(
        index=2, start=0.5, end=1.0,
        forward=lambda y: 1.0 - p.g(1.0 - np.asarray(y, dtype=float)),
        derivative=lambda y: p.dg(1.0 - np.asarray(y, dtype=float)),
        inverse=lambda x: 1.0 - p.ginv(1.0 - np.asarray(x, dtype=float)),
    )
    cmap = CircleMap([left, right], name="manneville_pomeau",
                     descriptor={"type": "manneville_pomeau", "alpha": p.alpha}, params=p)
    return cmap


def build_piecewise_poly(branches: Sequence[dict]) -> CircleMap:
    """Branches given as ``{"domain": [a, b], "coeffs": [c0, c1, ...]}``.

    The lift on ``[a, b]`` is ``sum_i c_i (y - a)^i``; it must run from 0 to 1
    (increasing) or from 1 to 0 (decreasing) across the arc.
    """
    P = np.polynomial.Polynomial
    built = []
    for m, spec in enumerate(branches, start=1):
        try:
            a, b = (float(v) for v in spec["domain"])
            coeffs = [float(c) for c in spec["coeffs"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidMapError(f"branch {m}: needs numeric 'domain' [a, b] and 'coeffs'") from exc
        if not coeffs:
            raise InvalidMapError(f"branch {m}: empty coefficient list")
        poly = P(coeffs)
        dpoly = poly.deriv()
        inc = float(poly(b - a)) > float(poly(0.0))
        crit = [r.real for r in np.atleast_1d(dpoly.roots())
                if abs(r.imag) < 1e-12 and -1e-12 <= r.real <= (b - a) + 1e-12]
        if crit or dpoly.degree() < 0:
            raise InvalidMapError(f"branch {m}: derivative vanishes on its arc")
        built.append(Branch(
            index=m, start=a, end=b,
            forward=lambda y, p=poly, a=a: p(np.asarray(y, dtype=float) - a),
            derivative=lambda y, d=dpoly, a=a: np.asarray(d(np.asarray(y, dtype=float) - a), dtype=float),
            increasing=inc,
        ))
    return CircleMap(built, name="piecewise_poly",
                     descriptor={"type": "piecewise_poly", "branches": [dict(b) for b in branches]})


def from_spec(spec: dict) -> CircleMap:
    """Build a map from its JSON description."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise InvalidMapError("map spec must be an object with a 'type' field")
    kind = spec["type"]
    if kind == "linear_full_branch":
        return build_linear(spec.get("slopes", []))
    if kind == "manneville_pomeau":
        if "alpha" not in spec:
            raise InvalidMapError("manneville_pomeau spec needs 'alpha'")
        return build_mp(spec["alpha"])
    if kind == "piecewise_poly":
        return build_piecewise_poly(spec.get("branches", []))
    raise InvalidMapError(f"unknown map type {kind!r}")
