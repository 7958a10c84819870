"""Reference computations that share no arithmetic with the main pipeline.

Used by the tests: closed-form pressure of locally constant potentials,
periodic-orbit partition sums, brute-force convex conjugates and exact
checks of the intermittent-map coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np


@dataclass(frozen=True)
class SymbolicModel:
    """Full shift on ``k`` symbols with weight ``w_m = exp(c_m)`` on symbol ``m``."""

    weights: tuple[float, ...]

    def __post_init__(self):
        if not self.weights or any(not (w > 0 and math.isfinite(w)) for w in self.weights):
            raise ValueError("weights must be positive and finite")

    @classmethod
    def geometric(cls, slopes, t: float) -> "SymbolicModel":
        return cls(tuple(float(s) ** (-t) for s in slopes))

    @classmethod
    def branch_values(cls, values, t: float = 1.0) -> "SymbolicModel":
        return cls(tuple(math.exp(t * c) for c in values))

    def pressure(self) -> float:
        return pressure_locally_constant(self.weights)


def pressure_locally_constant(weights) -> float:
    """``log sum w_m``."""
    w = [float(x) for x in weights]
    if not w or any(not (x > 0) for x in w):
        raise ValueError("weights must be positive")
    return math.log(math.fsum(w))


def periodic_orbits_by_itinerary(cmap, n: int, sweeps: int = 200):
    """Points of period ``n``, one per word in ``{1..k}^n``, by iterating inverse branches.

    Returns ``(words, orbit)`` with ``orbit[:, i]`` the lifted point visited at
    step ``i``, lying in branch ``words[:, i]``.
    """
    k = cmap.degree
    words = np.array(list(product(range(1, k + 1), repeat=n)), dtype=int)

    def pull(x):
        orbit = np.empty(words.shape, dtype=float)
        y = x
        for i in range(n - 1, -1, -1):
            nxt = np.empty_like(y)
            for m in range(1, k + 1):
                mask = words[:, i] == m
                if mask.any():
                    nxt[mask] = cmap.inverse_branch(m, y[mask])
            orbit[:, i] = nxt
            y = nxt  # lifted points stay in [0, 1], so the branch-2 point 1 survives
        return orbit

    # an orbit through an arc endpoint is fixed exactly by the composed inverse;
    # iterating toward it converges only polynomially when that point is neutral
    pinned = np.zeros(words.shape[0], dtype=bool)
    fixed = np.empty(words.shape, dtype=float)
    for end in (0.0, 1.0):
        cand = pull(np.full(words.shape[0], end))
        hit = ~pinned & (cand[:, 0] == end)
        fixed[hit] = cand[hit]
        pinned |= hit
    x = np.full(words.shape[0], 0.5)
    orbit = pull(x)
    for _ in range(sweeps):
        y = orbit[:, 0]
        if np.max(np.abs(y - x)) == 0.0:
            break
        x = y
        orbit = pull(x)
    orbit[pinned] = fixed[pinned]
    return words, orbit


def pressure_periodic_orbits(cmap, phi, n: int, cap: int = 3**12) -> float:
    """``(1/n) log sum exp(S_n phi(x))`` over one ``n``-periodic point per itinerary."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if cmap.degree ** n > cap:
        raise ValueError(f"{cmap.degree}^{n} itineraries exceed cap {cap}")
    words, orbit = periodic_orbits_by_itinerary(cmap, n)
    sums = np.zeros(words.shape[0])
    for i in range(n):
        for m in range(1, cmap.degree + 1):
            mask = words[:, i] == m
            if mask.any():
                sums[mask] += phi.evaluate_on_branch(orbit[mask, i], m - 1, cmap)
    top = float(sums.max())
    return (top + math.log(math.fsum(np.exp(sums - top)))) / n


@dataclass(frozen=True)
class Conjugate:
    """Samples of ``sup_t (s t - g(t))``.

    ``unbounded[j]`` marks ``s`` whose maximiser sits on the edge of the t
    window with the objective still rising; those values are ``inf``.
    """

    s: np.ndarray
    values: np.ndarray
    argmax_t: np.ndarray
    unbounded: np.ndarray


def conjugate_bruteforce(t, g, s, rtol: float = 1e-12) -> Conjugate:
    """Direct maximisation of ``s t_i - g_i`` over all samples."""
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if t.size == 0 or s.size == 0:
        raise ValueError("grids must be nonempty")
    obj = s[:, None] * t[None, :] - g[None, :]
    idx = np.argmax(obj, axis=1)
    vals = obj[np.arange(s.size), idx]
    scale = np.maximum(1.0, np.abs(vals))
    unbounded = np.zeros(s.size, dtype=bool)
    if t.size > 1:
        last = t.size - 1
        # ties at the edge (affine g with s equal to its slope) are bounded
        left = (idx == 0) & (obj[:, 0] - obj[:, 1] > rtol * scale)
        right = (idx == last) & (obj[:, last] - obj[:, last - 1] > rtol * scale)
        unbounded = left | right
    vals = np.where(unbounded, np.inf, vals)
    return Conjugate(s, vals, t[idx], unbounded)


# ------------------------------------------------------------ MP coefficients

@dataclass(frozen=True)
class MPVerification:
    alpha: float
    a: float
    b: float
    exact: bool
    residual_g0: float
    residual_g_half: float
    residual_dg0: float
    min_dg: float
    argmin_dg: float

    @property
    def max_residual(self) -> float:
        return max(abs(self.residual_g0), abs(self.residual_g_half), abs(self.residual_dg0))

    @property
    def positive(self) -> bool:
        return self.min_dg > 0


def _exact_check(alpha: int) -> MPVerification:
    half = Fraction(1, 2)
    r = Fraction(4 + alpha, 4 + 2 * alpha)
    b = 1 / (half ** (3 + alpha) - r * half ** (2 + alpha))
    a = -b * r

    def g(y):
        return y + a * y ** (3 + alpha) + b * y ** (4 + alpha)

    def dg(y):
        return 1 + a * (3 + alpha) * y ** (2 + alpha) + b * (4 + alpha) * y ** (3 + alpha)

    # g''(y) = y^(1+alpha) (a (3+alpha)(2+alpha) + b (4+alpha)(3+alpha) y)
    crit = [Fraction(0), half]
    root = -a * (2 + alpha) / (b * (4 + alpha))
    if 0 < root < half:
        crit.append(root)
    vals = [(dg(y), y) for y in crit]
    m, where = min(vals)
    return MPVerification(float(alpha), float(a), float(b), True, float(g(Fraction(0))),
                          float(g(half) - 1), float(dg(Fraction(0)) - 1), float(m), float(where))


def _float_check(alpha: float) -> MPVerification:
    r = (4 + alpha) / (4 + 2 * alpha)
    b = 1.0 / (0.5 ** (3 + alpha) - r * 0.5 ** (2 + alpha))
    a = -b * r

    def g(y):
        return math.fsum([y, a * y ** (3 + alpha), b * y ** (4 + alpha)])

    def dg(y):
        return math.fsum([1.0, a * (3 + alpha) * y ** (2 + alpha), b * (4 + alpha) * y ** (3 + alpha)])

    ys = np.linspace(0.0, 0.5, 2001)
    d = np.array([dg(float(y)) for y in ys])
    crit = [0.0, 0.5]
    root = -a * (2 + alpha) / (b * (4 + alpha))
    if 0 < root < 0.5:
        crit.append(root)
    cands = [(dg(y), y) for y in crit] + [(float(d.min()), float(ys[int(d.argmin())]))]
    m, where = min(cands)
    return MPVerification(float(alpha), a, b, False, g(0.0), g(0.5) - 1.0, dg(0.0) - 1.0, m, where)


def verify_mp_coefficients(alpha) -> MPVerification:
    """Residuals of ``g(0) = 0``, ``g(1/2) = 1``, ``g'(0) = 1`` and the minimum of ``g'``.

    ``alpha`` in ``{0, 1}`` is checked in exact rational arithmetic.
    """
    if isinstance(alpha, Fraction):
        if alpha.denominator == 1 and alpha in (0, 1):
            return _exact_check(int(alpha))
        alpha = float(alpha)
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if alpha in (0.0, 1.0):
        return _exact_check(int(alpha))
    return _float_check(alpha)
