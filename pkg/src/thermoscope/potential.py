"""Potentials (observables) on the circle.

A potential is evaluated pointwise and vectorised. At jump points the value
depends on the side it is approached from; ``evaluate(x, side)`` exposes both
one-sided values, and ``evaluate_on_branch`` picks the side lying inside a
given branch arc, which is what preimage sums and periodic orbits need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DomainError, SpecError

# weakest-first ordering used when combining tags
_REGULARITY_RANK = {"smooth": 0, "hoelder": 1, "bounded-variation": 2}


@dataclass(frozen=True)
class Regularity:
    kind: str
    exponent: float | None = None

    def __post_init__(self):
        if self.kind not in _REGULARITY_RANK:
            raise ValueError(f"unknown regularity {self.kind!r}")
        if self.kind == "hoelder" and not (self.exponent and 0 < self.exponent <= 1):
            raise ValueError("hoelder regularity needs an exponent in (0, 1]")

    @property
    def hoelder_exponent(self) -> float | None:
        """Exponent for the essential-radius bound; smooth potentials use 1."""
        if self.kind == "smooth":
            return 1.0
        return self.exponent

    @staticmethod
    def weakest(tags: Sequence["Regularity"]) -> "Regularity":
        worst = max(tags, key=lambda r: (_REGULARITY_RANK[r.kind], -(r.exponent or 1.0)))
        return worst

    def __str__(self) -> str:
        return f"hoelder({self.exponent:g})" if self.kind == "hoelder" else self.kind


SMOOTH = Regularity("smooth")
BV = Regularity("bounded-variation")


class Potential:
    """Real observable on ``[0, 1)``. Subclasses implement ``_evaluate``."""

    regularity: Regularity = SMOOTH
    cmap = None

    def _evaluate(self, x: np.ndarray, side: str) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, x, side: str = "right"):
        scalar = np.ndim(x) == 0
        arr = np.mod(np.atleast_1d(np.asarray(x, dtype=float)), 1.0)
        out = np.asarray(self._evaluate(arr, side), dtype=float)
        return float(out[0]) if scalar else out

    __call__ = evaluate

    def evaluate_on_branch(self, y, branch, cmap):
        """Value at lifted ``y`` seen from inside branch ``branch`` (0-based) of ``cmap``.

        Only the right end of an arc needs the left-hand limit; every other
        point of a closed arc is approached from the right.
        """
        y = np.asarray(y, dtype=float)
        branch = np.broadcast_to(np.asarray(branch, dtype=int), y.shape)
        return self._on_branch(y, branch, cmap)

    def _on_branch(self, y, branch, cmap):
        at_end = y >= np.asarray(cmap._ends)[branch]
        out = np.empty(y.shape, dtype=float)
        if np.any(~at_end):
            out[~at_end] = self.evaluate(y[~at_end], "right")
        if np.any(at_end):
            out[at_end] = self.evaluate(y[at_end], "left")
        return out

    # ------------------------------------------------------------ algebra
    def scale(self, t: float) -> "Potential":
        return combine([(t, self)])

    def __mul__(self, t):
        return self.scale(float(t))

    __rmul__ = __mul__

    def __neg__(self):
        return self.scale(-1.0)

    def __add__(self, other):
        return combine([(1.0, self), (1.0, other)])

    def __sub__(self, other):
        return combine([(1.0, self), (-1.0, other)])

    # ------------------------------------------------------------ metadata
    @property
    def descriptor(self) -> dict:
        raise NotImplementedError

    @property
    def constant_value(self) -> float | None:
        """The value when the potential is literally constant, else None."""
        return None

    def sup_norm(self, n: int = 4097) -> float:
        xs = np.linspace(0.0, 1.0, n, endpoint=False)
        return float(max(np.max(np.abs(self(xs, "right"))), np.max(np.abs(self(xs, "left")))))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.descriptor})"


class Constant(Potential):
    def __init__(self, value: float):
        value = float(value)
        if not math.isfinite(value):
            raise DomainError("constant potential must be finite")
        self.value = value

    def _evaluate(self, x, side):
        return np.full(x.shape, self.value)

    @property
    def constant_value(self):
        return self.value

    @property
    def descriptor(self):
        return {"type": "constant", "value": self.value}

    def scale(self, t):
        return Constant(self.value * float(t))


class Geometric(Potential):
    """``-log|Df|``; one-sided at break points."""

    def __init__(self, cmap):
        self.cmap = cmap
        self.regularity = _geometric_regularity(cmap)

    def _evaluate(self, x, side):
        return -np.log(np.abs(self.cmap.deriv(x, side)))

    def _on_branch(self, y, branch, cmap):
        return -np.log(np.abs(self.cmap.deriv_on_branch(y, branch)))

    @property
    def descriptor(self):
        return {"type": "geometric"}


def _geometric_regularity(cmap) -> Regularity:
    # continuous derivative across every break point -> Lipschitz -log|Df|
    for x in cmap.break_points:
        if abs(cmap.deriv(x, "left") - cmap.deriv(x, "right")) > 1e-9:
            return BV
    return Regularity("hoelder", 1.0)


class TrigSeries(Potential):
    """``const + sum_k cos[k-1] cos(2 pi k x) + sin[k-1] sin(2 pi k x)``."""

    def __init__(self, cos: Sequence[float] = (), sin: Sequence[float] = (), const: float = 0.0):
        self.cos = tuple(float(c) for c in cos)
        self.sin = tuple(float(s) for s in sin)
        self.const = float(const)

    def _evaluate(self, x, side):
        out = np.full(x.shape, self.const)
        for k, c in enumerate(self.cos, start=1):
            out += c * np.cos(2 * np.pi * k * x)
        for k, s in enumerate(self.sin, start=1):
            out += s * np.sin(2 * np.pi * k * x)
        return out

    @property
    def constant_value(self):
        if not any(self.cos) and not any(self.sin):
            return self.const
        return None

    @property
    def descriptor(self):
        d = {"type": "trig_series", "cos": list(self.cos), "sin": list(self.sin)}
        if self.const:
            d["const"] = self.const
        return d


class Indicator(Potential):
    """``1`` on ``[a, b)``, ``0`` elsewhere."""

    regularity = BV

    def __init__(self, a: float, b: float):
        a, b = float(a), float(b)
        if not (0.0 <= a < b <= 1.0):
            raise DomainError(f"indicator interval must satisfy 0 <= a < b <= 1, got [{a}, {b})")
        self.a, self.b = a, b

    def _evaluate(self, x, side):
        if side == "right":
            return ((x >= self.a) & (x < self.b)).astype(float)
        # left limit: x = 0 is approached from just below 1
        xl = np.where(x == 0.0, 1.0, x)
        return ((xl > self.a) & (xl <= self.b)).astype(float)

    @property
    def descriptor(self):
        return {"type": "indicator", "interval": [self.a, self.b]}


class LinearCombination(Potential):
    def __init__(self, terms: Sequence[tuple[float, Potential]]):
        flat: list[tuple[float, Potential]] = []
        for w, p in terms:
            w = float(w)
            if not math.isfinite(w):
                raise DomainError("combination weights must be finite")
            if isinstance(p, LinearCombination):
                flat.extend((w * w2, p2) for w2, p2 in p.terms)
            else:
                flat.append((w, p))
        self.terms = tuple(flat)
        maps = {id(p.cmap): p.cmap for _, p in self.terms if p.cmap is not None}
        if len(maps) > 1:
            raise DomainError("cannot combine potentials attached to different maps")
        self.cmap = next(iter(maps.values()), None)
        self.regularity = Regularity.weakest([p.regularity for _, p in self.terms] or [SMOOTH])

    def _evaluate(self, x, side):
        out = np.zeros(x.shape)
        for w, p in self.terms:
            if w != 0.0:
                out += w * p.evaluate(x, side)
        return out

    def _on_branch(self, y, branch, cmap):
        out = np.zeros(y.shape)
        for w, p in self.terms:
            if w != 0.0:
                out += w * p._on_branch(y, branch, cmap)
        return out

    @property
    def constant_value(self):
        vals = [p.constant_value for _, p in self.terms]
        if all(v is not None for v in vals):
            return sum(w * v for (w, _), v in zip(self.terms, vals))
        return None

    @property
    def descriptor(self):
        return {"type": "combo",
                "terms": [{"weight": w, "potential": p.descriptor} for w, p in self.terms]}


def geometric(cmap) -> Geometric:
    return Geometric(cmap)


def constant(value: float) -> Constant:
    return Constant(value)


def indicator(a: float, b: float) -> Indicator:
    return Indicator(a, b)


def scale(phi: Potential, t: float) -> Potential:
    return phi.scale(t)


def combine(terms: Sequence[tuple[float, Potential]]) -> Potential:
    terms = list(terms)
    if all(isinstance(p, Constant) for _, p in terms):
        return Constant(math.fsum(float(w) * p.value for w, p in terms))
    return LinearCombination(terms)


def from_spec(spec: dict, cmap=None) -> Potential:
    """Build a potential from its JSON description."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise SpecError("potential spec must be an object with a 'type' field")
    kind = spec["type"]
    try:
        if kind == "geometric":
            if cmap is None:
                raise SpecError("geometric potential needs a map")
            return Geometric(cmap)
        if kind == "constant":
            return Constant(spec["value"])
        if kind == "trig_series":
            return TrigSeries(spec.get("cos", ()), spec.get("sin", ()), spec.get("const", 0.0))
        if kind == "indicator":
            a, b = spec["interval"]
            return Indicator(a, b)
        if kind == "combo":
            return combine([(t["weight"], from_spec(t["potential"], cmap)) for t in spec["terms"]])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"malformed {kind!r} potential spec: {exc}") from exc
    raise SpecError(f"unknown potential type {kind!r}")
