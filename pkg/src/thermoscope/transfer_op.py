"""Transfer operator ``(L g)(x) = sum_{f(y)=x} exp(phi(y)) g(y)`` and its discretisations.

Two independent finite representations are provided:

* a collocation operator on grid nodes (exact preimage sums, piecewise linear
  interpolation of ``g``), used for ``apply`` and the norm-growth pressure
  estimate ``lim (1/n) log ||L^n 1||_inf``;
* an Ulam matrix on a cell partition, used for eigendata.

Both are built once per (map, potential, resolution) and then re-weighted for
``t * phi`` without recomputing preimages, so a t-sweep costs one geometry
construction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import NumericError
from .potential import Geometric, Potential, combine

QUAD_SUBDIV = 4
REFINE_RATIO = 0.5
DEFAULT_REFINE_DEPTH = 12


# --------------------------------------------------------------------- grids

def base_partition(cmap, n: int, refine_depth: int = DEFAULT_REFINE_DEPTH) -> np.ndarray:
    """Uniform ``n``-cell partition of ``[0, 1]`` plus break points and neutral refinement.

    Around each neutral fixed point the two adjacent uniform cells are split
    geometrically (ratio 1/2, ``refine_depth`` extra levels per side).
    """
    if n < 1:
        raise ValueError("need at least one cell")
    pts = [np.linspace(0.0, 1.0, n + 1), np.asarray(cmap.break_points, dtype=float)]
    h = 1.0 / n
    for p in cmap.neutral_points:
        pts.append(np.array([p]))
        offs = h * REFINE_RATIO ** np.arange(1, refine_depth + 1)
        pts.append(np.mod(p + offs, 1.0))
        pts.append(np.mod(p - offs, 1.0))
    edges = np.unique(np.concatenate(pts))
    edges = edges[(edges >= 0.0) & (edges < 1.0)]
    return np.append(edges, 1.0)


@dataclass(frozen=True)
class GridFunction:
    """Node values on a periodic grid, piecewise linear in between."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.nodes.shape != self.values.shape:
            raise ValueError("nodes and values must have the same shape")

    @property
    def size(self) -> int:
        return self.nodes.size

    def __call__(self, x):
        return np.interp(np.mod(x, 1.0), self.nodes, self.values, period=1.0)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.nodes, np.asarray(values, dtype=float))

    @classmethod
    def on_map_grid(cls, cmap, n: int, func=None, refine_depth: int = DEFAULT_REFINE_DEPTH):
        nodes = base_partition(cmap, n, refine_depth)[:-1]
        vals = np.ones_like(nodes) if func is None else np.asarray(func(nodes), dtype=float)
        return cls(nodes, vals)


def _interp_weights(nodes, y):
    """Sparse linear-interpolation weights of periodic grid ``nodes`` at points ``y``."""
    y = np.mod(y, 1.0)
    m = nodes.size
    left = np.searchsorted(nodes, y, side="right") - 1
    right = (left + 1) % m
    x_left = nodes[left]
    x_right = np.where(left + 1 < m, nodes[(left + 1) % m], 1.0 + nodes[0])
    theta = (y - x_left) / (x_right - x_left)
    return left, right, theta


class CollocationOperator:
    """Node-wise transfer operator on a fixed grid, re-weightable by ``t``."""

    def __init__(self, cmap, phi: Potential, nodes):
        self.cmap = cmap
        self.phi = phi
        self.nodes = np.asarray(nodes, dtype=float)
        rows, cols, base, interp = [], [], [], []
        node_idx = np.arange(self.nodes.size)
        pre = cmap.preimages(self.nodes)
        for m in range(cmap.degree):
            y = pre[m]
            vals = phi.evaluate_on_branch(y, m, cmap)
            left, right, theta = _interp_weights(self.nodes, y)
            rows += [node_idx, node_idx]
            cols += [left, right]
            base += [vals, vals]
            interp += [1.0 - theta, theta]
        self._rows = np.concatenate(rows)
        self._cols = np.concatenate(cols)
        self._phi = np.concatenate(base)
        self._interp = np.concatenate(interp)
        if not np.all(np.isfinite(self._phi)):
            raise NumericError("potential is not finite at some preimage")

    @property
    def exponents(self) -> np.ndarray:
        """Potential values at the preimage slots, aligned across operators on one grid."""
        return self._phi

    def matrix(self, t: float = 1.0, exponents=None):
        """Sparse matrix of ``L_{t phi}`` and the log-scale factored out of it.

        ``exponents`` replaces ``t * phi`` at the preimage slots, which lets
        operators for combined potentials share this geometry.
        """
        expo = t * self._phi if exponents is None else exponents
        shift = float(np.max(expo))
        data = np.exp(expo - shift) * self._interp
        n = self.nodes.size
        mat = sp.csr_matrix((data, (self._rows, self._cols)), shape=(n, n))
        return mat, shift

    def apply(self, g: GridFunction, t: float = 1.0) -> GridFunction:
        mat, shift = self.matrix(t)
        return g.with_values(math.exp(shift) * (mat @ g.values))


def apply(cmap, phi: Potential, g: GridFunction) -> GridFunction:
    """``L_{f, phi} g`` at the nodes of ``g``."""
    return CollocationOperator(cmap, phi, g.nodes).apply(g)


@dataclass(frozen=True)
class GrowthRate:
    value: float
    drift: float
    low_confidence: bool
    log_norms: np.ndarray = field(repr=False)


def growth_rate_from_operator(op: CollocationOperator, t: float = 1.0, n_max: int = 60,
                              window: int = 10, drift_tol: float = 1e-4,
                              exponents=None) -> GrowthRate:
    if not (n_max >= window >= 2):
        raise ValueError("need n_max >= window >= 2")
    mat, shift = op.matrix(t, exponents)
    v = np.ones(op.nodes.size)
    logs = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        v = mat @ v
        s = float(np.max(np.abs(v)))
        if not math.isfinite(s) or s <= 0.0:
            raise NumericError(f"norm growth broke down at iterate {n} (sup norm {s})")
        logs[n] = logs[n - 1] + math.log(s) + shift
        v /= s
    slope = (logs[n_max] - logs[n_max - window]) / window
    half = window // 2
    late = (logs[n_max] - logs[n_max - half]) / half
    early = (logs[n_max - half] - logs[n_max - 2 * half]) / half
    drift = abs(late - early)
    return GrowthRate(float(slope), float(drift), bool(drift > drift_tol), logs)


def growth_rate_pressure(cmap, phi: Potential, n_max: int = 60, window: int = 10,
                         grid_n: int = 4096) -> GrowthRate:
    """Pressure as the late slope of ``n -> log ||L^n 1||_inf``."""
    nodes = base_partition(cmap, grid_n)[:-1]
    return growth_rate_from_operator(CollocationOperator(cmap, phi, nodes), 1.0, n_max, window)


# ------------------------------------------------------------------- Ulam

@dataclass(frozen=True)
class UlamMatrix:
    """Ulam matrix ``exp(log_scale) * matrix`` on cells ``[edges[i], edges[i+1])``.

    ``matrix[i, j]`` is the coefficient of ``1_{cell_i}`` in the cell-average
    projection of ``L 1_{cell_j}``:
    ``(1/|cell_i|) * integral over cell_j ∩ f^-1(cell_i) of exp(phi) |Df|``.
    Lebesgue cell masses are therefore a left eigenvector when ``phi = -log|Df|``.
    """

    matrix: sp.csr_matrix
    edges: np.ndarray
    log_scale: float = 0.0

    @property
    def n_cells(self) -> int:
        return self.edges.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def dense(self) -> np.ndarray:
        return math.exp(self.log_scale) * self.matrix.toarray()

    def to_csv(self, path) -> None:
        coo = self.matrix.tocoo()
        scale = math.exp(self.log_scale)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "col", "weight"])
            for i, j, v in zip(coo.row, coo.col, coo.data):
                w.writerow([int(i), int(j), f"{v * scale:.17g}"])


class UlamDiscretization:
    """Preimage geometry and quadrature nodes for the Ulam matrices of ``t * phi``."""

    def __init__(self, cmap, phi: Potential, n: int, refine_depth: int = DEFAULT_REFINE_DEPTH,
                 subdivisions: int = QUAD_SUBDIV):
        if n < cmap.degree:
            raise ValueError(f"Ulam size {n} below map degree {cmap.degree}")
        self.cmap = cmap
        self.phi = phi
        self.n = n
        self.edges = base_partition(cmap, n, refine_depth)
        widths = np.diff(self.edges)
        ncell = widths.size
        rows, cols, lens, phis, logd = [], [], [], [], []
        frac = (np.arange(subdivisions) + 0.5) / subdivisions
        for m, br in enumerate(cmap.branches):
            pre = br.invert(self.edges)
            inside = self.edges[(self.edges > br.start) & (self.edges < br.end)]
            pts = np.unique(np.concatenate([pre, inside, [br.start, br.end]]))
            pts = pts[(pts >= br.start) & (pts <= br.end)]
            a, b = pts[:-1], pts[1:]
            keep = b > a
            a, b = a[keep], b[keep]
            mid = 0.5 * (a + b)
            src = np.clip(np.searchsorted(self.edges, np.mod(mid, 1.0), side="right") - 1, 0, ncell - 1)
            if br.increasing:
                tgt = np.searchsorted(pre, mid, side="right") - 1
            else:
                tgt = ncell - np.searchsorted(pre[::-1], mid, side="right")
            tgt = np.clip(tgt, 0, ncell - 1)
            q = a[:, None] + (b - a)[:, None] * frac[None, :]
            qf = q.ravel()
            phis.append(phi.evaluate_on_branch(qf, m, cmap).reshape(q.shape))
            logd.append(np.log(np.abs(cmap.deriv_on_branch(qf, m))).reshape(q.shape))
            rows.append(tgt)
            cols.append(src)
            lens.append((b - a) / subdivisions / widths[tgt])
        self._rows = np.concatenate(rows)
        self._cols = np.concatenate(cols)
        self._lens = np.concatenate(lens)
        self._phi = np.concatenate(phis)
        self._logd = np.concatenate(logd)
        if not np.all(np.isfinite(self._phi)):
            raise NumericError("potential is not finite at some quadrature node")

    @property
    def n_cells(self) -> int:
        return self.edges.size - 1

    def at(self, t: float = 1.0) -> UlamMatrix:
        expo = t * self._phi + self._logd
        shift = float(np.max(expo))
        data = (np.exp(expo - shift).sum(axis=1)) * self._lens
        n = self.n_cells
        mat = sp.csr_matrix((data, (self._rows, self._cols)), shape=(n, n))
        return UlamMatrix(mat, self.edges, shift)


def ulam_matrix(cmap, phi: Potential, n: int, refine_depth: int = DEFAULT_REFINE_DEPTH) -> UlamMatrix:
    return UlamDiscretization(cmap, phi, n, refine_depth).at(1.0)


# ------------------------------------------------------------- eigendata

@dataclass(frozen=True)
class LeadingEigen:
    """Perron eigentriple of an Ulam matrix.

    ``h`` holds cell values of the eigenfunction and ``nu`` the cell masses of
    the conformal-measure approximation, normalised so ``sum(nu) = 1`` and
    ``sum(h * nu) = 1``.
    """

    lam: float
    log_lam: float
    h: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)
    converged: bool
    iterations: int
    bracket: tuple[float, float]

    def eigenfunction(self, U: UlamMatrix) -> GridFunction:
        return GridFunction(U.midpoints, self.h)


def _cw_bounds(Mv, v):
    """Collatz-Wielandt bounds from one iterate; the upper one needs ``v > 0``."""
    pos = v > 0.0
    r = Mv[pos] / v[pos]
    lo = float(r.min()) if r.size else 0.0
    hi = float(r.max()) if pos.all() else math.inf
    return lo, hi


def leading_eigenpair(U: UlamMatrix, tol: float = 1e-12, max_iter: int = 20000,
                      v0=None, u0=None, vectors: bool = True, vec_tol: float = 1e-10) -> LeadingEigen:
    """Two-sided power iteration with sup-norm renormalisation.

    Stops when successive two-sided Rayleigh quotients agree to ``tol``
    (relative) or when the Collatz-Wielandt bracket, tightened by the largest
    diagonal entry, closes to ``tol``. Hitting ``max_iter`` is reported through
    ``converged`` rather than raised: near a phase transition the gap closes
    and slow convergence is expected.

    With ``vectors`` set, both eigenvectors must also have sup-norm residual
    below ``vec_tol``; pressure sweeps only need the eigenvalue and skip this.
    """
    M = U.matrix
    MT = M.T.tocsr()
    n = U.n_cells
    v = np.ones(n) if v0 is None else np.array(v0, dtype=float)
    u = U.widths.copy() if u0 is None else np.array(u0, dtype=float)
    diag = float(M.diagonal().max())
    lo, hi = diag, math.inf
    quot_prev = np.nan
    converged = False
    it = 0
    quot = np.nan
    for it in range(1, max_iter + 1):
        Mv = M @ v
        uM = MT @ u
        quot = float(u @ Mv) / float(u @ v)
        if not math.isfinite(quot) or quot <= 0.0:
            raise NumericError("power iteration lost positivity")
        rlo, rhi = _cw_bounds(Mv, v)
        llo, lhi = _cw_bounds(uM, u)
        lo = max(lo, rlo, llo)
        hi = min(hi, rhi, lhi)
        value_done = hi - lo <= tol * hi or abs(quot - quot_prev) <= tol * quot
        if value_done and vectors:
            value_done = (np.max(np.abs(Mv - quot * v)) <= vec_tol * quot * np.max(np.abs(v))
                          and np.max(np.abs(uM - quot * u)) <= vec_tol * quot * np.max(np.abs(u)))
        v = Mv / np.max(np.abs(Mv))
        u = uM / np.max(np.abs(uM))
        if value_done:
            converged = True
            break
        quot_prev = quot
    quot = min(max(quot, lo), hi)
    scale = math.exp(U.log_scale)
    nu = np.clip(u, 0.0, None)
    nu = nu / nu.sum()
    h = np.clip(v, 0.0, None)
    h = h / float(h @ nu)
    return LeadingEigen(quot * scale, math.log(quot) + U.log_scale, h, nu, converged, it,
                        (lo * scale, hi * scale))


@dataclass(frozen=True)
class Subleading:
    modulus: float
    gap_ratio: float
    residual: float
    flagged: bool


def _ritz_modulus(B, x, n, dim0, dim_max, scale, rtol=1e-10):
    """Largest Ritz modulus of ``B`` on Krylov spaces started at ``x``.

    The dimension doubles from ``dim0`` until two successive estimates agree;
    eigenvalue clusters of equal modulus need a space at least as wide as the
    cluster.
    """
    dim_max = min(dim_max, n - 1)
    Q = np.zeros((n, dim_max + 1))
    H = np.zeros((dim_max + 1, dim_max))
    Q[:, 0] = x / np.linalg.norm(x)
    check = min(dim0, dim_max)
    prev = None
    for j in range(dim_max):
        w = B(Q[:, j])
        for _ in range(2):  # classical Gram-Schmidt, repeated once
            c = Q[:, :j + 1].T @ w
            H[:j + 1, j] += c
            w = w - Q[:, :j + 1] @ c
        nrm = np.linalg.norm(w)
        H[j + 1, j] = nrm
        dim = j + 1
        breakdown = nrm < 1e-14 * max(1.0, abs(H[j, j]))
        if not breakdown:
            Q[:, j + 1] = w / nrm
        if dim == check or breakdown or dim == dim_max:
            ritz = np.linalg.eigvals(H[:dim, :dim])
            mod = float(np.max(np.abs(ritz)))
            if breakdown or dim == dim_max or (prev is not None and abs(mod - prev) <= rtol * scale):
                return mod
            prev = mod
            check = min(2 * check, dim_max)
    return prev if prev is not None else 0.0


def subleading_modulus(U: UlamMatrix, leading: LeadingEigen, n_power: int = 400,
                       krylov_dim: int = 16, krylov_max: int = 256,
                       residual_tol: float = 1e-6, seed: int = 0) -> Subleading:
    """Second eigenvalue modulus via power iteration on the rank-one deflation.

    ``B = M - lam * h nu^T`` (``nu^T h = 1``). After ``n_power`` sup-normalised
    steps, a Rayleigh-Ritz projection on the Krylov space of the final iterate
    resolves complex pairs and equal-modulus clusters, which plain norm growth
    only averages.
    """
    n = U.n_cells
    if n == 1:
        return Subleading(0.0, 0.0, 0.0, False)
    M = U.matrix
    lam = leading.lam / math.exp(U.log_scale)
    h, nu = leading.h, leading.nu
    resid = float(np.max(np.abs(M @ h - lam * h)) / np.max(np.abs(h)))
    resid = max(resid, float(np.max(np.abs(M.T @ nu - lam * nu)) / np.max(np.abs(nu))))
    resid /= lam

    def B(x):
        return M @ x - lam * h * float(nu @ x)

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x -= h * float(nu @ x)
    for _ in range(n_power):
        x = B(x)
        s = np.max(np.abs(x))
        if s == 0.0:
            return Subleading(0.0, 0.0, resid, resid > residual_tol)
        x /= s
    mod = _ritz_modulus(B, x, n, krylov_dim, krylov_max, lam)
    ratio = mod / lam
    return Subleading(mod * math.exp(U.log_scale), ratio, resid, resid > residual_tol)


# -------------------------------------------------- essential radius bound

@dataclass(frozen=True)
class EssentialRadius:
    bound: float
    rho: float
    log_bound: float
    log_rho: float
    certificate: bool
    margin: float
    upper_bound_only: bool = False


def log_derivative_potential(cmap) -> Potential:
    """``log|Df|`` as a potential (negated geometric)."""
    return Geometric(cmap).scale(-1.0)


def ess_radius_bound(cmap, phi: Potential, alpha: float, pressure_fn=None,
                     margin_tol: float = 1e-3) -> EssentialRadius:
    """``exp P(phi - alpha log|Df|)`` against ``exp P(phi)``.

    ``pressure_fn(cmap, potential) -> float`` defaults to the norm-growth
    estimate. The certificate ``P(phi) > P(phi - alpha log|Df|)`` must hold by
    more than ``margin_tol``.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError("Hoelder exponent must lie in (0, 1]")
    if pressure_fn is None:
        def pressure_fn(c, p):
            return growth_rate_pressure(c, p).value
    shifted = combine([(1.0, phi), (-alpha, log_derivative_potential(cmap))])
    lb = float(pressure_fn(cmap, shifted))
    lr = float(pressure_fn(cmap, phi))
    margin = lr - lb
    return EssentialRadius(math.exp(lb), math.exp(lr), lb, lr, margin > margin_tol, margin)


def ess_radius_bound_bv(cmap, phi: Potential, max_period: int = 10, pressure_fn=None,
                        margin_tol: float = 1e-3) -> EssentialRadius:
    """BV-form bound ``exp(max limsup S_n phi / n)``, estimated by periodic-orbit maxima.

    Only an upper bound on the essential radius; the flag on the result says so.
    """
    best = -math.inf
    for p in range(1, max_period + 1):
        best = max(best, float(np.max(cmap.periodic_points(p).orbit_averages(phi, cmap))))
    if pressure_fn is None:
        def pressure_fn(c, q):
            return growth_rate_pressure(c, q).value
    lr = float(pressure_fn(cmap, phi))
    margin = lr - best
    return EssentialRadius(math.exp(best), math.exp(lr), best, lr, margin > margin_tol, margin, True)


def spectral_sweep(cmap, phi: Potential, ts, n: int = 1024, alpha: float | None = None,
                   max_iter: int = 5000, max_period: int = 10):
    """Leading/subleading eigenvalues and essential bounds of ``t * phi`` for each ``t``.

    Yields one dict per ``t`` with keys t, lam, sub, ratio, ess_bound, certificate,
    upper_bound_only, converged.
    """
    disc = UlamDiscretization(cmap, phi, n)
    if alpha is None:
        alpha = phi.regularity.hoelder_exponent
    nodes = base_partition(cmap, n)[:-1]
    op_phi = CollocationOperator(cmap, phi, nodes)
    logd = None
    if alpha is not None:
        logd = CollocationOperator(cmap, log_derivative_potential(cmap), nodes).exponents
    for t in ts:
        t = float(t)
        U = disc.at(t)
        lead = leading_eigenpair(U, max_iter=max_iter)
        sub = subleading_modulus(U, lead)
        lr = growth_rate_from_operator(op_phi, t).value
        if logd is not None:
            expo = t * op_phi.exponents - alpha * logd
            lb = growth_rate_from_operator(op_phi, exponents=expo).value
            ess = EssentialRadius(math.exp(lb), math.exp(lr), lb, lr, lr - lb > 1e-3, lr - lb)
        else:
            ess = ess_radius_bound_bv(cmap, phi.scale(t), max_period,
                                      pressure_fn=lambda c, q: lr)
        yield {"t": t, "lam": lead.lam, "sub": sub.modulus, "ratio": sub.gap_ratio,
               "ess_bound": ess.bound, "certificate": ess.certificate,
               "upper_bound_only": ess.upper_bound_only,
               "converged": lead.converged and not sub.flagged}


# ----------------------------------------------------------- full report

@dataclass(frozen=True)
class SpectralReport:
    lam: float
    log_lam: float
    h: GridFunction = field(repr=False)
    nu: np.ndarray = field(repr=False)
    subleading: float
    gap_ratio: float
    ess_bound: float
    certificate: bool
    converged: bool
    iterations: int
    flags: tuple[str, ...] = ()


def spectral_report(cmap, phi: Potential, n: int = 1024, alpha: float | None = None,
                    ess_pressure_fn=None) -> SpectralReport:
    U = ulam_matrix(cmap, phi, n)
    lead = leading_eigenpair(U)
    sub = subleading_modulus(U, lead)
    flags = []
    if not lead.converged:
        flags.append("leading eigenpair hit the iteration cap")
    if sub.flagged:
        flags.append(f"deflation residual {sub.residual:.2e} above tolerance")
    if alpha is None:
        alpha = phi.regularity.hoelder_exponent
    if alpha is not None:
        er = ess_radius_bound(cmap, phi, alpha, ess_pressure_fn)
    else:
        er = ess_radius_bound_bv(cmap, phi, pressure_fn=ess_pressure_fn)
        flags.append("essential radius from the BV bound: upper bound only")
    ess, cert = er.bound, er.certificate
    return SpectralReport(lead.lam, lead.log_lam, lead.eigenfunction(U), lead.nu, sub.modulus,
                          sub.gap_ratio, ess, cert, lead.converged, lead.iterations, tuple(flags))


def eigenvector_to_csv(path, nodes, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "value"])
        for x, v in zip(nodes, values):
            w.writerow([f"{x:.17g}", f"{v:.17g}"])
