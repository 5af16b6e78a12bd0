"""Semi-Lagrangian value iteration for exit-time problems and scheme residuals."""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse

from .core import first_crossing
from .errors import DegenerateStencilError
from .grid import GridField, _FACE_SLACK, _NODE_SNAP


@dataclass(frozen=True)
class SolverParams:
    """Discretisation knobs; ``tau=None`` means the smallest grid spacing."""

    tau: Optional[float] = None
    fixed_point_tol: float = 1e-9
    max_sweeps: int = 20000
    boundary_value: float = 1e6
    target_tol: float = 1e-9
    workers: int = 1

    def __post_init__(self):
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.fixed_point_tol > 0:
            raise ValueError("fixed_point_tol must be positive")
        if int(self.max_sweeps) < 1:
            raise ValueError("max_sweeps must be a positive integer")
        if int(self.workers) < 1:
            raise ValueError("workers must be a positive integer")

    def step(self, grid):
        return float(np.min(grid.spacing)) if self.tau is None else float(self.tau)


def stencil_matrix(grid, points):
    """Sparse multilinear interpolation operator and an inside-box flag per row."""
    n = grid.ndim
    res = np.asarray(grid.resolution)
    s = (points - grid.box[:, 0]) / grid.spacing
    snapped = np.round(s)
    s = np.where(np.abs(s - snapped) < _NODE_SNAP, snapped, s)
    inside = np.all((s >= -_FACE_SLACK) & (s <= res - 1 + _FACE_SLACK), axis=-1)
    s = np.clip(s, 0.0, res - 1)
    idx = np.minimum(np.floor(s).astype(np.intp), res - 2)
    frac = s - idx
    rows, cols, vals = [], [], []
    ar = np.arange(len(points))
    for corner in itertools.product((0, 1), repeat=n):
        corner = np.asarray(corner)
        w = np.prod(np.where(corner == 1, frac, 1.0 - frac), axis=-1)
        keep = (w > 0.0) & inside
        flat = np.ravel_multi_index(tuple((idx + corner)[keep].T), grid.resolution)
        rows.append(ar[keep])
        cols.append(flat)
        vals.append(w[keep])
    mat = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(points), grid.size),
    )
    mat.sum_duplicates()
    mat.sort_indices()
    return mat, inside


@dataclass
class _Stencil:
    mats: list
    inside: np.ndarray  # (num_nodes, num_controls)
    costs: np.ndarray  # tau * lagrangian, (num_nodes, num_controls)


def _build_stencil(system, grid, lagrangian, tau):
    nodes = grid.nodes()
    mats, inside, costs = [], [], []
    for u in system.control_samples:
        m, ok = stencil_matrix(grid, nodes + tau * system.f(nodes, u))
        mats.append(m)
        inside.append(ok)
        costs.append(tau * np.asarray(lagrangian(nodes, u), dtype=float) * np.ones(len(nodes)))
    return _Stencil(mats, np.column_stack(inside), np.column_stack(costs))


def _chunks(size, workers):
    edges = np.linspace(0, size, workers + 1).astype(int)
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _sweep(st, v, active, boundary_value, lo, hi):
    best = np.full(hi - lo, np.inf)
    for k, m in enumerate(st.mats):
        cand = st.costs[lo:hi, k] + m[lo:hi] @ v
        cand = np.where(st.inside[lo:hi, k], cand, st.costs[lo:hi, k] + boundary_value)
        best = np.minimum(best, cand)
    return np.where(active[lo:hi], best, v[lo:hi])


def solve_value_function(system, grid, lagrangian, params=SolverParams()):
    """Fixed point of ``V(x) = min_u {tau L(x,u) + V(x + tau f(x,u))}``.

    Jacobi iteration from above: every sweep reads the previous field and
    writes a fresh buffer, so results do not depend on ``params.workers``.
    Target nodes are pinned to 0 and stencil points outside the box read
    ``params.boundary_value``. ``meta`` records ``tau``, ``sweeps``,
    ``converged`` and the final sup-norm update.
    """
    tau = params.step(grid)
    nodes = grid.nodes()
    mask = system.distance(nodes) <= params.target_tol
    st = _build_stencil(system, grid, lagrangian, tau)
    if np.any(st.costs < 0):
        raise ValueError("lagrangian must be nonnegative")
    interior = ~mask & ~grid.on_boundary().ravel()
    if np.any(interior) and not np.any(st.inside[interior]):
        raise DegenerateStencilError(f"tau={tau} sends every interior stencil out of the box")
    active = ~mask
    v = np.where(mask, 0.0, params.boundary_value)
    chunks = _chunks(grid.size, int(params.workers))
    pool = ThreadPoolExecutor(len(chunks)) if len(chunks) > 1 else None
    converged = False
    update = np.inf
    sweeps = 0
    t0 = time.perf_counter()
    try:
        while sweeps < int(params.max_sweeps):
            if pool is None:
                new = _sweep(st, v, active, params.boundary_value, 0, grid.size)
            else:
                parts = pool.map(
                    lambda c: _sweep(st, v, active, params.boundary_value, *c), chunks
                )
                new = np.concatenate(list(parts))
            sweeps += 1
            update = float(np.max(np.abs(new - v))) if new.size else 0.0
            v = new
            if update < params.fixed_point_tol:
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return GridField(
        grid,
        v,
        mask,
        {
            "tau": tau,
            "sweeps": sweeps,
            "converged": converged,
            "last_update": update,
            "fixed_point_tol": params.fixed_point_tol,
            "boundary_value": params.boundary_value,
            "seconds": round(time.perf_counter() - t0, 6),
        },
    )


def solve_min_time(system, grid, params=SolverParams()):
    """Minimum-time value function (unit lagrangian)."""
    return solve_value_function(system, grid, lambda x, u: np.ones(len(x)), params)


def step_quotients(W, system, points, tau, extra=None, exit_tol=None):
    """One-step difference quotients ``[W(x + tau f) - W(x)] / tau`` per control.

    Returns an array of shape ``(len(points), num_controls)`` with NaN where
    the stencil point leaves the box. ``extra(points, u)`` is added to each
    column. With ``exit_tol`` set, a straight step that ends inside the band
    ``d <= exit_tol`` is credited with reaching ``W = 0`` at the first band
    entry ``s* tau`` along the step, i.e. the quotient is ``-W(x) / (s* tau)``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    w0 = W.sample(points)
    out = np.empty((len(points), len(system.control_samples)))
    for k, u in enumerate(system.control_samples):
        vel = system.f(points, u)
        q = (W.sample(points + tau * vel) - w0) / tau
        if exit_tol is not None:
            hit = (system.distance(points + tau * vel) <= exit_tol) & (
                system.distance(points) > exit_tol
            )
            for i in np.flatnonzero(hit):
                x, f = points[i], vel[i]
                s = first_crossing(
                    lambda s: float(system.distance(x + s * tau * f)) - exit_tol, 0.0, 1.0
                )
                q[i] = -w0[i] / (s * tau)
        if extra is not None:
            q = q + np.asarray(extra(points, u), dtype=float)
        out[:, k] = q
    return out


def supersolution_residual(V, system, lagrangian, tau):
    """``R(x) = min_u {[V(x + tau f) - V(x)] / tau + L(x, u)}`` at interior nodes.

    Target nodes, box-face nodes and nodes whose stencil leaves the box for
    every control carry NaN (not evaluated). ``meta`` counts evaluated nodes.
    """
    nodes = V.grid.nodes()
    q = step_quotients(V, system, nodes, tau, extra=lagrangian)
    skip = V.target_mask.ravel() | V.grid.on_boundary().ravel()
    with np.errstate(all="ignore"):
        res = np.where(np.all(np.isnan(q), axis=1), np.nan, np.nanmin(
            np.where(np.isnan(q), np.inf, q), axis=1))
    res = np.where(skip, np.nan, res)
    evaluated = int(np.sum(~np.isnan(res)))
    return V.with_values(
        res, kind="supersolution_residual", tau=tau, evaluated=evaluated,
        not_evaluated=int(res.size - evaluated),
    )
