"""Trajectory synthesis from a verified restraint function by level halving.

Starting at ``z`` the greedy sample-and-hold control is applied until ``W``
drops to half the level at which the current segment started; the crossing
is located by bisection inside the integration step and becomes the start of
the next segment. Every closed segment carries the checks (rel1)-(rel3):
level bounds and exact halving, the per-segment cost bound and the uniform
segment time bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import REACHED_TARGET, LEFT_DOMAIN, Trajectory, first_crossing, rk4_step
from .errors import ConstructionError, PreconditionError, StuckError, SynthesisStalledError
from .hjb import step_quotients
from .kl import KLFunction, cell_max_majorant, majorization_gap, quasi_random_rectangle


def greedy_control(x, W, system, comp, tau=None, exit_tol=1e-9):
    """Control sample minimising ``D_u W(x) + p0(W(x)) l(x, u)``; lowest index wins ties."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    tau = float(np.min(W.grid.spacing)) if tau is None else float(tau)
    w = W.sample(x)[0]
    if not np.isfinite(w):
        raise StuckError(f"point {x.tolist()} is outside the field box", x)
    p0w = float(comp.p0(w))
    q = step_quotients(
        W, system, x[None, :], tau,
        extra=lambda pts, u: p0w * system.cost(pts, u),
        exit_tol=exit_tol,
    )[0]
    if np.all(np.isnan(q)):
        raise StuckError(f"every control leaves the box from {x.tolist()}", x)
    return system.control_samples[int(np.argmin(np.where(np.isnan(q), np.inf, q)))]


def segment_time_bound(N, R, brackets, gamma):
    """``T_N(R) = 3 d_plus(R) / (2^N gamma(d_minus(R) / 2^N))``."""
    if int(N) != N or N < 1:
        raise PreconditionError("segment index starts at 1")
    scale = 2.0 ** -int(N)
    g = float(gamma(brackets.d_minus(R) * scale))
    return 3.0 * float(brackets.d_plus(R)) * scale / g if g > 0 else math.inf


def cost_bound(Wz, P_table):
    """Global cost bound ``4 P(Wz / 2)``."""
    if not P_table.passed:
        raise PreconditionError("P table did not pass the integrability check")
    if Wz <= 0:
        return 0.0
    return 4.0 * float(P_table(0.5 * Wz))


@dataclass
class SynthesisParams:
    dt: float = 0.01
    tau: Optional[float] = None
    halving_tol: Optional[float] = None  # defaults to 1e-6 * W(z)
    max_levels: int = 64
    target_tol: float = 1e-9
    safety_factor: float = 5.0
    quad_tol: float = 1e-6


@dataclass
class SegmentCertificate:
    index: int
    start: list
    end: list
    duration: float
    cost: float
    level_before: float
    level_after: float
    level_max: float
    time_bound: float
    cost_bound_rhs: float
    rel1: bool
    rel2: bool
    rel3: bool
    complete: bool = True

    @property
    def passed(self):
        return self.rel1 and self.rel2 and self.rel3

    FIELDS = ("index", "duration", "cost", "level_before", "level_after", "level_max",
              "time_bound", "cost_bound_rhs", "rel1", "rel2", "rel3", "complete")

    def row(self):
        return [getattr(self, k) for k in self.FIELDS]


@dataclass
class SynthesisRecord:
    start: list
    W_start: float
    trajectory: Trajectory
    segments: list
    cost_bound: float
    reached_target: bool
    cost_ok: bool
    levels_ok: bool
    sop_residual: Optional[float] = None
    sop_ok: Optional[bool] = None
    envelope_ok: Optional[bool] = None
    notes: list = field(default_factory=list)

    @property
    def complete_segments(self):
        return [s for s in self.segments if s.complete]

    @property
    def passed(self):
        ok = self.reached_target and self.cost_ok and self.levels_ok
        ok = ok and all(s.passed for s in self.complete_segments)
        if self.sop_ok is not None:
            ok = ok and self.sop_ok
        if self.envelope_ok is not None:
            ok = ok and self.envelope_ok
        return bool(ok)


def _w(W, x):
    return float(W.sample(x)[0])


def synthesize_level_halving(system, W, comp, P_table, z, params=SynthesisParams(),
                             brackets=None):
    """Level-halving synthesis from ``z``; returns a :class:`SynthesisRecord`.

    ``brackets`` feed the segment time bound ``T_N(d(z))``; a segment that
    runs past ``safety_factor * T_N`` raises :class:`SynthesisStalledError`.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if float(system.distance(z)) <= params.target_tol:
        raise PreconditionError("start point is already inside the target band")
    Wz = _w(W, z)
    if not np.isfinite(Wz):
        raise StuckError("start point is outside the field box", z)
    if Wz <= 0:
        raise PreconditionError("W vanishes at the start point")
    if brackets is None:
        from .verify import compute_brackets

        brackets = compute_brackets(W, system.distance)
    tau = float(np.min(W.grid.spacing)) if params.tau is None else float(params.tau)
    htol = 1e-6 * Wz if params.halving_tol is None else float(params.halving_tol)
    Rz = float(system.distance(z))
    bound = cost_bound(Wz, P_table)

    times, states, controls, costs = [0.0], [z], [], [0.0]
    segments = []
    t, x, c = 0.0, z, 0.0
    seg_t0, seg_c0, seg_x0, level, wmax = 0.0, 0.0, z, Wz, Wz
    flag = None
    N = 1
    t_bar = segment_time_bound(N, Rz, brackets, comp.gamma)

    def close(end_x, end_w, complete):
        dur = t - seg_t0
        cst = c - seg_c0
        p0a = float(comp.p0(end_w)) if end_w > 0 else float(comp.p0(level / 2))
        rhs = 2.0 * (level - end_w) / p0a if p0a > 0 else math.inf
        rel1 = (0.5 * level - htol <= end_w) and (wmax <= 1.5 * level)
        if complete:
            rel1 = rel1 and abs(end_w - 0.5 * level) <= htol
        segments.append(SegmentCertificate(
            N, seg_x0.tolist(), end_x.tolist(), dur, cst, level, end_w, wmax, t_bar,
            rhs, bool(rel1), bool(cst <= rhs + params.quad_tol), bool(dur <= t_bar), complete,
        ))

    while True:
        u = greedy_control(x, W, system, comp, tau, params.target_tol)
        h = params.dt
        x_new = rk4_step(system, x, u, h)
        if not np.all(np.isfinite(x_new)):
            raise StuckError(f"non-finite state after t={t}", x)
        if float(system.distance(x_new)) <= params.target_tol:
            h = first_crossing(
                lambda s: float(system.distance(rk4_step(system, x, u, s))) - params.target_tol,
                0.0, h,
            )
            x_new = rk4_step(system, x, u, h)
        w_new = _w(W, x_new)
        if w_new <= 0.5 * level:
            h = first_crossing(
                lambda s: _w(W, rk4_step(system, x, u, s)) - 0.5 * level, 0.0, h,
            )
            x_new = rk4_step(system, x, u, h)
            w_new = _w(W, x_new)
        band = float(system.distance(x_new)) <= params.target_tol
        event = w_new <= 0.5 * level
        c = c + 0.5 * h * (float(system.cost(x, u)) + float(system.cost(x_new, u)))
        t = t + h
        x = x_new
        times.append(t)
        states.append(x)
        controls.append(u)
        costs.append(c)
        if not np.isfinite(w_new):
            flag = LEFT_DOMAIN
            break
        wmax = max(wmax, w_new)
        if event:
            close(x, w_new, True)
            N += 1
            seg_t0, seg_c0, seg_x0, level, wmax = t, c, x, w_new, w_new
            if band:
                flag = REACHED_TARGET
                break
            if N > params.max_levels:
                break
            t_bar = segment_time_bound(N, Rz, brackets, comp.gamma)
            continue
        if band:
            flag = REACHED_TARGET
            close(x, w_new, False)
            break
        if t - seg_t0 > params.safety_factor * t_bar:
            close(x, w_new, False)
            raise SynthesisStalledError(
                f"segment {N} exceeded {params.safety_factor} x time bound {t_bar}", segments[-1]
            )
    traj = Trajectory(
        np.asarray(times), np.asarray(states),
        np.asarray(controls).reshape(len(controls), system.control_dim),
        np.asarray(costs), flag or "max-levels",
    )
    levels_ok = all(abs(a.level_after - b.level_before) == 0.0
                    for a, b in zip(segments[:-1], segments[1:]))
    return SynthesisRecord(
        z.tolist(), Wz, traj, segments, bound,
        flag == REACHED_TARGET, bool(c <= bound + params.quad_tol), levels_ok,
    )


@dataclass
class SopResult:
    residual: float
    profile: np.ndarray
    truncated: bool


def check_superoptimality(trajectory, W, comp):
    """``sup_T {int_0^T [p0(W) l + gamma(W)] dt + W(x(T))} - W(z)`` along a path.

    The ``p0(W) l`` part is integrated against the stored cost increments
    (trapezoid in ``p0``), the ``gamma(W)`` part by the trapezoid rule in
    time. Samples outside the field box end the evaluation (``truncated``).
    """
    w = W.sample(trajectory.states)
    ok = np.isfinite(w)
    truncated = not bool(np.all(ok))
    n = int(np.argmin(ok)) if truncated else len(w)
    w = w[:n]
    t = trajectory.times[:n]
    dc = np.diff(trajectory.accumulated_cost[:n])
    p = np.asarray(comp.p0(w), dtype=float) * np.ones_like(w)
    g = np.asarray(comp.gamma(w), dtype=float) * np.ones_like(w)
    inc = 0.5 * dc * (p[1:] + p[:-1]) + 0.5 * np.diff(t) * (g[1:] + g[:-1])
    integral = np.concatenate([[0.0], np.cumsum(inc)])
    profile = integral + w - w[0]
    return SopResult(float(np.max(profile)), profile, truncated)


@dataclass
class DescentRate:
    """KL descent rate together with its intermediate tables."""

    beta: KLFunction
    step: object
    R_max: float
    r_min: float
    t_work: float
    Gamma_table: np.ndarray
    N_table: np.ndarray
    T_table: np.ndarray
    min_gap: float

    def __call__(self, R, t):
        return self.beta(R, t)


class _DescentTables:
    """Gamma, N(R, r), cumulative times and the step function b(R, t)."""

    def __init__(self, brackets, gamma, R_ladder, n_max):
        self.br = brackets
        self.gamma = gamma
        self.R_ladder = np.asarray(R_ladder, dtype=float)
        self.n_max = int(n_max)
        js = np.arange(1, self.n_max + 1)
        cum = np.cumsum(self._tbar(self.R_ladder[:, None], js[None, :]), axis=1)
        self.cum_ladder = np.maximum.accumulate(cum, axis=0)

    def _tbar(self, R, j):
        scale = 2.0 ** (-j)
        return 3.0 * self.br.d_plus(R) * scale / self.gamma(self.br.d_minus(R) * scale)

    def Gamma(self, R):
        return self.br.d_minus.inverse(1.5 * self.br.d_plus(R))

    def N(self, R, r):
        ratio = 3.0 * self.br.d_plus(R) / self.br.d_minus(r)
        return np.maximum(np.ceil(np.log2(ratio)), 1).astype(int)

    def cumT(self, R):
        """Cumulative time bounds for N = 1..n_max, made nondecreasing in R."""
        R = np.atleast_1d(np.asarray(R, dtype=float))
        js = np.arange(1, self.n_max + 1)
        own = np.cumsum(self._tbar(R[:, None], js[None, :]), axis=1)
        k = np.searchsorted(self.R_ladder, R, side="right") - 1
        ladder = np.where(k[:, None] >= 0, self.cum_ladder[np.maximum(k, 0)], 0.0)
        return np.maximum(own, ladder)

    def T(self, R, r):
        R = np.atleast_1d(np.asarray(R, dtype=float))
        n = np.minimum(self.N(R, np.broadcast_to(r, R.shape)), self.n_max)
        return self.cumT(R)[np.arange(R.size), n - 1]

    def b(self, R, t):
        R, t = np.broadcast_arrays(np.asarray(R, dtype=float), np.asarray(t, dtype=float))
        shape = R.shape
        R, t = R.ravel(), t.ravel()
        cum = self.cumT(R)
        nstar = np.sum(cum <= t[:, None], axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = self.br.d_minus.inverse(3.0 * self.br.d_plus(R) * 2.0 ** (-nstar.astype(float)))
            jmax = np.floor(R / rho) - 1
        jmax = np.where(nstar > 0, jmax, 0)
        out = np.where(jmax >= 1, R / np.maximum(jmax + 1, 1.0), self.Gamma(R))
        return out.reshape(shape)


def build_descent_rate(brackets, gamma, R_max, r_min, n_r=48, n_t=96, samples=10_000, seed=0):
    """Step function ``b`` of the halving construction and a KL majorant ``beta``.

    ``b(R, t) = Gamma(R)`` before ``t_1(R)`` and ``R / (j + 1)`` on
    ``[t_j, t_{j+1})`` with ``t_j = T(R, R / (j + 1))``. The majorant is built
    by :func:`mrfkit.kl.cell_max_majorant` on geometric r-knots and uniform
    t-knots over the working rectangle ``[r_min, R_max] x [0, t_work]``
    (``t_work = T(R_max, r_min)``) and verified on ``samples`` scrambled
    Sobol points; on failure the knot grid is doubled once.
    """
    if not 0 < r_min < R_max:
        raise PreconditionError("need 0 < r_min < R_max")
    ladder = np.geomspace(r_min, R_max, 257)
    n_top = int(np.ceil(np.log2(3.0 * brackets.d_plus(R_max) / brackets.d_minus(r_min))))
    tabs = _DescentTables(brackets, gamma, ladder, n_top + 8)
    t_work = float(tabs.T(R_max, r_min)[0])
    pts = quasi_random_rectangle((r_min, R_max), (0.0, t_work), samples, seed)
    for attempt in range(2):
        kr = np.geomspace(r_min, R_max, n_r * 2**attempt)
        kt = np.linspace(0.0, t_work, n_t * 2**attempt)
        beta = cell_max_majorant(tabs.b, kr, kt)
        gap = majorization_gap(beta, tabs.b, pts)
        if gap >= 0 and not beta.axiom_violations():
            break
    else:
        raise ConstructionError(f"majorant fails by {gap} after refinement")
    Rg = np.geomspace(r_min, R_max, 9)
    Gamma_table = np.column_stack([Rg, tabs.Gamma(Rg)])
    N_table = np.array([[R, r, tabs.N(np.array([R]), np.array([r]))[0]]
                        for R in Rg for r in Rg if r <= R])
    T_table = np.array([[R, r, tabs.T(R, r)[0]] for R in Rg for r in Rg if r <= R])
    return DescentRate(beta, tabs, float(R_max), float(r_min), t_work,
                       Gamma_table, N_table, T_table, gap)


def envelope_violation(record, distance, rate):
    """Largest ``d(x(t)) - beta(d(z), t)`` over stored samples."""
    traj = record.trajectory
    d = np.asarray(distance(traj.states), dtype=float)
    env = rate(np.full_like(d, d[0]), traj.times)
    return float(np.max(d - env))
