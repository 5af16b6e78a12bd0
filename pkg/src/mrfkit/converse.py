"""Constructive objects of the converse direction: GAC with regulated cost to MRF.

Starting from a descent rate ``beta``, brackets of a cost bound ``W`` and a
controller that realises them, this module builds the bilateral radius
sequence, strip times, the majorant ``beta_bar``, ``Phi``, ``Psi``, the
lagrangian sequence ``ell_j`` and the augmented cost functional ``J``.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .comparators import MonotoneTable
from .core import REACHED_TARGET, integrate_trajectory
from .errors import (
    ConstructionError,
    ControllerInadequateError,
    GeometryError,
    InvalidKLError,
    RangeError,
)
from .kl import KLFunction, cell_max_majorant, majorization_gap, quasi_random_rectangle

# Geometric-series constant of the strip cost bound: (1/2) * sum_j 4^-j.
PHI_CONSTANT = 2.0 / 3.0


def _bisect_increasing(g, value, lo, hi, iters=200):
    """Smallest ``x`` in ``[lo, hi]`` with ``g(x) >= value`` for increasing ``g``."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) >= value:
            hi = mid
        else:
            lo = mid
    return hi


def _inverse_increasing(g, value, start=1.0, name="map"):
    """Inverse of an increasing map on ``(0, inf)`` by bracketing and bisection."""
    lo, hi = 0.0, float(start)
    for _ in range(2000):
        if g(hi) >= value:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise RangeError(f"cannot bracket the inverse of {name} at {value}")
    return _bisect_increasing(g, value, lo, hi)


@dataclass(frozen=True)
class RadiusTable:
    """Bilateral radii ``r_i`` for ``i_min <= i <= i_max`` (strictly decreasing in i)."""

    indices: np.ndarray
    values: np.ndarray

    def __getitem__(self, i):
        k = int(i) - int(self.indices[0])
        if not 0 <= k < len(self.values):
            raise RangeError(f"index {i} outside [{self.indices[0]}, {self.indices[-1]}]")
        return float(self.values[k])

    @property
    def i_min(self):
        return int(self.indices[0])

    @property
    def i_max(self):
        return int(self.indices[-1])

    def rows(self):
        return np.column_stack([self.indices, self.values])


def build_bilateral_sequence(beta, brackets, i_min, i_max, r0=1.0):
    """``r_0 = 1`` and ``r_i = min(beta^-1(r_{i-1}, 0), d_plus^-1(d_minus(r_{i-1}) / 4))``.

    Negative indices invert the same recursion: ``r_{i-1}`` is the radius
    whose successor equals ``r_i``, found by bisection.
    """
    if i_min > 0 or i_max < 1:
        raise ValueError("need i_min <= 0 <= 1 <= i_max")
    b0 = lambda r: float(beta(r, 0.0))  # noqa: E731

    def successor(r, i):
        try:
            a = _inverse_increasing(b0, r, start=r, name="beta(., 0)")
            c = float(brackets.d_plus.inverse(0.25 * brackets.d_minus(r)))
        except RangeError as exc:
            raise RangeError(f"index {i}: {exc}") from None
        return min(a, c)

    vals = {0: float(r0)}
    for i in range(1, i_max + 1):
        vals[i] = successor(vals[i - 1], i)
    for i in range(-1, i_min - 1, -1):
        target = vals[i + 1]
        try:
            vals[i] = _inverse_increasing(lambda r: successor(r, i), target, start=target,
                                          name=f"successor at index {i}")
        except RangeError as exc:
            raise RangeError(f"index {i}: {exc}") from None
    idx = np.arange(i_min, i_max + 1)
    values = np.array([vals[i] for i in idx])
    if np.any(np.diff(values) >= 0):
        raise ConstructionError("radius sequence is not strictly decreasing")
    return RadiusTable(idx, values)


def strip_index(r, table):
    """Unique ``i`` with ``r`` in ``(r_i, r_{i-1}]``."""
    r = float(r)
    vals = table.values
    if not vals[-1] < r <= vals[0]:
        raise RangeError(f"radius {r} outside ({vals[-1]}, {vals[0]}]")
    # values decrease with index; count radii that are >= r
    k = int(np.sum(vals >= r))
    return int(table.indices[0]) + k


@dataclass
class StripRun:
    strip: int
    start: list
    time: float
    cost: float
    end_index: int
    max_distance: float


@dataclass
class UniformTimes:
    """Strip times ``T_i`` (safety factor times the largest observed crossing)."""

    indices: np.ndarray
    T: np.ndarray
    observed: np.ndarray
    safety_factor: float
    mode: str
    samples_per_strip: int
    runs: list = field(default_factory=list)
    table: Optional[RadiusTable] = None

    def T_i(self, i):
        """``T_i`` with constant extension past both ends (keeps partial sums divergent)."""
        k = int(np.clip(int(i) - int(self.indices[0]), 0, len(self.T) - 1))
        return float(self.T[k])

    def T_bar(self, i, N):
        """``sum_{j=0}^{N} T_{i+j}`` with ``T_bar(i, -1) = 0``."""
        return float(sum(self.T_i(i + j) for j in range(int(N) + 1)))

    def T_of_R(self, R):
        """``T(R) = T_bar(i(R), max(-1, 1 - i(R)))``; zero for ``R <= r_1``."""
        i = strip_index(R, self.table)
        return self.T_bar(i, max(-1, 1 - i))

    def partial_sums(self, i, n):
        return np.cumsum([self.T_i(i + j) for j in range(n)])

    def rows(self):
        return np.column_stack([self.indices, self.observed, self.T])


def sample_strip(system, lo, hi, n, rng, max_tries=200):
    """``n`` random points with ``lo <= d(x) <= hi``, drawn around ``target_box``."""
    tb = system.target_box
    if tb is None:
        raise GeometryError("system has no target_box to sample around")
    box_lo, box_hi = tb[:, 0] - hi, tb[:, 1] + hi
    out = []
    for _ in range(max_tries):
        pts = rng.uniform(box_lo, box_hi, size=(max(4 * n, 64), system.state_dim))
        d = system.distance(pts)
        out.extend(pts[(d >= lo) & (d <= hi)])
        if len(out) >= n:
            return np.asarray(out[:n])
    raise GeometryError(f"no samples with {lo} <= d <= {hi}")


def estimate_uniform_times(system, gac_controller, r_table, samples_per_strip=8,
                           safety_factor=2.0, strips=None, dt=0.01, cap=1e3,
                           mode="enter", seed=0, workers=1):
    """Monte-Carlo strip crossing times under a GAC controller.

    For each strip ``i`` the controller ``gac_controller(z)`` (returning a
    schedule ``(t, x) -> u``) is simulated from random starts with
    ``r_i <= d(z) <= r_{i-1}`` until ``d`` drops to ``r_i`` (``mode="enter"``)
    or to ``(r_i + r_{i+1}) / 2`` (``mode="midpoint"``). ``T_i`` is
    ``safety_factor`` times the largest observed time. Starts are drawn from
    per-strip child seeds, so results do not depend on ``workers``.
    """
    if safety_factor <= 1:
        raise ValueError("safety_factor must exceed 1")
    if mode not in ("enter", "midpoint"):
        raise ValueError("mode must be 'enter' or 'midpoint'")
    if strips is None:
        strips = range(r_table.i_min + 1, r_table.i_max)
    strips = list(strips)
    children = np.random.SeedSequence(seed).spawn(len(strips))
    jobs = []
    for i, ss in zip(strips, children):
        r_in, r_out = r_table[i], r_table[i - 1]
        stop = r_in if mode == "enter" else 0.5 * (r_in + r_table[i + 1])
        starts = sample_strip(system, r_in, r_out, samples_per_strip, np.random.default_rng(ss))
        jobs.extend((i, z, stop) for z in starts)

    def run(job):
        i, z, stop = job
        traj = integrate_trajectory(system, z, gac_controller(z), dt, cap, stop, box=False)
        if traj.terminal_flag != REACHED_TARGET:
            raise ControllerInadequateError(
                f"start {z.tolist()} did not leave strip {i} within {cap}", z
            )
        d = system.distance(traj.states)
        end = strip_index(float(d[-1]), r_table) if d[-1] > r_table.values[-1] else i + 1
        return StripRun(i, z.tolist(), traj.final_time, traj.total_cost, end, float(d.max()))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(run, jobs))
    else:
        runs = [run(j) for j in jobs]
    observed = np.array([max(r.time for r in runs if r.strip == i) for i in strips])
    return UniformTimes(np.asarray(strips), safety_factor * observed, observed,
                        float(safety_factor), mode, int(samples_per_strip), runs, r_table)


@dataclass
class BetaBar:
    """Majorant ``beta_bar`` of the strip step function (and of ``beta``)."""

    kl: object
    step: Callable
    R_range: tuple
    t_work: float
    min_gap: float

    def __call__(self, r, t):
        return self.kl(r, t)


def strip_step_function(r_table, times, beta=None):
    """``b(R, t) = r_{i+N-2}`` on ``(r_i, r_{i-1}] x [T_bar(i, N-1), T_bar(i, N))``.

    Indices past ``i_max`` read ``r_{i_max}``; with ``beta`` given the result
    is ``max(b, beta)``.
    """
    vals = r_table.values
    i0 = r_table.i_min

    def r_at(k):
        return vals[np.clip(k - i0, 0, len(vals) - 1)]

    n_max = 4 * len(vals) + 8

    def step(R, t):
        R, t = np.broadcast_arrays(np.asarray(R, dtype=float), np.asarray(t, dtype=float))
        shape = R.shape
        R, t = R.ravel(), t.ravel()
        out = np.empty_like(R)
        cache = {}
        for n, (rr, tt) in enumerate(zip(R, t)):
            i = strip_index(rr, r_table)
            if i not in cache:
                cache[i] = np.cumsum([times.T_i(i + j) for j in range(n_max)])
            N = int(np.searchsorted(cache[i], tt, side="right"))
            out[n] = r_at(i + N - 2)
        if beta is not None:
            out = np.maximum(out, np.asarray(beta(R, t), dtype=float))
        return out.reshape(shape)

    return step


def build_beta_bar(r_table, times, beta=None, R_range=None, n_r=64, n_t=96,
                   samples=10_000, seed=0):
    """KL majorant of the strip step function on ``R_range x [0, t_work]``.

    ``t_work`` is the time at which the step from the top strip reaches
    ``r_{i_max}``. Verified on scrambled Sobol samples; one refinement retry.
    """
    if R_range is None:
        R_range = (r_table[r_table.i_max - 1], r_table[r_table.i_min + 2])
    lo, hi = map(float, R_range)
    i_top = strip_index(hi, r_table)
    t_work = times.T_bar(i_top, r_table.i_max - i_top + 2)
    step = strip_step_function(r_table, times, beta)
    pts = quasi_random_rectangle((lo, hi), (0.0, t_work), samples, seed)
    gap = -np.inf
    for attempt in range(2):
        kr = np.geomspace(lo, hi, n_r * 2**attempt)
        kt = np.linspace(0.0, t_work, n_t * 2**attempt)
        kl = cell_max_majorant(step, kr, kt)
        gap = majorization_gap(kl, step, pts)
        if gap >= 0 and not kl.axiom_violations():
            return BetaBar(kl, step, (lo, hi), t_work, gap)
    raise ConstructionError(f"beta_bar majorization fails by {gap}")


@dataclass
class Ell1:
    """``ell_1(R) = R exp(-tau(R))``, ``tau`` the inverse of the extended ``beta_bar(1, .)``."""

    beta_bar: Callable
    b10: float

    def extended(self, t):
        t = np.asarray(t, dtype=float)
        pos = np.asarray(self.beta_bar(np.ones_like(t), np.maximum(t, 0.0)), dtype=float)
        return np.where(t < 0, self.b10 - t, pos)

    def _knot_profile(self):
        """Knot times, values and tail rate of ``beta_bar(1, .)`` for a KL table."""
        kl = getattr(self.beta_bar, "kl", self.beta_bar)
        if not isinstance(kl, KLFunction):
            return None
        t = kl.knots_t
        v = np.asarray(self.extended(t), dtype=float)
        if np.any(np.diff(v) >= 0):
            return None
        return t, v, kl.tail_rate

    def tau(self, R):
        R = np.atleast_1d(np.asarray(R, dtype=float))
        out = np.empty_like(R)
        neg = R >= self.b10
        out[neg] = self.b10 - R[neg]
        idx = np.flatnonzero(~neg)
        prof = self._knot_profile() if idx.size else None
        if prof is not None:
            # beta_bar(1, .) is piecewise linear on the knots, exponential past them
            t, v, rate = prof
            r = R[idx]
            k = np.clip(np.searchsorted(-v, -r, side="right") - 1, 0, t.size - 2)
            lin = t[k] + (v[k] - r) * (t[k + 1] - t[k]) / (v[k] - v[k + 1])
            tail = t[-1] + np.log(v[-1] / np.maximum(r, 1e-300)) / rate
            out[idx] = np.where(r < v[-1], tail, lin)
            return out
        if idx.size:
            lo = np.zeros(idx.size)
            hi = np.ones(idx.size)
            for _ in range(200):
                small = self.extended(hi) > R[idx]
                if not np.any(small):
                    break
                hi = np.where(small, 2.0 * hi, hi)
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                above = self.extended(mid) > R[idx]
                lo = np.where(above, mid, lo)
                hi = np.where(above, hi, mid)
            out[idx] = 0.5 * (lo + hi)
        return out

    def __call__(self, R):
        R = np.asarray(R, dtype=float)
        flat = np.atleast_1d(R)
        out = np.where(flat > 0, flat * np.exp(-self.tau(np.maximum(flat, 1e-300))), 0.0)
        return out.reshape(R.shape) if R.ndim else float(out[0])

    def table(self, ladder):
        ladder = np.asarray(ladder, dtype=float)
        return MonotoneTable(ladder, self(ladder), "ell1")


def build_ell1(beta_bar, t_check=None):
    """``ell_1`` from ``beta_bar``; ``beta_bar(1, .)`` must strictly decrease on knots."""
    if t_check is None:
        t_check = getattr(getattr(beta_bar, "kl", beta_bar), "knots_t", np.linspace(0, 10, 101))
    vals = np.asarray(beta_bar(np.ones(len(t_check)), np.asarray(t_check)), dtype=float)
    if np.any(np.diff(vals) >= 0):
        raise InvalidKLError("beta_bar(1, .) is not strictly decreasing at the knots")
    return Ell1(beta_bar, float(beta_bar(1.0, 0.0)))


@dataclass
class KappaResult:
    value: float
    M_bar: float
    samples: int


def kappa(b, c, system, ell1, n_samples=4096, seed=0):
    """``kappa(b, c) = ell_1(b) / M(b, c)`` with ``M`` the largest speed on the annulus."""
    if not 0 < b < c:
        raise ValueError("need 0 < b < c")
    rng = np.random.default_rng(seed)
    pts = sample_strip(system, b, c, n_samples, rng)
    speed = max(float(np.max(np.linalg.norm(system.f(pts, u), axis=-1)))
                for u in system.control_samples)
    lb = float(ell1(b))
    val = np.inf if speed == 0 else lb / speed
    return KappaResult(val, speed, len(pts))


@dataclass
class PhiPsi:
    Phi: MonotoneTable
    Psi: Callable
    C: float = PHI_CONSTANT


def build_Phi_Psi(r_table, brackets, beta_bar, checks=2000):
    """``Phi`` piecewise linear with ``Phi(r_i) = C d_plus(r_{i-2})``; ``Psi(R) = beta_bar(R+1, 0) + 2``.

    ``Phi`` majorises the step ``C d_plus(r_{i(R)-2})`` because the step is
    constant on each ``(r_i, r_{i-1}]`` and ``Phi`` is increasing; the claim is
    re-checked on ``checks`` log-spaced radii.
    """
    idx = np.arange(r_table.i_min + 2, r_table.i_max + 1)
    knots = np.array([r_table[i] for i in idx])
    vals = PHI_CONSTANT * np.array([brackets.d_plus(r_table[i - 2]) for i in idx])
    order = np.argsort(knots)
    Phi = MonotoneTable(knots[order], vals[order], "Phi")
    lo, hi = knots.min(), knots.max()
    rs = np.geomspace(lo * (1 + 1e-12), hi, checks)
    step = np.array([PHI_CONSTANT * brackets.d_plus(r_table[strip_index(r, r_table) - 2])
                     for r in rs])
    if np.any(Phi(rs) < step * (1 - 1e-12)):
        raise ConstructionError("Phi does not majorise the strip cost step")

    def Psi(R):
        R = np.asarray(R, dtype=float)
        return np.asarray(beta_bar(R + 1.0, np.zeros_like(R))) + 2.0

    return PhiPsi(Phi, Psi)


def trapezoid_bump(R, start, plateau):
    """0 off ``[start, start+3]``, ``plateau`` on ``[start+1, start+2]``, linear between."""
    R = np.asarray(R, dtype=float)
    up = np.clip(R - start, 0.0, 1.0)
    down = np.clip(start + 3.0 - R, 0.0, 1.0)
    return plateau * np.minimum(up, down)


@dataclass(frozen=True)
class EllFunction:
    """``ell`` as ``max(table, ell_1)``: the knot table stays above ``ell_1`` between knots."""

    table: MonotoneTable
    floor: Callable

    @property
    def x(self):
        return self.table.x

    @property
    def y(self):
        return self.table.y

    def __call__(self, R):
        R = np.asarray(R, dtype=float)
        out = np.maximum(self.table(R), self.floor(R))
        return out if np.ndim(out) else float(out)

    def rows(self):
        return self.table.rows()


@dataclass
class EllSequence:
    ladder: np.ndarray
    levels: list
    L: list
    kappas: list
    plateaus: list
    anchors: list

    @property
    def ell(self):
        return self.levels[-1]

    def table(self):
        """Final ``ell`` as a strictly increasing table (ulp nudges on flat runs)."""
        y = np.array(self.levels[-1], dtype=float)
        for k in range(1, y.size):
            if y[k] <= y[k - 1]:
                y[k] = np.nextafter(y[k - 1], np.inf)
        return MonotoneTable(self.ladder, y, "ell")

    def function(self, ell1):
        """Final ``ell`` as a continuous increasing map bounded below by ``ell1``."""
        return EllFunction(self.table(), ell1)


def build_ell_sequence(j_max, beta_bar, Phi, T_times, system, ell1, ladder=None,
                       points=400, kappa_samples=4096, seed=0):
    """Recursive ``ell_{j+1} = (1 + rho_j) ell_j`` on a ladder.

    ``L_j = ell_j(beta_bar(j, 0)) T(j) + beta_bar(1, 0)``, ``kappa_j =
    kappa(beta_bar(j, 0) + 1, beta_bar(j, 0) + 2)`` and ``rho_j`` is the
    trapezoid with plateau ``(L_j + Phi(j)) / kappa_j``. Each ``ell_{j+1}`` is
    replaced by its running maximum along the ladder, which keeps it
    increasing and leaves ``R <= beta_bar(j, 0)`` untouched.
    """
    if j_max < 2:
        raise ValueError("j_max must be at least 2")
    anchors = [float(beta_bar(float(j), 0.0)) for j in range(1, j_max + 1)]
    top = anchors[-1] + 3.0
    breaks = np.concatenate([[a, a + 1, a + 2, a + 3] for a in anchors])
    if ladder is None:
        ladder = np.unique(np.concatenate([np.geomspace(1e-6, top, points), breaks]))
    ladder = np.asarray(ladder, dtype=float)
    if ladder[-1] < top or np.any(~np.isin(breaks[:-4], ladder)):
        raise ConstructionError("ladder does not cover every bump support")
    T_of = T_times if callable(T_times) else T_times.T_of_R
    levels = [ell1(ladder)]
    L, kappas, plateaus = [], [], []
    for j in range(1, j_max):
        a = anchors[j - 1]
        cur = levels[-1]
        Lj = float(np.interp(a, ladder, cur)) * float(T_of(float(j))) + anchors[0]
        kj = kappa(a + 1.0, a + 2.0, system, ell1, kappa_samples, seed + j).value
        pl = (Lj + float(Phi(float(j)))) / kj
        nxt = np.maximum.accumulate((1.0 + trapezoid_bump(ladder, a, pl)) * cur)
        nxt = np.where(ladder <= a, cur, nxt)
        levels.append(nxt)
        L.append(Lj)
        kappas.append(kj)
        plateaus.append(pl)
    return EllSequence(ladder, levels, L, kappas, plateaus, anchors)


@dataclass
class JResult:
    value: float
    flag: str
    cost: float
    trajectory: object


def evaluate_J(system, ell, z, control_signal, dt=0.01, horizon=50.0, target_tol=1e-9,
               cap=1e6, box=False):
    """``J(z, u) = int [ell(d(x)) + l(x, u)] dt`` up to band entry.

    Returns ``inf`` when the band is not reached within ``horizon`` or the
    integral exceeds ``cap``; ``cost`` always holds the accumulated value.
    """
    ell_f = ell if callable(ell) else (lambda r: 0.0 * np.asarray(r))
    base = system.running_cost
    aug = dataclasses.replace(
        system,
        running_cost=lambda x, u: np.asarray(ell_f(system.distance(x)), dtype=float)
        + np.asarray(base(x, u), dtype=float),
    )
    traj = integrate_trajectory(aug, z, control_signal, dt, horizon, target_tol, box=box)
    cost = traj.total_cost
    value = cost if (traj.reached_target and cost <= cap) else float("inf")
    return JResult(value, traj.terminal_flag, cost, traj)


@dataclass(frozen=True)
class ConverseParams:
    """Knobs of the converse construction; ``strips=None`` means ``i_min+2 .. i_max-1``."""

    i_min: int = -4
    i_max: int = 8
    samples_per_strip: int = 8
    safety_factor: float = 2.0
    strip_mode: str = "enter"
    strips: Optional[tuple] = None
    dt: float = 0.005
    cap: float = 1e3
    j_max: int = 3
    seed: int = 0
    workers: int = 1

    def strip_range(self):
        if self.strips is None:
            return range(self.i_min + 2, self.i_max)
        lo, hi = self.strips
        return range(int(lo), int(hi) + 1)


@dataclass
class ConverseResult:
    r_table: RadiusTable
    times: UniformTimes
    beta_bar: BetaBar
    ell1: Ell1
    phi_psi: PhiPsi
    ell_sequence: EllSequence
    ell: EllFunction
    V: object
    V_brackets: object
    comparators: object
    structure: object
    decrease: object
    tol: float


def build_mrf(system, beta, brackets, gac_controller, grid, params=ConverseParams(),
              solver=None):
    """GAC data to a verified MRF candidate.

    Builds ``r_i``, ``T_i``, ``beta_bar``, ``ell_1``, ``Phi``, ``Psi`` and
    ``ell``, solves ``V`` with lagrangian ``ell(d) + l`` and checks it with
    ``p0 = 1`` and ``gamma = ell o d_plus^-1`` (brackets of ``V``) at tolerance
    ``2 * fixed_point_tol / tau``.
    """
    from .comparators import ComparatorPair
    from .hjb import SolverParams, solve_value_function
    from .verify import check_decrease, check_structure, compute_brackets

    solver = SolverParams() if solver is None else solver
    rt = build_bilateral_sequence(beta, brackets, params.i_min, params.i_max)
    times = estimate_uniform_times(
        system, gac_controller, rt, params.samples_per_strip, params.safety_factor,
        strips=params.strip_range(), dt=params.dt, cap=params.cap, mode=params.strip_mode,
        seed=params.seed, workers=params.workers,
    )
    bb = build_beta_bar(rt, times, beta, seed=params.seed)
    e1 = build_ell1(bb)
    pp = build_Phi_Psi(rt, brackets, bb)
    seq = build_ell_sequence(params.j_max, bb, pp.Phi, times, system, e1, seed=params.seed)
    ell = seq.function(e1)
    V = solve_value_function(
        system, grid, lambda x, u: ell(system.distance(x)) + system.cost(x, u), solver
    )
    vb = compute_brackets(V, system.distance)
    comp = ComparatorPair(
        lambda v: np.ones(np.shape(v)) if np.ndim(v) else 1.0,
        lambda v: ell(vb.d_plus.inverse(v)),
        "one", "ell_of_dplus_inverse",
    )
    tol = 2.0 * solver.fixed_point_tol / V.meta["tau"]
    structure = check_structure(V, target_tol=solver.target_tol)
    decrease = check_decrease(V, system, comp, tol=tol)
    return ConverseResult(rt, times, bb, e1, pp, seq, ell, V, vb, comp, structure, decrease, tol)
