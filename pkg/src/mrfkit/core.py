"""Control systems, sample-and-hold trajectories and their integration.

All user-supplied callables are vectorised over leading axes: ``dynamics``
maps states of shape ``(..., n)`` and a single control of shape ``(m,)``
to velocities of shape ``(..., n)``; ``running_cost`` and
``target_distance`` return arrays of shape ``(...)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .errors import IntegrationDivergedError, PreconditionError

REACHED_TARGET = "reached-target"
HORIZON_EXHAUSTED = "horizon-exhausted"
LEFT_DOMAIN = "left-domain"


@dataclass(frozen=True)
class ControlSystem:
    """Dynamics ``f``, running cost ``l``, sampled control set and target distance.

    ``box`` is the computational domain used by integrators and grids;
    ``target_box`` is a bounding box of the target set, used when sampling
    regions described by the distance function (annuli, strips).
    """

    name: str
    state_dim: int
    control_samples: np.ndarray
    dynamics: Callable
    running_cost: Callable
    target_distance: Callable
    box: Optional[np.ndarray] = None
    target_box: Optional[np.ndarray] = None
    lipschitz_hint: Optional[float] = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        u = np.asarray(self.control_samples, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if u.size == 0:
            raise ValueError("control_samples must be nonempty")
        object.__setattr__(self, "control_samples", u)
        for name in ("box", "target_box"):
            val = getattr(self, name)
            if val is not None:
                val = np.atleast_2d(np.asarray(val, dtype=float))
                if val.shape != (self.state_dim, 2):
                    raise ValueError(f"{name} must have shape ({self.state_dim}, 2)")
                object.__setattr__(self, name, val)

    @property
    def control_dim(self):
        return self.control_samples.shape[1]

    def f(self, x, u):
        return np.asarray(self.dynamics(np.asarray(x, dtype=float), np.asarray(u, dtype=float)))

    def cost(self, x, u):
        return np.asarray(self.running_cost(np.asarray(x, dtype=float), np.asarray(u, dtype=float)))

    def distance(self, x):
        return np.asarray(self.target_distance(np.asarray(x, dtype=float)))

    def in_box(self, x):
        if self.box is None:
            return True
        x = np.asarray(x)
        return bool(np.all((x >= self.box[:, 0]) & (x <= self.box[:, 1])))

    def validate(self, points, tol=1e-9):
        """Check the standing invariants on sampled points; returns a list of problems."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        problems = []
        for u in self.control_samples:
            if np.any(self.cost(points, u) < 0):
                problems.append(f"negative running cost for control {u.tolist()}")
        d = self.distance(points)
        if np.any(d < 0):
            problems.append("negative target distance")
        # 1-Lipschitz check on consecutive pairs
        gap = np.abs(np.diff(d))
        step = np.linalg.norm(np.diff(points, axis=0), axis=-1)
        if np.any(gap > step + tol):
            problems.append("target distance is not 1-Lipschitz on the sample")
        return problems


@dataclass(frozen=True)
class Trajectory:
    """Sample-and-hold trajectory ``(x0, x, u)`` on a nonuniform time grid.

    ``controls[k]`` is held on ``[times[k], times[k+1])``. After the last
    sample the state and cost are frozen.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    accumulated_cost: np.ndarray
    terminal_flag: str

    @property
    def final_time(self):
        return float(self.times[-1])

    @property
    def final_state(self):
        return self.states[-1]

    @property
    def total_cost(self):
        return float(self.accumulated_cost[-1])

    @property
    def reached_target(self):
        return self.terminal_flag == REACHED_TARGET

    def state_at(self, t):
        """Piecewise-linear state interpolant, frozen beyond the final time."""
        t = np.clip(t, self.times[0], self.times[-1])
        return np.stack(
            [np.interp(t, self.times, self.states[:, k]) for k in range(self.states.shape[1])],
            axis=-1,
        )


def rk4_step(system, x, u, h):
    k1 = system.f(x, u)
    k2 = system.f(x + 0.5 * h * k1, u)
    k3 = system.f(x + 0.5 * h * k2, u)
    k4 = system.f(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def as_schedule(control_signal):
    """Normalise a control signal into a callable ``(t, x) -> u``."""
    if callable(control_signal):
        return control_signal
    u = np.atleast_1d(np.asarray(control_signal, dtype=float))
    return lambda t, x: u


def first_crossing(g, lo, hi, iters=100):
    """Root of ``g`` on ``[lo, hi]`` with g(lo) > 0 >= g(hi), on the ``g <= 0`` side.

    Brent's method locates the crossing; the returned point is then nudged
    right (never past ``hi``) until ``g <= 0`` holds there.
    """
    if g(hi) == 0.0:
        return hi
    s = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4.0 * np.finfo(float).eps, maxiter=iters)
    step = max(abs(s), abs(hi - lo)) * np.finfo(float).eps
    while s < hi and g(s) > 0:
        s = min(hi, s + step)
        step *= 2.0
    return s


def integrate_trajectory(system, z, control_signal, dt, horizon, target_tol, box=None):
    """Fixed-step RK4 integration of ``x' = f(x, u)`` with trapezoidal cost.

    The control is sampled at the start of every step and held over it.
    Integration stops at the first band entry ``d(x) <= target_tol``
    (located inside the step by bisection), at ``horizon``, or when the
    state leaves ``box`` (defaults to ``system.box``; ``False`` disables the
    domain check).
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if dt <= 0 or dt >= horizon:
        raise PreconditionError("need 0 < dt < horizon")
    if float(system.distance(z)) <= target_tol:
        raise PreconditionError("start point is already inside the target band")
    if box is None:
        box = system.box
    elif box is False:
        box = None
    else:
        box = np.atleast_2d(np.asarray(box, dtype=float))
    schedule = as_schedule(control_signal)

    times = [0.0]
    states = [z]
    controls = []
    costs = [0.0]
    flag = HORIZON_EXHAUSTED
    t, x, c = 0.0, z, 0.0
    while t < horizon - 1e-12 * horizon:
        u = np.atleast_1d(np.asarray(schedule(t, x), dtype=float))
        h = min(dt, horizon - t)
        x_new = rk4_step(system, x, u, h)
        if not np.all(np.isfinite(x_new)):
            raise IntegrationDivergedError(f"non-finite state after t={t}", last_time=t)
        if float(system.distance(x_new)) <= target_tol:
            h = first_crossing(
                lambda s: float(system.distance(rk4_step(system, x, u, s))) - target_tol, 0.0, h
            )
            x_new = rk4_step(system, x, u, h)
            flag = REACHED_TARGET
        l0 = float(system.cost(x, u))
        l1 = float(system.cost(x_new, u))
        c = c + 0.5 * h * (l0 + l1)
        t = t + h
        x = x_new
        times.append(t)
        states.append(x)
        controls.append(u)
        costs.append(c)
        if flag == REACHED_TARGET:
            break
        if box is not None and not np.all((x >= box[:, 0]) & (x <= box[:, 1])):
            flag = LEFT_DOMAIN
            break
    return Trajectory(
        np.asarray(times),
        np.asarray(states),
        np.asarray(controls).reshape(len(controls), system.control_dim),
        np.asarray(costs),
        flag,
    )
