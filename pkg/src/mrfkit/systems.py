"""Built-in catalog of benchmark control systems.

New systems can be added with :func:`register_system`; a factory takes
keyword parameters and returns a :class:`~mrfkit.core.ControlSystem`.
"""

import numpy as np

from .core import ControlSystem

SYSTEMS = {}


def register_system(name):
    def deco(factory):
        SYSTEMS[name] = factory
        return factory

    return deco


def make_system(name, **params):
    try:
        factory = SYSTEMS[name]
    except KeyError:
        raise KeyError(f"unknown system '{name}'; known: {sorted(SYSTEMS)}") from None
    return factory(**params)


def interval_distance(radius):
    def d(x):
        return np.maximum(np.abs(x[..., 0]) - radius, 0.0)

    return d


def ball_distance(radius):
    def d(x):
        return np.maximum(np.linalg.norm(x, axis=-1) - radius, 0.0)

    return d


def _unit_cost(x, u):
    return np.ones(np.shape(x)[:-1])


@register_system("int1d_mintime")
def int1d_mintime(controls=3, box=(-2.5, 2.5), target_radius=0.1):
    """Scalar integrator ``x' = u``, ``u`` in [-1, 1], unit running cost."""

    def f(x, u):
        return np.full(np.shape(x), u[0], dtype=float)

    return ControlSystem(
        name="int1d_mintime",
        state_dim=1,
        control_samples=np.linspace(-1.0, 1.0, int(controls)),
        dynamics=f,
        running_cost=_unit_cost,
        target_distance=interval_distance(target_radius),
        box=[box],
        target_box=[(-target_radius, target_radius)],
        lipschitz_hint=0.0,
        params={"controls": int(controls), "box": list(box), "target_radius": target_radius},
    )


@register_system("double_integrator_mintime")
def double_integrator_mintime(controls=3, box=((-2.0, 2.0), (-2.0, 2.0)), target_radius=0.1):
    """``x'' = u`` written as ``(x, v)' = (v, u)``, unit running cost."""

    def f(x, u):
        x = np.asarray(x)
        return np.stack([x[..., 1], np.full(x.shape[:-1], u[0])], axis=-1)

    return ControlSystem(
        name="double_integrator_mintime",
        state_dim=2,
        control_samples=np.linspace(-1.0, 1.0, int(controls)),
        dynamics=f,
        running_cost=_unit_cost,
        target_distance=ball_distance(target_radius),
        box=np.asarray(box, dtype=float),
        target_box=[(-target_radius, target_radius)] * 2,
        lipschitz_hint=1.0,
        params={"controls": int(controls), "box": np.asarray(box).tolist(),
                "target_radius": target_radius},
    )


@register_system("zermelo")
def zermelo(controls=16, box=((-2.0, 2.0), (-2.0, 2.0)), target_radius=0.1, drift=0.5):
    """Unit-speed boat steering heading ``u`` in a uniform current along x."""

    def f(x, u):
        x = np.asarray(x)
        shape = x.shape[:-1]
        return np.stack(
            [np.full(shape, np.cos(u[0]) + drift), np.full(shape, np.sin(u[0]))], axis=-1
        )

    headings = 2.0 * np.pi * np.arange(int(controls)) / int(controls)
    return ControlSystem(
        name="zermelo",
        state_dim=2,
        control_samples=headings,
        dynamics=f,
        running_cost=_unit_cost,
        target_distance=ball_distance(target_radius),
        box=np.asarray(box, dtype=float),
        target_box=[(-target_radius, target_radius)] * 2,
        lipschitz_hint=0.0,
        params={"controls": int(controls), "box": np.asarray(box).tolist(),
                "target_radius": target_radius, "drift": drift},
    )


@register_system("scalar_lq")
def scalar_lq(controls=21, box=(-2.5, 2.5), target_radius=0.1):
    """``x' = u`` with quadratic running cost ``x^2 + u^2``."""

    def f(x, u):
        return np.full(np.shape(x), u[0], dtype=float)

    def cost(x, u):
        return x[..., 0] ** 2 + u[0] ** 2

    return ControlSystem(
        name="scalar_lq",
        state_dim=1,
        control_samples=np.linspace(-1.0, 1.0, int(controls)),
        dynamics=f,
        running_cost=cost,
        target_distance=interval_distance(target_radius),
        box=[box],
        target_box=[(-target_radius, target_radius)],
        lipschitz_hint=2.0 * max(abs(box[0]), abs(box[1])),
        params={"controls": int(controls), "box": list(box), "target_radius": target_radius},
    )


def double_integrator_origin_time(x, v):
    """Bang-bang minimum time to steer ``(x, v)`` to the origin (unit control bound)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    s = x + 0.5 * v * np.abs(v)
    above = v + 2.0 * np.sqrt(np.maximum(x + 0.5 * v**2, 0.0))
    below = -v + 2.0 * np.sqrt(np.maximum(-x + 0.5 * v**2, 0.0))
    return np.where(s > 0, above, np.where(s < 0, below, np.abs(v)))


def double_integrator_ball_time(x, v, radius, n_switch=201):
    """Minimum time for the double integrator to enter the ball of given radius.

    Time-optimal controls of this planar linear system are bang-bang with at
    most one switch, so the value is a minimum over ``(sign, t1, t2)``. For
    each sign and each switch time on a fine grid the first entry time of the
    second arc is found in closed form from a quartic; the switch time is then
    refined by golden-section search around the best grid value.
    """
    from scipy.optimize import minimize_scalar

    z = np.array([x, v], dtype=float)
    if np.hypot(*z) <= radius:
        return 0.0
    horizon = float(double_integrator_origin_time(x, v)) + 1.0
    best = np.inf
    for sgn in (1.0, -1.0):

        def entry_time(t1, sgn=sgn):
            x1 = z[0] + z[1] * t1 + 0.5 * sgn * t1**2
            v1 = z[1] + sgn * t1
            # first arc may already enter the ball
            early = _first_entry_on_arc(z[0], z[1], sgn, radius, t1)
            if early is not None:
                return early
            late = _first_entry_on_arc(x1, v1, -sgn, radius, horizon)
            return np.inf if late is None else t1 + late

        grid = np.linspace(0.0, horizon, n_switch)
        vals = np.array([entry_time(t) for t in grid])
        k = int(np.argmin(vals))
        if not np.isfinite(vals[k]):
            continue
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, n_switch - 1)]
        # finite stand-in for "never enters" keeps the parabolic steps well defined
        capped = lambda t: min(entry_time(t), 10.0 * horizon)  # noqa: E731
        res = minimize_scalar(capped, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        best = min(best, vals[k], float(res.fun))
    return best


def _first_entry_on_arc(x0, v0, a, radius, t_max):
    """Earliest ``t`` in [0, t_max] with ``|(x(t), v(t))| <= radius`` under constant ``a``."""
    # |x|^2 + |v|^2 - r^2 as a quartic in t
    px = np.polynomial.Polynomial([x0, v0, 0.5 * a])
    pv = np.polynomial.Polynomial([v0, a])
    q = px**2 + pv**2 - radius**2
    if q(0.0) <= 0:
        return 0.0
    roots = q.roots()
    real = np.sort(roots[np.abs(roots.imag) < 1e-9].real)
    real = real[(real >= 0) & (real <= t_max)]
    for t in real:
        # a root where q changes sign from + to - (or touches zero)
        if q(t + 1e-9) <= 1e-12 or q(t) <= 1e-12:
            return float(t)
    return None
