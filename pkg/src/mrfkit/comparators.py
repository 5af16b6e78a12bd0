"""Monotone tables, comparator pairs (p0, gamma) and bracket pairs."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import PreconditionError, RangeError


@dataclass(frozen=True)
class MonotoneTable:
    """Piecewise-linear nondecreasing map r -> y given by knot rows.

    Below the first knot the map is extended proportionally to ``y0 * r / x0``
    (so it tends to 0 at 0+); beyond the last knot it is extended by
    ``y_last * r / x_last``. With positive knots and increasing values the
    extension keeps the map strictly increasing and unbounded.
    """

    x: np.ndarray
    y: np.ndarray
    name: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).copy()
        y = np.asarray(self.y, dtype=float).copy()
        if x.ndim != 1 or x.shape != y.shape or x.size < 1:
            raise ValueError("table needs matching one-dimensional knot arrays")
        if np.any(np.diff(x) <= 0):
            raise ValueError("table abscissae must be strictly increasing")
        if x[0] <= 0:
            raise ValueError("table abscissae must be positive")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def strictly_increasing(self):
        return bool(np.all(np.diff(self.y) > 0) and self.y[0] > 0)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.x, self.y)
        out = np.where(r < self.x[0], self.y[0] * r / self.x[0], out)
        out = np.where(r > self.x[-1], self.y[-1] * r / self.x[-1], out)
        return out if out.ndim else float(out)

    def inverse(self, v):
        """Inverse map by bisection on the knot values (needs strict increase)."""
        if not self.strictly_increasing:
            raise PreconditionError(f"table {self.name!r} is not strictly increasing")
        v = np.asarray(v, dtype=float)
        k = np.searchsorted(self.y, v, side="left")
        k = np.clip(k, 1, max(len(self.y) - 1, 1))
        if len(self.y) > 1:
            y0, y1 = self.y[k - 1], self.y[k]
            x0, x1 = self.x[k - 1], self.x[k]
            inner = x0 + (v - y0) * (x1 - x0) / (y1 - y0)
        else:
            inner = v * self.x[0] / self.y[0]
        out = np.where(v < self.y[0], v * self.x[0] / self.y[0], inner)
        out = np.where(v > self.y[-1], v * self.x[-1] / self.y[-1], out)
        return out if out.ndim else float(out)

    def compose_inverse(self, g):
        """Callable ``v -> g(self.inverse(v))``."""
        return lambda v: g(self.inverse(v))

    def rows(self):
        return np.column_stack([self.x, self.y])


@dataclass(frozen=True)
class ComparatorPair:
    """The comparison functions ``p0`` (in [0, 1], nondecreasing) and ``gamma``."""

    p0: Callable
    gamma: Callable
    p0_name: str = "custom"
    gamma_name: str = "custom"
    allow_constant_gamma: bool = False
    domain: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    def validate(self, samples=None):
        """List of violated invariants on a sample of positive arguments."""
        if samples is None:
            samples = np.logspace(-6, 3, 400)
        v = np.asarray(samples, dtype=float)
        p = np.asarray(self.p0(v), dtype=float) * np.ones_like(v)
        g = np.asarray(self.gamma(v), dtype=float) * np.ones_like(v)
        problems = []
        if np.any(p < 0) or np.any(p > 1):
            problems.append("p0 leaves [0, 1]")
        if np.any(np.diff(p) < 0):
            problems.append("p0 is not nondecreasing")
        if np.any(g <= 0):
            problems.append("gamma is not positive")
        dg = np.diff(g)
        if self.allow_constant_gamma:
            if np.any(dg < 0):
                problems.append("gamma is decreasing")
        elif np.any(dg <= 0):
            problems.append("gamma is not strictly increasing")
        return problems

    def scaled(self, c):
        """Pair ``(p0(./c), c * gamma(./c))`` describing the field ``c * W``."""
        p0, gamma = self.p0, self.gamma
        return ComparatorPair(
            lambda v: p0(np.asarray(v) / c),
            lambda v: c * gamma(np.asarray(v) / c),
            f"{self.p0_name}/scaled",
            f"{self.gamma_name}/scaled",
            self.allow_constant_gamma,
            None if self.domain is None else c * self.domain,
        )


def _const(value):
    return lambda v: np.full(np.shape(v), float(value)) if np.ndim(v) else float(value)


P0_REGISTRY = {
    "one": lambda scale=1.0: _const(1.0),
    "constant": lambda scale=1.0: _const(scale),
    "sqrt_cap": lambda scale=1.0: (lambda v: np.minimum(1.0, np.sqrt(np.asarray(v) / scale))),
    "linear_cap": lambda scale=1.0: (lambda v: np.minimum(1.0, np.asarray(v) / scale)),
}

GAMMA_REGISTRY = {
    "saturating": lambda scale=1.0: (lambda v: scale * np.asarray(v) / (1.0 + np.asarray(v))),
    "identity": lambda scale=1.0: (lambda v: scale * np.asarray(v)),
    "square": lambda scale=1.0: (lambda v: scale * np.asarray(v) ** 2),
    "sqrt": lambda scale=1.0: (lambda v: scale * np.sqrt(np.asarray(v))),
    "constant": lambda scale=1.0: _const(scale),
}


def _split(spec):
    name, _, arg = str(spec).partition(":")
    return name.strip(), (float(arg) if arg.strip() else 1.0)


def resolve_p0(spec):
    """Builtin ``p0`` from ``"name"`` or ``"name:scale"``."""
    name, scale = _split(spec)
    if name not in P0_REGISTRY:
        raise KeyError(f"unknown p0 '{name}'; known: {sorted(P0_REGISTRY)}")
    if name == "constant" and not 0.0 < scale <= 1.0:
        raise ValueError("constant p0 must lie in (0, 1]")
    return P0_REGISTRY[name](scale)


def resolve_gamma(spec):
    """Builtin ``gamma`` from ``"name"`` or ``"name:scale"``."""
    name, scale = _split(spec)
    if name not in GAMMA_REGISTRY:
        raise KeyError(f"unknown gamma '{name}'; known: {sorted(GAMMA_REGISTRY)}")
    if scale <= 0:
        raise ValueError("gamma scale must be positive")
    return GAMMA_REGISTRY[name](scale)


def make_comparators(p0="one", gamma="saturating"):
    """Comparator pair from registry names; constant gamma is accepted with a warning."""
    gname, _ = _split(gamma)
    constant = gname == "constant"
    if constant:
        warnings.warn(
            "constant gamma is not strictly increasing; accepted as an ordinary Petrov rate",
            stacklevel=2,
        )
    return ComparatorPair(resolve_p0(p0), resolve_gamma(gamma), str(p0), str(gamma), constant)


@dataclass(frozen=True)
class BracketPair:
    """Lower/upper brackets with ``d_minus(d(x)) <= W(x) <= d_plus(d(x))``."""

    d_minus: MonotoneTable
    d_plus: MonotoneTable
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def identity(cls, r_max=1e3, n=2):
        r = np.geomspace(1e-3, r_max, max(n, 2))
        return cls(MonotoneTable(r, r, "d_minus"), MonotoneTable(r, r, "d_plus"))

    @classmethod
    def from_functions(cls, lower, upper, radii):
        r = np.asarray(radii, dtype=float)
        return cls(MonotoneTable(r, lower(r), "d_minus"), MonotoneTable(r, upper(r), "d_plus"))

    @property
    def radii(self):
        return self.d_plus.x

    def check_cover(self, r):
        """Raise :class:`RangeError` when ``r`` falls outside the tabulated ladder."""
        r = np.asarray(r, dtype=float)
        if np.any(r > self.radii[-1] * (1 + 1e-12)) or np.any(r <= 0):
            raise RangeError(f"radius outside bracket ladder (0, {self.radii[-1]}]")
