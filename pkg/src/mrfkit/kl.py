"""Class-KL functions on knot tables and cell-max majorants of step functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .errors import ConstructionError, InvalidKLError

# Relative size of the perturbation that makes knot values strictly monotone.
_STRICT_EPS = 1e-9


@dataclass(frozen=True)
class KLFunction:
    """Two-argument comparison function built from a knot table.

    Values are bilinear between knots, scaled as ``r / r_0`` below the first
    r-knot (so ``beta(0, t) = 0``), extended proportionally in ``r`` beyond
    the last r-knot and decay like ``exp(-tail_rate * (t - t_last))`` past the
    last t-knot. Negative times are clipped to 0.
    """

    knots_r: np.ndarray
    knots_t: np.ndarray
    node_values: np.ndarray
    tail_rate: float

    def __post_init__(self):
        r = np.asarray(self.knots_r, dtype=float)
        t = np.asarray(self.knots_t, dtype=float)
        v = np.asarray(self.node_values, dtype=float)
        if v.shape != (r.size, t.size):
            raise ValueError("node_values must have shape (len(knots_r), len(knots_t))")
        if r.size < 2 or t.size < 2 or r[0] <= 0 or np.any(np.diff(r) <= 0):
            raise ValueError("knots_r must be positive and strictly increasing")
        if t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("knots_t must start at 0 and be strictly increasing")
        if not self.tail_rate > 0:
            raise ValueError("tail_rate must be positive")
        for a in (r, t, v):
            a.setflags(write=False)
        object.__setattr__(self, "knots_r", r)
        object.__setattr__(self, "knots_t", t)
        object.__setattr__(self, "node_values", v)

    def axiom_violations(self):
        """Knot-level KL axioms; returns a list of problems."""
        v = self.node_values
        problems = []
        if np.any(v <= 0):
            problems.append("nonpositive node value")
        if np.any(np.diff(v, axis=0) <= 0):
            problems.append("not strictly increasing in r")
        if np.any(np.diff(v, axis=1) >= 0):
            problems.append("not strictly decreasing in t")
        return problems

    def __call__(self, r, t):
        r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
        shape = r.shape
        r = r.ravel()
        t = np.maximum(t.ravel(), 0.0)
        kr, kt, v = self.knots_r, self.knots_t, self.node_values
        rc = np.clip(r, kr[0], kr[-1])
        tc = np.minimum(t, kt[-1])
        i = np.clip(np.searchsorted(kr, rc, side="right") - 1, 0, kr.size - 2)
        j = np.clip(np.searchsorted(kt, tc, side="right") - 1, 0, kt.size - 2)
        a = (rc - kr[i]) / (kr[i + 1] - kr[i])
        b = (tc - kt[j]) / (kt[j + 1] - kt[j])
        out = (
            (1 - a) * (1 - b) * v[i, j]
            + a * (1 - b) * v[i + 1, j]
            + (1 - a) * b * v[i, j + 1]
            + a * b * v[i + 1, j + 1]
        )
        out = np.where(r < kr[0], out * r / kr[0], out)
        out = np.where(r > kr[-1], out * r / kr[-1], out)
        out = np.where(t > kt[-1], out * np.exp(-self.tail_rate * (t - kt[-1])), out)
        out = out.reshape(shape)
        return out if out.ndim else float(out)

    def inverse_r(self, value, t=0.0, hi=None, iters=200):
        """Smallest ``r`` with ``beta(r, t) >= value``, by bisection."""
        lo = 0.0
        hi = float(self.knots_r[-1]) if hi is None else float(hi)
        while self(hi, t) < value:
            hi *= 2.0
            if hi > 1e300:
                raise InvalidKLError("beta(., t) is bounded; no inverse")
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self(mid, t) >= value:
                hi = mid
            else:
                lo = mid
        return hi

    def rows(self):
        """Flat (r, t, value) rows of the knot table."""
        rr, tt = np.meshgrid(self.knots_r, self.knots_t, indexing="ij")
        return np.column_stack([rr.ravel(), tt.ravel(), self.node_values.ravel()])


def cell_max_majorant(step, knots_r, knots_t, r_samples=8, tail_window=2.0):
    """KL majorant of a step function ``b(R, t)`` on the knot rectangle.

    ``step(R, t)`` must be vectorised and nonincreasing in ``t``. The value at
    knot ``(r_a, t_b)`` is the largest cell supremum over the (up to four)
    cells that share it; cell suprema are taken at the lower t-edge over
    ``r_samples`` points plus the right r-edge. Values are then made strictly
    monotone with a tiny upward perturbation, and the tail rate is the largest
    rate (halving from the slope of the last cell) whose exponential tail still
    dominates ``b`` on ``[t_last, tail_window * t_last]``.
    """
    kr = np.asarray(knots_r, dtype=float)
    kt = np.asarray(knots_t, dtype=float)
    na, nb = kr.size, kt.size
    # cell suprema: rows are r-cells [r_a, r_{a+1}], columns are t-cells [t_b, t_{b+1}]
    frac = np.linspace(0.0, 1.0, r_samples + 1)
    cell = np.empty((na - 1, nb - 1))
    for a in range(na - 1):
        rs = kr[a] + frac * (kr[a + 1] - kr[a])
        rr, tt = np.meshgrid(rs, kt[:-1], indexing="ij")
        cell[a] = np.max(step(rr, tt), axis=0)
    node = np.zeros((na, nb))
    for da in (-1, 0):
        for db in (-1, 0):
            ca = np.arange(na) + da
            cb = np.arange(nb) + db
            ok_a = (ca >= 0) & (ca < na - 1)
            ok_b = (cb >= 0) & (cb < nb - 1)
            block = np.zeros((na, nb))
            block[np.ix_(ok_a, ok_b)] = cell[np.ix_(ca[ok_a], cb[ok_b])]
            node = np.maximum(node, block)
    node = np.maximum.accumulate(node, axis=0)
    node = np.maximum.accumulate(node[:, ::-1], axis=1)[:, ::-1]
    scale = _STRICT_EPS * max(float(node.max()), 1.0)
    ia = np.arange(1, na + 1)[:, None]
    ib = (nb - np.arange(nb))[None, :]
    node = node + scale * ia * ib / (na * nb)

    t_last = kt[-1]
    rate = max(np.log(max(node[:, -2].max() / node[:, -1].max(), 1.0 + 1e-6))
               / (kt[-1] - kt[-2]), 1e-3)
    ts = np.linspace(t_last, tail_window * max(t_last, 1e-9), 64)
    rs = np.unique(np.concatenate([kr[:-1] + f * np.diff(kr) for f in frac] + [kr]))
    rr, tt = np.meshgrid(rs, ts, indexing="ij")
    target = step(rr, tt)
    for _ in range(60):
        beta = KLFunction(kr, kt, node, rate)
        if np.all(beta(rr, tt) >= target):
            return beta
        rate *= 0.5
    raise ConstructionError("no exponential tail rate dominates the step function")


def quasi_random_rectangle(r_range, t_range, n, seed=0):
    """Scrambled Sobol points in ``[r0, r1] x [t0, t1]``."""
    sampler = qmc.Sobol(d=2, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n, 2))))
    pts = sampler.random_base2(m)[:n]
    lo = np.array([r_range[0], t_range[0]])
    hi = np.array([r_range[1], t_range[1]])
    return qmc.scale(pts, lo, hi)


def majorization_gap(beta, step, points):
    """Smallest ``beta - b`` over ``points`` (negative means a violation)."""
    r, t = points[:, 0], points[:, 1]
    return float(np.min(beta(r, t) - step(r, t)))
