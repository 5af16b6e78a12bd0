"""Grid checks for candidate restraint functions.

Decrease condition, structure (positive definiteness and a properness
surrogate), bracket functions, the integrability condition on ``p0`` and the
minimum-time bound under a weak Petrov rate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .comparators import BracketPair, MonotoneTable
from .errors import RangeError
from .hjb import step_quotients

# Residual histogram bin edges shared by every report.
HIST_EDGES = np.array([-np.inf, -1.0, -0.5, -0.1, -0.01, -1e-6, 0.0, 1e-6, 0.01, 0.1, 1.0, np.inf])


@dataclass
class StructureReport:
    passed: bool
    positive_definite: bool
    zero_on_target: bool
    proper: bool
    levels: tuple
    witnesses: dict = field(default_factory=dict)
    note: str = "properness is a sublevel-containment surrogate on the computational box"

    def lines(self):
        out = [
            f"verdict: {'PASS' if self.passed else 'FAIL'}",
            f"positive_definite: {self.positive_definite}",
            f"zero_on_target: {self.zero_on_target}",
            f"proper_surrogate: {self.proper} (levels {list(self.levels)})",
            f"note: {self.note}",
        ]
        for key in sorted(self.witnesses):
            out.append(f"witness {key}: {self.witnesses[key]}")
        return out


def check_structure(W, target_tol=1e-9, band_tol=1e-9, levels=(0.25, 0.5, 1.0, 2.0)):
    """Positive definiteness, vanishing on the target and a properness surrogate.

    Properness is tested by requiring that no box-face node lies in the
    sublevel set ``{W <= alpha}`` for each tested ``alpha``. Nodes are judged
    off target through ``W.target_mask``, which was built with ``target_tol``.
    """
    vals = W.values.ravel()
    mask = W.target_mask.ravel()
    nodes = W.grid.nodes()
    wit = {}
    off = ~mask
    bad_pd = off & ~(vals > 0)
    pd_ok = not np.any(bad_pd)
    if not pd_ok:
        wit["positive_definite"] = nodes[np.flatnonzero(bad_pd)[0]].tolist()
    bad_zero = mask & ~(np.abs(vals) <= band_tol)
    zero_ok = not np.any(bad_zero)
    if not zero_ok:
        wit["zero_on_target"] = nodes[np.flatnonzero(bad_zero)[0]].tolist()
    face = W.grid.on_boundary().ravel()
    proper_ok = True
    for a in levels:
        touch = face & (vals <= a)
        if np.any(touch):
            proper_ok = False
            wit[f"proper@{a}"] = nodes[np.flatnonzero(touch)[0]].tolist()
    return StructureReport(
        pd_ok and zero_ok and proper_ok, pd_ok, zero_ok, proper_ok, tuple(levels), wit
    )


def compute_brackets(W, distance, ladder=None):
    """Bracket tables ``d_minus``/``d_plus`` of ``W`` against the distance ``d``.

    The default ladder is the set of distinct positive node distances, which
    makes the sandwich ``d_minus(d(x)) <= W(x) <= d_plus(d(x))`` exact at
    every node. Ties are broken into strict increase by ulp-sized nudges
    (``d_plus`` upward, ``d_minus`` downward), which preserves the sandwich.
    A user ladder coarser than the grid spacing triggers a warning.
    """
    nodes = W.grid.nodes()
    d = np.asarray(distance(nodes), dtype=float)
    w = W.values.ravel()
    order = np.argsort(d, kind="stable")
    ds, ws = d[order], w[order]
    if ladder is None:
        off = ~W.target_mask.ravel()
        radii = np.unique(d[off & (d > 0)])
    else:
        radii = np.unique(np.asarray(ladder, dtype=float))
        radii = radii[radii > 0]
        if radii.size > 1 and np.max(np.diff(radii)) > np.max(W.grid.spacing):
            warnings.warn("bracket ladder is coarser than the grid; refine it", stacklevel=2)
    if radii.size == 0:
        raise RangeError("no off-target nodes to build brackets from")
    run_max = np.maximum.accumulate(ws)
    run_min = np.minimum.accumulate(ws[::-1])[::-1]
    hi_idx = np.searchsorted(ds, radii, side="right") - 1
    lo_idx = np.searchsorted(ds, radii, side="left")
    plus = np.where(hi_idx >= 0, run_max[np.maximum(hi_idx, 0)], 0.0)
    minus = np.where(lo_idx < ds.size, run_min[np.minimum(lo_idx, ds.size - 1)], np.inf)
    plus = plus.copy()
    minus = minus.copy()
    for k in range(1, plus.size):
        if plus[k] <= plus[k - 1]:
            plus[k] = np.nextafter(plus[k - 1], np.inf)
    if not np.isfinite(minus[-1]):
        minus[-1] = plus[-1]
    for k in range(minus.size - 2, -1, -1):
        if minus[k] >= minus[k + 1]:
            minus[k] = np.nextafter(minus[k + 1], -np.inf)
    plus[0] = max(plus[0], np.nextafter(0.0, 1.0))
    return BracketPair(
        MonotoneTable(radii, minus, "d_minus"),
        MonotoneTable(radii, plus, "d_plus"),
        {"ladder_size": int(radii.size), "r_max": float(radii[-1])},
    )


def sandwich_slack(W, distance, brackets):
    """Smallest slack of the sandwich over all nodes (negative means violated)."""
    d = np.asarray(distance(W.grid.nodes()), dtype=float)
    w = W.values.ravel()
    lower = w - brackets.d_minus(d)
    upper = brackets.d_plus(d) - w
    return float(min(lower.min(), upper.min()))


@dataclass
class DecreaseReport:
    passed: bool
    tol: float
    tau: float
    worst_residual: float
    worst_node: Optional[list]
    violation_count: int
    violations: list
    evaluated: int
    not_evaluated: int
    histogram: list

    def lines(self):
        out = [
            f"verdict: {'PASS' if self.passed else 'FAIL'}",
            f"tau: {self.tau!r}",
            f"tol: {self.tol!r}",
            f"worst_residual: {self.worst_residual!r}",
            f"worst_node: {self.worst_node}",
            f"violations: {self.violation_count}",
            f"evaluated_nodes: {self.evaluated}",
            f"not_evaluated_nodes: {self.not_evaluated}",
            "histogram_edges: " + ",".join(repr(float(e)) for e in HIST_EDGES),
            "histogram_counts: " + ",".join(str(c) for c in self.histogram),
        ]
        return out


def decrease_residuals(W, system, comp, tau=None, exit_tol=1e-9):
    """Node residuals of the decrease condition; NaN on target or unevaluable nodes."""
    tau = float(np.min(W.grid.spacing)) if tau is None else float(tau)
    nodes = W.grid.nodes()
    w = W.values.ravel()
    p0w = np.asarray(comp.p0(w), dtype=float) * np.ones_like(w)
    gw = np.asarray(comp.gamma(w), dtype=float) * np.ones_like(w)
    q = step_quotients(
        W, system, nodes, tau,
        extra=lambda x, u: p0w * system.cost(x, u) + gw,
        exit_tol=exit_tol,
    )
    with np.errstate(all="ignore"):
        res = np.min(np.where(np.isnan(q), np.inf, q), axis=1)
    res = np.where(np.isinf(res) | W.target_mask.ravel(), np.nan, res)
    return res, tau


def check_decrease(W, system, comp, tau=None, tol=0.0, exit_tol=1e-9, max_listed=20):
    """Decrease condition ``min_u {D_u W + p0(W) l + gamma(W)} <= tol`` at every node.

    ``D_u W`` is the one-step quotient ``[W(x + tau f) - W(x)] / tau``; a
    step that ends inside the band ``d <= exit_tol`` uses the exit-aware
    quotient of :func:`mrfkit.hjb.step_quotients`. Target nodes are skipped;
    nodes with no in-box stencil are counted as not evaluated.
    """
    if comp.domain is not None:
        wmax = float(np.max(W.values[~W.target_mask])) if np.any(~W.target_mask) else 0.0
        if wmax > comp.domain:
            raise RangeError(f"comparator tables cover W <= {comp.domain}, field reaches {wmax}")
    res, tau = decrease_residuals(W, system, comp, tau, exit_tol)
    nodes = W.grid.nodes()
    ev = ~np.isnan(res)
    off = ~W.target_mask.ravel()
    bad = ev & (res > tol)
    idx_bad = np.flatnonzero(bad)
    if np.any(ev):
        k = int(np.nanargmax(res))
        worst, worst_node = float(res[k]), nodes[k].tolist()
    else:
        worst, worst_node = float("nan"), None
    order = idx_bad[np.argsort(-res[idx_bad], kind="stable")][:max_listed]
    hist, _ = np.histogram(res[ev], bins=HIST_EDGES)
    return DecreaseReport(
        passed=bool(np.any(ev) and not np.any(bad)),
        tol=float(tol),
        tau=tau,
        worst_residual=worst,
        worst_node=worst_node,
        violation_count=int(bad.sum()),
        violations=[(nodes[i].tolist(), float(res[i])) for i in order],
        evaluated=int(ev.sum()),
        not_evaluated=int((off & ~ev).sum()),
        histogram=hist.tolist(),
    )


@dataclass
class PTable:
    """``P(v) = int_0^v ds / p0(s)`` on a log ladder plus the IC verdict."""

    v: np.ndarray
    P: np.ndarray
    passed: bool
    v_max: float
    partials: list
    differences: list
    deltas: list
    reason: str

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if np.any(v > self.v_max * (1 + 1e-12)) or np.any(v < 0):
            raise RangeError(f"P table covers [0, {self.v_max}]")
        out = np.interp(v, self.v, self.P)
        return out if out.ndim else float(out)

    def lines(self):
        out = [
            f"verdict: {'PASS' if self.passed else 'FAIL'}",
            f"v_max: {self.v_max!r}",
            f"reason: {self.reason}",
        ]
        for dlt, p in zip(self.deltas, self.partials):
            out.append(f"partial delta={dlt!r} P(v_max)={p!r}")
        return out


def reciprocal_integral(func, lo, hi, points_per_decade=2000):
    """Cumulative ``int_lo^v ds / func(s)`` on a log grid from ``lo`` to ``hi``."""
    n = max(int(np.ceil(np.log10(hi / lo) * points_per_decade)), 2) + 1
    y = np.linspace(np.log(lo), np.log(hi), n)
    s = np.exp(y)
    s[0], s[-1] = lo, hi
    with np.errstate(divide="ignore"):
        g = s / (np.asarray(func(s), dtype=float) * np.ones_like(s))
    dy = np.diff(y)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * dy * (g[1:] + g[:-1]))])
    return s, cum


def check_integrability(p0, v_max, refinement_levels=6, delta0=1e-2, ratio=1e-3,
                        quadrature_tol=1e-6, growth_threshold=None, points_per_decade=2000):
    """Integrability of ``1 / p0`` at ``0+`` and the ``P`` table.

    Partial integrals over ``[delta_k, v_max]`` with ``delta_k = delta0 *
    ratio**k`` must settle: the last successive difference has to drop below
    ``quadrature_tol``. ``P(v_max)`` must also reach ``growth_threshold``
    (defaults to ``v_max``, the value for ``p0 = 1``). A divergent integral is
    reported as a failed verdict, never raised.
    """
    v_max = float(v_max)
    if growth_threshold is None:
        growth_threshold = v_max
    deltas, partials = [], []
    s = cum = None
    for k in range(int(refinement_levels)):
        dlt = min(delta0 * ratio**k, 0.5 * v_max)
        s, cum = reciprocal_integral(p0, dlt, v_max, points_per_decade)
        deltas.append(dlt)
        partials.append(float(cum[-1]))
    diffs = [abs(b - a) for a, b in zip(partials[:-1], partials[1:])]
    finite = bool(np.all(np.isfinite(cum)))
    settled = finite and len(diffs) > 0 and diffs[-1] < quadrature_tol
    grows = finite and partials[-1] >= growth_threshold * (1 - 1e-12)
    if not finite:
        reason = "integrand is not finite on the ladder"
    elif not settled:
        reason = "partial integrals do not settle (divergence at 0+)"
    elif not grows:
        reason = "P(v_max) below growth threshold"
    else:
        reason = "partial integrals settled"
    v = np.concatenate([[0.0], s])
    P = np.concatenate([[0.0], cum])
    return PTable(v, P, bool(settled and grows), v_max, partials, diffs, deltas, reason)


@dataclass
class PetrovBound:
    bound: float
    finite: bool
    distance: float
    solver_value: Optional[float] = None

    def lines(self):
        return [
            f"distance: {self.distance!r}",
            f"bound: {self.bound!r}",
            f"finite: {self.finite}",
            f"solver_min_time: {self.solver_value!r}",
        ]


def petrov_min_time_bound(W, comp, z, min_time=None, quadrature_tol=1e-6, **quad):
    """Minimum-time bound ``int_0^{d(z)} dr / (p0(r) + gamma(r))``.

    ``W`` is the distance field, so ``d(z)`` is read off ``W``. When the
    reciprocal of the combined rate is not integrable at ``0+`` the bound is
    reported as infinite. ``min_time`` (a field) is sampled at ``z`` for
    side-by-side comparison.
    """
    dz = float(W(z))
    solver = None if min_time is None else float(min_time(z))
    if dz <= 0:
        return PetrovBound(0.0, True, dz, solver)
    rate = lambda r: comp.p0(r) + comp.gamma(r)  # noqa: E731
    ic = check_integrability(rate, dz, quadrature_tol=quadrature_tol, growth_threshold=0.0,
                             delta0=min(1e-2, 0.5 * dz), **quad)
    if not ic.passed:
        return PetrovBound(float("inf"), False, dz, solver)
    return PetrovBound(float(ic.P[-1]), True, dz, solver)


@dataclass
class MrfCertificate:
    """Evidence bundle: structure, decrease, brackets, IC and synthesis records."""

    structure_report: Optional[StructureReport] = None
    decrease_report: Optional[DecreaseReport] = None
    brackets: Optional[BracketPair] = None
    ic_report: Optional[PTable] = None
    synthesis_records: list = field(default_factory=list)

    @property
    def checks(self):
        out = {}
        if self.structure_report is not None:
            out["structure"] = self.structure_report.passed
        if self.decrease_report is not None:
            out["decrease"] = self.decrease_report.passed and not self.decrease_report.violations
        if self.ic_report is not None:
            out["integrability"] = self.ic_report.passed and bool(np.all(np.isfinite(self.ic_report.P)))
        if self.synthesis_records:
            out["synthesis"] = all(rec.passed for rec in self.synthesis_records)
        return out

    @property
    def passed(self):
        checks = self.checks
        return bool(checks) and all(checks.values())
