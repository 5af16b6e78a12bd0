import dataclasses
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mrfkit.comparators import ComparatorPair, make_comparators
from mrfkit.errors import RangeError
from mrfkit.grid import Grid, GridField
from mrfkit.hjb import solve_min_time
from mrfkit.verify import (
    check_decrease,
    check_integrability,
    check_structure,
    compute_brackets,
    decrease_residuals,
    petrov_min_time_bound,
    sandwich_slack,
)

H = 0.01
SAT = lambda v: np.asarray(v) / (1 + np.asarray(v))  # noqa: E731


def _pair(p0, gamma):
    return ComparatorPair(p0, gamma)


def _const(c):
    return lambda v: np.full(np.shape(v), float(c))


# structure ---------------------------------------------------------------

def test_structure_pass(w2d):
    assert check_structure(w2d).passed


def test_structure_constant_fails(int1d, grid1d):
    W = GridField.from_function(grid1d, lambda x: np.ones(len(x)), int1d.distance)
    rep = check_structure(W)
    assert not rep.passed and not rep.zero_on_target
    assert "zero_on_target" in rep.witnesses


def test_structure_saturating_fails_properness(int1d, grid1d):
    W = GridField.from_function(grid1d, lambda x: SAT(int1d.distance(x)), int1d.distance)
    rep = check_structure(W, levels=(0.5, 0.9))
    assert rep.positive_definite and not rep.proper and not rep.passed
    assert "proper@0.9" in rep.witnesses


# brackets ----------------------------------------------------------------

def test_brackets_of_2d(int1d, w2d):
    br = compute_brackets(w2d, int1d.distance)
    r = br.radii
    assert np.allclose(br.d_plus(r), 2 * r, rtol=1e-12)
    assert np.allclose(br.d_minus(r), 2 * r, rtol=1e-12)
    assert br.d_plus.strictly_increasing and br.d_minus.strictly_increasing
    assert sandwich_slack(w2d, int1d.distance, br) >= -1e-12


def test_brackets_of_square():
    g = Grid([[-2.0, 2.0]], (17,))
    dist = lambda x: np.abs(np.asarray(x)[..., 0])  # noqa: E731
    W = GridField.from_function(g, lambda x: dist(x) ** 2, dist)
    br = compute_brackets(W, dist, ladder=np.arange(1, 9) * 0.25)
    assert br.d_plus(1.0) == 1.0
    assert br.d_plus(2.0) == 4.0
    assert sandwich_slack(W, dist, br) >= -1e-12


def test_coarse_ladder_warns(int1d, w2d):
    with pytest.warns(UserWarning, match="coarser"):
        compute_brackets(w2d, int1d.distance, ladder=[0.5, 1.0, 2.4])


@given(st.integers(0, 2**32 - 1))
def test_sandwich_on_random_fields(seed):
    rng = np.random.default_rng(seed)
    g = Grid([[-1.0, 1.0], [-1.0, 1.0]], (9, 9))
    dist = lambda x: np.maximum(np.linalg.norm(np.asarray(x), axis=-1) - 0.1, 0.0)  # noqa: E731
    noise = rng.uniform(0.5, 2.0, g.size)
    W = GridField.from_function(g, lambda x: dist(x) * noise, dist)
    br = compute_brackets(W, dist)
    assert sandwich_slack(W, dist, br) >= -1e-12


# decrease ----------------------------------------------------------------

def test_decrease_pass_and_fail(int1d, grid1d, w2d, w1d):
    comp = make_comparators("one", "saturating")
    ok = check_decrease(w2d, int1d, comp, tau=H)
    assert ok.passed and ok.worst_residual < 0
    bad = check_decrease(w1d, int1d, comp, tau=H)
    assert not bad.passed
    worst_d = int1d.distance(np.array(bad.worst_node))
    assert bad.worst_residual >= 0.5 * SAT(worst_d)
    res, _ = decrease_residuals(w1d, int1d, comp, tau=H)
    d = int1d.distance(grid1d.nodes())
    ev = ~np.isnan(res) & (d > 2 * H) & (np.abs(grid1d.nodes()[:, 0]) < 2.4)
    assert np.allclose(res[ev], SAT(d[ev]), atol=1e-9)


def test_decrease_literal_2abs(int1d, grid1d):
    W = GridField.from_function(grid1d, lambda x: 2 * np.abs(x[:, 0]), int1d.distance)
    comp = make_comparators("one", "saturating")
    assert check_decrease(W, int1d, comp, tau=H).passed


def test_decrease_tiny_gamma(int1d, w2d):
    base = check_decrease(w2d, int1d, make_comparators("one", "saturating"), tau=H)
    tiny = check_decrease(w2d, int1d, make_comparators("one", "saturating:1e-9"), tau=H)
    assert tiny.passed and tiny.worst_residual <= base.worst_residual


def test_decrease_domain_guard(int1d, w2d):
    comp = dataclasses.replace(make_comparators(), domain=1.0)
    with pytest.raises(RangeError):
        check_decrease(w2d, int1d, comp)


@given(st.floats(0.0, 1.0), st.floats(0.1, 3.0))
def test_smaller_gamma_never_hurts(k, a):
    from mrfkit.systems import make_system
    s = make_system("int1d_mintime")
    g = Grid.from_spacing(s.box, 0.05)
    W = GridField.from_function(g, lambda x: a * s.distance(x), s.distance)
    big = _pair(_const(1.0), SAT)
    small = _pair(_const(1.0), lambda v: k * SAT(v))
    r_big, _ = decrease_residuals(W, s, big)
    r_small, _ = decrease_residuals(W, s, small)
    ev = ~np.isnan(r_big)
    assert np.all(r_small[ev] <= r_big[ev])
    assert np.all((r_big[ev] <= 0) <= (r_small[ev] <= 0))


@given(st.floats(0.2, 5.0))
def test_scaling_of_residuals(c):
    from mrfkit.systems import make_system
    s = make_system("int1d_mintime")
    s0 = dataclasses.replace(s, running_cost=lambda x, u: np.zeros(np.shape(x)[:-1]))
    g = Grid.from_spacing(s.box, 0.05)
    W = GridField.from_function(g, lambda x: 1.5 * s.distance(x), s.distance)
    Wc = W.with_values(c * W.values)
    p0 = lambda v: np.minimum(1.0, np.sqrt(np.asarray(v)))  # noqa: E731
    r1, _ = decrease_residuals(W, s0, _pair(p0, SAT))
    rc, _ = decrease_residuals(Wc, s0, _pair(p0, lambda v: c * SAT(np.asarray(v) / c)))
    ev = ~np.isnan(r1)
    assert np.allclose(rc[ev], c * r1[ev], rtol=1e-9, atol=1e-12)


# integrability -----------------------------------------------------------

def test_ic_unit():
    ic = check_integrability(_const(1.0), 3.0)
    assert ic.passed
    assert ic(1.7) == pytest.approx(1.7, abs=1e-6)
    with pytest.raises(RangeError):
        ic(4.0)


def test_ic_sqrt_cap():
    ic = check_integrability(lambda v: np.minimum(1.0, np.sqrt(v)), 1.0)
    assert ic.passed
    assert ic(1.0) == pytest.approx(2.0, abs=1e-6)


def test_ic_linear_cap_fails():
    ic = check_integrability(lambda v: np.minimum(1.0, v), 1.0)
    assert not ic.passed
    assert "settle" in ic.reason
    assert len(ic.partials) == 6


@given(st.floats(0.05, 0.9), st.floats(0.0, 1.0))
def test_ic_monotone(alpha, floor):
    p_b = lambda v: np.minimum(1.0, np.asarray(v) ** alpha)  # noqa: E731
    p_a = lambda v: np.maximum(p_b(v), floor)  # noqa: E731
    if check_integrability(p_b, 1.0).passed:
        assert check_integrability(p_a, 1.0).passed


# Petrov bound ------------------------------------------------------------

def test_petrov_constant_rate(int1d, w1d):
    b = petrov_min_time_bound(w1d, _pair(_const(1.0), _const(0.0)), [0.5])
    assert b.finite and b.bound == pytest.approx(0.4, abs=1e-6)


def test_petrov_sqrt_rate(int1d, w1d):
    b = petrov_min_time_bound(w1d, _pair(_const(0.0), lambda r: np.sqrt(np.asarray(r))), [1.1])
    assert b.finite and b.bound == pytest.approx(2.0, abs=1e-5)


def test_petrov_bounds_solver(int1d, grid1d, w1d):
    comp = _pair(_const(0.5), lambda v: 0.5 * SAT(v))
    assert check_decrease(w1d, int1d, comp, tau=H).passed
    vmin = solve_min_time(int1d, grid1d)
    b = petrov_min_time_bound(w1d, comp, [0.5], min_time=vmin)
    assert b.solver_value <= b.bound + 3 * H


def test_petrov_divergent(w1d):
    b = petrov_min_time_bound(w1d, _pair(_const(0.0), lambda r: np.asarray(r)), [0.5])
    assert not b.finite and b.bound == np.inf
