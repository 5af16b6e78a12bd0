import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import decay_system
from mrfkit.comparators import BracketPair, make_comparators
from mrfkit.config import BETA_REGISTRY, CONTROLLER_REGISTRY
from mrfkit.converse import (
    PHI_CONSTANT,
    ConverseParams,
    Ell1,
    build_bilateral_sequence,
    build_ell_sequence,
    build_mrf,
    build_Phi_Psi,
    estimate_uniform_times,
    evaluate_J,
    kappa,
    strip_index,
    trapezoid_bump,
)
from mrfkit.core import integrate_trajectory
from mrfkit.errors import RangeError
from mrfkit.grid import Grid
from mrfkit.systems import make_system
from mrfkit.verify import check_integrability
from mrfkit.synthesis import check_superoptimality, synthesize_level_halving

IDENT = BracketPair.identity()
BETA_2R = lambda r, t: 2.0 * np.asarray(r, dtype=float) * np.exp(-np.asarray(t, dtype=float))  # noqa: E731


@pytest.fixture(scope="module")
def table4():
    return build_bilateral_sequence(BETA_2R, IDENT, -3, 6)


@pytest.fixture(scope="module")
def ell1_exp():
    return Ell1(BETA_2R, 2.0)


@pytest.fixture(scope="module")
def mrf():
    s = make_system("int1d_mintime")
    g = Grid.from_spacing(s.box, 0.01)
    res = build_mrf(s, BETA_REGISTRY["saturating_exp"], IDENT, CONTROLLER_REGISTRY["neg_sign"],
                    g, ConverseParams())
    return s, res


# radii -------------------------------------------------------------------

def test_radii_powers_of_four(table4):
    assert table4[0] == 1.0
    for i in range(-3, 7):
        assert table4[i] == pytest.approx(4.0**-i, rel=1e-12)
    assert np.all(np.diff(table4.values) < 0)
    with pytest.raises(RangeError):
        table4[7]


def test_strip_index(table4):
    assert strip_index(1.0, table4) == 1
    assert strip_index(2.0, table4) == 0
    assert strip_index(0.25, table4) == 2
    with pytest.raises(RangeError):
        strip_index(1e6, table4)


# ell_1 and kappa ---------------------------------------------------------

def test_ell1_values(ell1_exp):
    assert ell1_exp.tau(1.0)[0] == pytest.approx(np.log(2.0), abs=1e-12)
    assert ell1_exp(1.0) == pytest.approx(0.5, abs=1e-12)
    assert ell1_exp.tau(2.0)[0] == pytest.approx(0.0, abs=1e-12)
    assert ell1_exp(2.0) == pytest.approx(2.0, abs=1e-12)
    assert ell1_exp.tau(3.0)[0] == pytest.approx(-1.0, abs=1e-12)
    assert ell1_exp(3.0) == pytest.approx(3.0 * np.e, rel=1e-12)
    assert ell1_exp(0.0) == 0.0
    r = np.linspace(0.01, 5, 200)
    assert np.all(np.diff(ell1_exp(r)) > 0)


def test_kappa_unit_and_double_speed(int1d, ell1_exp):
    k1 = kappa(0.5, 1.0, int1d, ell1_exp)
    assert k1.M_bar == 1.0
    assert k1.value == pytest.approx(float(ell1_exp(0.5)))
    fast = dataclasses.replace(int1d, dynamics=lambda x, u: 2.0 * int1d.f(x, u))
    assert kappa(0.5, 1.0, fast, ell1_exp).value == pytest.approx(0.5 * k1.value)


def test_kappa_zermelo(ell1_exp):
    s = make_system("zermelo")
    k = kappa(0.5, 1.0, s, ell1_exp)
    assert k.M_bar <= 1.5 + 1e-12
    assert k.M_bar >= 1.45


@given(st.floats(0.2, 1.5), st.floats(0.3, 1.0), st.integers(0, 2**32 - 1))
def test_kappa_inequality(b, width, seed):
    s = make_system("int1d_mintime")
    ell1 = Ell1(BETA_2R, 2.0)
    c = b + width
    k = kappa(b, c, s, ell1, n_samples=256, seed=seed).value
    rng = np.random.default_rng(seed)
    z = rng.uniform(b, c) + 0.1
    u = rng.choice([-1.0, 1.0])
    traj = integrate_trajectory(s, [z], u, 0.01, 2.0, 1e-9, box=False)
    d = s.distance(traj.states)
    inside = np.flatnonzero((d < b) | (d > c))
    n = inside[0] if inside.size else len(d)
    if n < 2:
        return
    t, x, dd = traj.times[:n], traj.states[:n], d[:n]
    f = ell1(dd)
    integral = float(np.sum(0.5 * np.diff(t) * (f[1:] + f[:-1])))
    assert integral >= k * abs(x[-1, 0] - x[0, 0]) - 1e-6


# Phi and Psi -------------------------------------------------------------

def test_phi_psi(table4):
    bb = lambda r, t: BETA_2R(r, t)  # noqa: E731
    pp = build_Phi_Psi(table4, IDENT, bb)
    assert pp.C == pytest.approx(2.0 / 3.0) and PHI_CONSTANT == pp.C
    for i in range(table4.i_min + 2, table4.i_max + 1):
        assert pp.Phi(table4[i]) == pytest.approx(32.0 / 3.0 * 4.0**-i, rel=1e-12)
    assert pp.Psi(0.0) == pytest.approx(bb(1.0, 0.0) + 2.0)


# strip times -------------------------------------------------------------

def test_decay_strip_time(table4):
    s = decay_system()
    times = estimate_uniform_times(s, lambda z: 0.0, table4, samples_per_strip=64,
                                   strips=range(-1, 5), dt=1e-3)
    ln4 = np.log(4.0)
    assert np.all(times.observed <= ln4 + 1e-3)
    assert np.all(times.observed >= 0.9 * ln4)
    assert np.allclose(times.T, 2.0 * times.observed)
    assert all(r.end_index == r.strip + 1 for r in times.runs)


def test_T_of_R_and_partial_sums(mrf):
    _, res = mrf
    t = res.times
    r = res.r_table
    for R in (r[1], 0.5 * r[1], r[3]):
        assert t.T_of_R(R) == 0.0
    assert t.T_of_R(r[0]) > 0
    sums = t.partial_sums(0, 2000)
    assert np.all(np.diff(sums) > 0)
    assert sums[-1] > 1000 * min(t.T)


def test_strip_property(mrf):
    _, res = mrf
    r = res.r_table
    for run in res.times.runs:
        assert run.end_index == run.strip + 1
        assert run.cost <= 0.5 * IDENT.d_plus(r[run.strip - 2]) + 1e-9


# ell sequence ------------------------------------------------------------

def test_trapezoid_bump():
    R = np.array([0.0, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0])
    assert np.allclose(trapezoid_bump(R, 1.0, 2.0), [0, 0, 1, 2, 2, 2, 1, 0, 0])


def test_ell_anchor_and_monotone(mrf):
    _, res = mrf
    seq = res.ell_sequence
    for j in range(1, len(seq.levels)):
        keep = seq.ladder <= seq.anchors[j - 1]
        assert np.all(np.abs(seq.levels[j][keep] - seq.levels[j - 1][keep]) <= 1e-12)
        assert np.all(seq.levels[j] >= seq.levels[j - 1])
    tab = res.ell.y
    assert np.all(np.diff(tab) > 0)
    assert np.all(seq.levels[-1] >= res.ell1(seq.ladder) * (1 - 1e-12))


def test_ell_plateau_ratio(mrf):
    s, res = mrf
    bb = res.beta_bar
    anchors = [float(bb(float(j), 0.0)) for j in range(1, 4)]
    extra = np.array([a + 1.5 for a in anchors])
    breaks = np.concatenate([[a, a + 1, a + 2, a + 3] for a in anchors])
    ladder = np.unique(np.concatenate([np.geomspace(1e-6, anchors[-1] + 3, 200), breaks, extra]))
    seq = build_ell_sequence(3, bb, res.phi_psi.Phi, res.times, s, res.ell1, ladder=ladder)
    for j in range(1, 3):
        k = int(np.flatnonzero(ladder == anchors[j - 1] + 1.5)[0])
        ratio = seq.levels[j][k] / seq.levels[j - 1][k]
        assert ratio == pytest.approx(1.0 + seq.plateaus[j - 1], rel=1e-12)


# J -----------------------------------------------------------------------

def test_J_finite(int1d):
    j = evaluate_J(int1d, lambda r: np.asarray(r), [0.5], -1.0, dt=0.01)
    # int_0^0.4 (0.4 - t) + 1 dt
    assert j.value == pytest.approx(0.48, abs=3e-9)
    assert j.value == j.cost


def test_J_outward_is_infinite(int1d):
    j = evaluate_J(int1d, lambda r: 0.1 + np.asarray(r), [0.5], 1.0, dt=0.05, horizon=20.0, cap=50.0)
    assert j.value == np.inf and j.cost > 0


def test_J_zero_integrand(int1d):
    s0 = dataclasses.replace(int1d, running_cost=lambda x, u: np.zeros(np.shape(x)[:-1]))
    for z, u in ((0.5, -1.0), (-1.2, 1.0)):
        assert evaluate_J(s0, None, [z], u).value == 0.0


# round trip --------------------------------------------------------------

def test_round_trip(mrf):
    s, res = mrf
    assert res.structure.passed
    assert res.decrease.passed
    assert res.decrease.worst_residual <= res.tol
    P = check_integrability(res.comparators.p0, float(np.max(res.V.values[res.V.values < 1e5])))
    rec = synthesize_level_halving(s, res.V, res.comparators, P, [1.3], brackets=res.V_brackets)
    assert rec.passed
    sop = check_superoptimality(rec.trajectory, res.V, res.comparators)
    assert sop.residual <= rec.W_start / 2 + 1e-4


def test_tau_closed_form_matches_bisection(mrf):
    e1 = mrf[1].ell1
    R = np.geomspace(1e-6, 0.999 * e1.b10, 200)
    fast = e1.tau(R)
    slow = dataclasses.replace(e1, beta_bar=lambda r, t: e1.beta_bar(r, t)).tau(R)
    np.testing.assert_allclose(fast, slow, rtol=1e-9, atol=1e-9)


def test_ell_majorises_ell1_between_knots(mrf):
    res = mrf[1]
    R = np.geomspace(res.ell.x[0], 2.0 * res.ell.x[-1], 5000)
    assert np.all(res.ell(R) >= res.ell1(R))
    assert np.all(np.diff(res.ell(R)) >= 0)
