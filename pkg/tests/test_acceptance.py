"""Acceptance criteria 1-12 at their stated tolerances.

Each test records a PASS/FAIL line (shown in the terminal summary) and then
asserts, so a failing criterion also fails the suite.
"""

import contextlib
import filecmp
import os
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from mrfkit.comparators import BracketPair, make_comparators
from mrfkit.config import BETA_REGISTRY, CONTROLLER_REGISTRY, parse_config
from mrfkit.converse import ConverseParams, build_ell_sequence, build_mrf
from mrfkit.grid import Grid, GridField
from mrfkit.hjb import solve_min_time
from mrfkit.kl import majorization_gap, quasi_random_rectangle
from mrfkit.pipeline import run_pipeline
from mrfkit.synthesis import (
    SynthesisParams,
    build_descent_rate,
    check_superoptimality,
    synthesize_level_halving,
)
from mrfkit.systems import double_integrator_ball_time, make_system
from mrfkit.verify import (
    check_decrease,
    check_integrability,
    compute_brackets,
    sandwich_slack,
)

H = 0.01
GAMMA = lambda v: np.asarray(v) / (1 + np.asarray(v))  # noqa: E731
CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


@contextlib.contextmanager
def criterion(n, detail=""):
    """Record PASS/FAIL for criterion ``n`` around the block's assertions."""
    info = {"detail": detail}
    try:
        yield info
    except BaseException:
        ACCEPTANCE[n] = ("FAIL", info["detail"])
        raise
    ACCEPTANCE[n] = ("PASS", info["detail"])


def _starts(n, seed, lo=-2.0, hi=2.0, min_d=1e-3):
    s = make_system("int1d_mintime")
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        z = rng.uniform(lo, hi)
        if float(s.distance(np.array([z]))) > min_d:
            out.append(z)
    return out


@pytest.fixture(scope="module")
def int1d_setup():
    s = make_system("int1d_mintime")
    g = Grid.from_spacing(s.box, H)
    W = GridField.from_function(g, lambda x: 2.0 * s.distance(x), s.distance)
    comp = make_comparators("one", "saturating")
    return s, g, W, comp


@pytest.fixture(scope="module")
def synth_runs(int1d_setup):
    s, _, W, comp = int1d_setup
    br = compute_brackets(W, s.distance)
    P = check_integrability(comp.p0, float(W.values.max()))
    t0 = time.perf_counter()
    recs = [synthesize_level_halving(s, W, comp, P, [z], SynthesisParams(), br)
            for z in _starts(50, seed=2024)]
    return recs, time.perf_counter() - t0, br


@pytest.fixture(scope="module")
def converse_run():
    s = make_system("int1d_mintime")
    g = Grid.from_spacing(s.box, H)
    t0 = time.perf_counter()
    res = build_mrf(s, BETA_REGISTRY["saturating_exp"], BracketPair.identity(),
                    CONTROLLER_REGISTRY["neg_sign"], g, ConverseParams())
    return s, res, time.perf_counter() - t0


def test_criterion_01_min_time_oracle():
    s = make_system("int1d_mintime", box=(-2.499, 2.501))
    with criterion(1) as c:
        errs, secs = [], []
        for h in (0.04, 0.02, 0.01):
            g = Grid.from_spacing(s.box, h)
            t0 = time.perf_counter()
            V = solve_min_time(s, g)
            secs.append(time.perf_counter() - t0)
            errs.append(float(np.max(np.abs(V.values.ravel() - s.distance(g.nodes())))))
        ratios = [errs[0] / errs[1], errs[1] / errs[2]]
        c["detail"] = f"errors {[round(e, 5) for e in errs]} ratios {[round(r, 3) for r in ratios]}"
        assert all(e <= 3 * h for e, h in zip(errs, (0.04, 0.02, 0.01)))
        assert all(1.6 <= r <= 2.6 for r in ratios)
        assert max(secs) < 1.0


def test_criterion_02_verifier_discrimination(int1d_setup):
    s, g, W, comp = int1d_setup
    with criterion(2) as c:
        t0 = time.perf_counter()
        ok = check_decrease(W, s, comp, tau=H)
        Wd = W.with_values(0.5 * W.values)
        bad = check_decrease(Wd, s, comp, tau=H)
        secs = time.perf_counter() - t0
        dw = float(s.distance(np.array(bad.worst_node)))
        c["detail"] = (f"2d worst {ok.worst_residual:.4f}; d worst {bad.worst_residual:.4f} "
                       f">= {0.5 * GAMMA(dw):.4f}")
        assert ok.passed and not bad.passed
        assert bad.worst_residual >= 0.5 * GAMMA(dw)
        assert secs < 1.0


def test_criterion_03_cost_bound(synth_runs, int1d_setup):
    recs, secs, _ = synth_runs
    s = int1d_setup[0]
    with criterion(3) as c:
        lo_ok = hi_ok = True
        for r in recs:
            d = float(s.distance(np.array(r.start)))
            cost = r.trajectory.total_cost
            lo_ok &= cost >= d - 0.2
            hi_ok &= cost <= 4 * d + 0.1 and cost <= r.cost_bound + 1e-6
        c["detail"] = f"{len(recs)} starts in {secs:.2f} s"
        assert all(r.reached_target for r in recs)
        assert lo_ok and hi_ok
        assert secs < 10.0


def test_criterion_04_level_halving(synth_runs, int1d_setup):
    recs, _, br = synth_runs
    s, _, _, comp = int1d_setup
    from mrfkit.synthesis import segment_time_bound
    with criterion(4) as c:
        worst = 0.0
        n_seg = 0
        for r in recs:
            d = float(s.distance(np.array(r.start)))
            for seg in r.segments:
                if seg.index > 8:
                    continue
                n_seg += 1
                if seg.complete:
                    dev = abs(seg.level_after - r.W_start / 2**seg.index)
                    worst = max(worst, dev / r.W_start)
                    assert dev <= 1e-4 * r.W_start
                p0 = float(comp.p0(seg.level_after)) if seg.level_after > 0 else 1.0
                assert seg.cost <= 2 * (seg.level_before - seg.level_after) / p0 + 1e-6
                assert seg.duration <= 5 * segment_time_bound(seg.index, d, br, comp.gamma)
        c["detail"] = f"{n_seg} segments, worst relative halving error {worst:.2e}"


def test_criterion_05_superoptimality(synth_runs, int1d_setup):
    recs, _, _ = synth_runs
    _, _, W, comp = int1d_setup
    with criterion(5) as c:
        margin = min(r.W_start / 2 + 1e-4 - check_superoptimality(r.trajectory, W, comp).residual
                     for r in recs)
        c["detail"] = f"smallest margin {margin:.4f}"
        assert margin >= 0


def test_criterion_06_sandwich(int1d_setup, converse_run):
    s, _, W, _ = int1d_setup
    _, res, _ = converse_run
    with criterion(6) as c:
        s1 = sandwich_slack(W, s.distance, compute_brackets(W, s.distance))
        s2 = sandwich_slack(res.V, s.distance, res.V_brackets)
        c["detail"] = f"slack 2d {s1:.2e}, converse V {s2:.2e}"
        assert s1 >= -1e-12 and s2 >= -1e-12


def test_criterion_07_P_quadrature():
    with criterion(7) as c:
        ic = check_integrability(lambda v: np.minimum(1.0, np.sqrt(v)), 1.0)
        bad = check_integrability(lambda v: np.minimum(1.0, v), 1.0)
        c["detail"] = f"|P(1) - 2| = {abs(ic(1.0) - 2):.2e}; linear cap: {bad.reason}"
        assert ic.passed and abs(ic(1.0) - 2.0) <= 1e-6
        assert not bad.passed and len(bad.partials) == 6


def test_criterion_08_ell_anchor(converse_run):
    s, res, _ = converse_run
    with criterion(8) as c:
        seq = build_ell_sequence(6, res.beta_bar, res.phi_psi.Phi, res.times, s, res.ell1)
        worst = 0.0
        for j in range(1, 6):
            keep = seq.ladder <= seq.anchors[j - 1]
            worst = max(worst, float(np.max(np.abs(seq.levels[j][keep] - seq.levels[j - 1][keep]))))
        c["detail"] = f"largest anchor deviation {worst:.1e}"
        assert worst <= 1e-12
        assert np.all(np.diff(seq.levels[-1]) >= 0)
        assert np.all(np.diff(seq.table().y) > 0)


def test_criterion_09_kl_majorization(synth_runs, converse_run):
    _, _, br = synth_runs
    _, res, _ = converse_run
    with criterion(9) as c:
        rate = build_descent_rate(br, GAMMA, R_max=2.4, r_min=1e-3, samples=10_000)
        pts = quasi_random_rectangle((rate.r_min, rate.R_max), (0.0, rate.t_work), 10_000, seed=9)
        g1 = majorization_gap(rate.beta, rate.step.b, pts)
        bb = res.beta_bar
        pts2 = quasi_random_rectangle(bb.R_range, (0.0, bb.t_work), 10_000, seed=9)
        g2 = majorization_gap(bb.kl, bb.step, pts2)
        tail = rate.beta(1.0, 10 * rate.t_work) < rate.beta(1.0, rate.t_work)
        c["detail"] = f"gaps: descent {g1:.2e}, converse {g2:.2e}"
        assert g1 >= 0 and g2 >= 0
        assert rate.beta.axiom_violations() == [] and bb.kl.axiom_violations() == []
        assert tail


def test_criterion_10_round_trip(converse_run):
    s, res, build_secs = converse_run
    with criterion(10) as c:
        t0 = time.perf_counter()
        V, comp = res.V, res.comparators
        P = check_integrability(comp.p0, float(V.values[V.values < 1e5].max()))
        fails = 0
        for z in _starts(10, seed=10, lo=-2.0, hi=2.0):
            rec = synthesize_level_halving(s, V, comp, P, [z], SynthesisParams(),
                                           res.V_brackets)
            d = float(s.distance(np.array([z])))
            sop = check_superoptimality(rec.trajectory, V, comp)
            ok = (rec.passed and d - 0.2 <= rec.trajectory.total_cost <= rec.cost_bound + 1e-6
                  and sop.residual <= rec.W_start / 2 + 1e-4)
            fails += not ok
        total = build_secs + time.perf_counter() - t0
        c["detail"] = (f"decrease worst {res.decrease.worst_residual:.1e} <= tol {res.tol:.1e}; "
                       f"synthesis failures {fails}/10; {total:.1f} s")
        assert res.structure.passed and res.decrease.passed
        assert fails == 0
        assert total < 60.0


def _bang_bang_extent(x, v, n=200):
    """Largest coordinate magnitude along the time-optimal path to the origin."""
    if x + 0.5 * v * abs(v) > 0:
        v1, a = -np.sqrt(x + 0.5 * v * v), -1.0
        t1 = v - v1
    else:
        v1, a = np.sqrt(max(-x + 0.5 * v * v, 0.0)), 1.0
        t1 = v1 - v
    t = np.linspace(0.0, t1, n)
    xs = x + v * t + 0.5 * a * t * t
    t2 = np.linspace(0.0, abs(v1), n)
    xs2 = xs[-1] + v1 * t2 - 0.5 * a * t2 * t2
    return max(np.abs(xs).max(), np.abs(xs2).max(), abs(v), abs(v1))


def test_criterion_11_double_integrator():
    s = make_system("double_integrator_mintime")
    with criterion(11) as c:
        t0 = time.perf_counter()
        V = solve_min_time(s, Grid.from_spacing(s.box, 0.02))
        rng = np.random.default_rng(11)
        pts = []
        # interior: optimal arc keeps 0.5 away from the faces, where the
        # repelling boundary value does not reach through interpolation
        while len(pts) < 100:
            z = rng.uniform(-1.5, 1.5, 2)
            if np.hypot(*z) > 0.3 and _bang_bang_extent(*z) <= 1.5:
                pts.append(z)
        oracle = np.array([double_integrator_ball_time(x, v, 0.1) for x, v in pts])
        rel = np.abs(V.sample(np.array(pts)) - oracle) / oracle
        secs = time.perf_counter() - t0
        c["detail"] = (f"max rel error {rel.max():.3f}, median {np.median(rel):.3f}, "
                       f"{int(np.sum(rel > 0.10))}/100 above 10%; {secs:.1f} s")
        assert rel.max() <= 0.10
        assert secs < 60.0


def test_criterion_12_determinism(tmp_path):
    with criterion(12) as c:
        dirs = []
        for workers in (1, 8):
            for rep in (0, 1):
                plan = parse_config(os.path.join(CONFIGS, "bench.ini"))
                plan.sections["run"]["workers"] = workers
                plan.sections["outputs"]["plots"] = False
                out = tmp_path / f"w{workers}_{rep}"
                res = run_pipeline(plan, out_dir=out)
                assert res.passed
                dirs.append(out)
        csvs = sorted(f for f in os.listdir(dirs[0]) if f.endswith(".csv"))
        match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], csvs, shallow=False)
        for other in dirs[2:]:
            m2, mm2, e2 = filecmp.cmpfiles(dirs[0], other, csvs, shallow=False)
            mismatch += mm2
            errors += e2
        c["detail"] = f"{len(csvs)} CSV files x 4 runs (workers 1 and 8)"
        assert not mismatch and not errors
