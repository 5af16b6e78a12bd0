"""Stage orchestration: candidate, verification, synthesis, converse, reports."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .comparators import BracketPair, make_comparators
from .config import BETA_REGISTRY, CONTROLLER_REGISTRY
from .converse import ConverseParams, build_mrf, evaluate_J
from .errors import MrfError, StageError
from .grid import Grid, GridField, read_field_csv, write_field_csv
from .hjb import SolverParams, solve_min_time, solve_value_function
from .synthesis import (
    SegmentCertificate,
    SynthesisParams,
    build_descent_rate,
    check_superoptimality,
    envelope_violation,
    synthesize_level_halving,
)
from .systems import make_system
from .verify import (
    MrfCertificate,
    check_decrease,
    check_integrability,
    check_structure,
    compute_brackets,
    decrease_residuals,
    sandwich_slack,
)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def write_table(path, header, rows, meta=None):
    """CSV with ``#`` parameter lines, one header row, LF endings, repr floats."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for key in sorted(meta or {}):
            fh.write(f"# {key}={_fmt(meta[key])}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_table(path):
    """Header and rows of a :func:`write_table` file (cells stay strings)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if not ln.startswith("#")]
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


@dataclass
class RunResult:
    plan: object
    certificate: MrfCertificate
    checks: dict
    files: list
    report_lines: list
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    artifacts: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.failed_stage is None and bool(self.checks) and all(self.checks.values())

    @property
    def exit_code(self):
        return 0 if self.passed else 1


def build_grid(plan, system):
    res = plan.get("grid", "resolution")
    if res is not None:
        if len(res) != system.state_dim:
            raise StageError("grid", f"resolution needs {system.state_dim} entries")
        return Grid(system.box, tuple(res))
    return Grid.from_spacing(system.box, plan.get("grid", "spacing"))


def solver_params(plan):
    s = plan.sections["solver"]
    return SolverParams(s["tau"], s["fixed_point_tol"], s["max_sweeps"], s["boundary_value"],
                        s["target_tol"], plan.get("run", "workers"))


def build_candidate(plan, system, grid):
    """Candidate field ``W`` according to ``[candidate] source`` (times ``scale``)."""
    c = plan.sections["candidate"]
    sp = solver_params(plan)
    if c["source"] == "solve":
        W = solve_value_function(system, grid, system.cost, sp)
    elif c["source"] == "min_time":
        W = solve_min_time(system, grid, sp)
    elif c["source"] == "distance":
        W = GridField.from_function(grid, system.distance, system.distance, sp.target_tol,
                                    kind="distance")
    else:
        W = read_field_csv(c["path"])
    if c["scale"] != 1.0:
        W = W.with_values(c["scale"] * W.values, scale=c["scale"])
    return W


def sample_starts(plan, system, rng):
    """Seeded uniform starts in ``[start_low, start_high]`` off the target band."""
    sy = plan.sections["synthesis"]
    box = system.box
    lo = np.asarray(sy["start_low"] or (0.8 * box[:, 0] + 0.2 * box.mean(axis=1)), dtype=float)
    hi = np.asarray(sy["start_high"] or (0.8 * box[:, 1] + 0.2 * box.mean(axis=1)), dtype=float)
    out = []
    tol = plan.get("solver", "target_tol")
    while len(out) < sy["starts"]:
        z = rng.uniform(lo, hi)
        if float(system.distance(z)) > 10.0 * max(tol, 1e-9):
            out.append(z)
    return out


def synthesis_params(plan):
    sy = plan.sections["synthesis"]
    return SynthesisParams(dt=sy["dt"], max_levels=sy["max_levels"],
                           target_tol=plan.get("solver", "target_tol"),
                           safety_factor=sy["safety_factor"], quad_tol=sy["quad_tol"])


def run_synthesis(system, W, comp, P, starts, params, brackets, descent=True, workers=1):
    """Synthesis from each start plus SOP and (optionally) descent-rate checks.

    Starts run concurrently when ``workers > 1``; each run only reads ``W``
    and the tables, so records do not depend on the worker count.
    """
    def one(z):
        rec = synthesize_level_halving(system, W, comp, P, z, params, brackets)
        sop = check_superoptimality(rec.trajectory, W, comp)
        rec.sop_residual = sop.residual
        rec.sop_ok = bool(sop.residual <= 0.5 * rec.W_start + 1e-4)
        return rec

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(one, starts))
    else:
        records = [one(z) for z in starts]
    rate = None
    if descent and records:
        d0 = [float(system.distance(np.asarray(r.start))) for r in records]
        rate = build_descent_rate(brackets, comp.gamma, max(d0), 1e-3 * min(d0))
        for rec in records:
            rec.envelope_ok = bool(envelope_violation(rec, system.distance, rate) <= 1e-9)
    return records, rate


def _synthesis_tables(records, out_dir, prefix, meta, W, distance, rate=None):
    files = []
    rows = []
    seg_rows = []
    traj_rows = []
    for k, rec in enumerate(records):
        traj = rec.trajectory
        rows.append([k, rec.start, rec.W_start, traj.final_time, traj.total_cost, rec.cost_bound,
                     rec.reached_target, rec.cost_ok, len(rec.segments), rec.sop_residual,
                     rec.envelope_ok, rec.passed])
        for s in rec.segments:
            seg_rows.append([k, *s.row()])
        w = W.sample(traj.states)
        if rate is not None:
            d0 = float(distance(traj.states[0]))
            env = rate(np.full(len(traj.times), d0), traj.times)
        else:
            env = np.full(len(traj.times), np.nan)
        # the control held on [t_i, t_i+1); the final row repeats the last one
        u = np.vstack([traj.controls, traj.controls[-1:]]) if len(traj.controls) else \
            np.zeros((len(traj.times), 1))
        for t, x, uu, c, wv, e in zip(traj.times, traj.states, u, traj.accumulated_cost, w, env):
            traj_rows.append([k, t, *x, *uu, c, wv, e])
    dim = len(records[0].start) if records else 1
    mdim = records[0].trajectory.controls.shape[1] if records else 1
    files.append(write_table(
        os.path.join(out_dir, f"{prefix}synthesis.csv"),
        ["start_id", "start", "W_start", "time", "cost", "cost_bound", "reached", "cost_ok",
         "segments", "sop_residual", "envelope_ok", "passed"], rows, meta))
    files.append(write_table(os.path.join(out_dir, f"{prefix}segments.csv"),
                             ["start_id", *SegmentCertificate.FIELDS], seg_rows, meta))
    files.append(write_table(
        os.path.join(out_dir, f"{prefix}trajectories.csv"),
        ["start_id", "t", *[f"x{i}" for i in range(dim)], *[f"u{i}" for i in range(mdim)],
         "cost", "W", "beta"], traj_rows, meta))
    return files


def _synthesis_lines(records):
    lines = []
    for k, rec in enumerate(records):
        lines.append(
            f"start {k} z={_fmt(rec.start)} W={rec.W_start!r} cost={rec.trajectory.total_cost!r} "
            f"bound={rec.cost_bound!r} segments={len(rec.segments)} "
            f"sop={rec.sop_residual!r} verdict={'PASS' if rec.passed else 'FAIL'}"
        )
    return lines


def run_pipeline(plan, out_dir=None, quiet=True, stages=None):
    """Run the requested stages; every artifact lands in ``out_dir``.

    Stage errors are caught, reported under a FAILED banner with the stage
    name, and already written artifacts are kept.
    """
    out_dir = plan.out_dir if out_dir is None else out_dir
    os.makedirs(out_dir, exist_ok=True)
    stages = plan.stages if stages is None else tuple(stages)
    seed = plan.get("run", "seed")
    cert = MrfCertificate()
    checks = {}
    files = []
    sections = [("plan", plan.echo())]
    art = {"system": plan.get("system", "name")}
    failed = error = None
    stage = "setup"

    def log(msg):
        if not quiet:
            print(msg)

    try:
        system = make_system(plan.get("system", "name"), **plan.system_params)
        grid = build_grid(plan, system)
        art["distance"] = system.distance
        meta = {"system": system.name, "seed": seed, "resolution": list(grid.resolution)}
        W = None
        need_candidate = any(s in stages for s in ("solve", "verify", "synthesize"))
        if need_candidate:
            stage = "solve"
            log("stage solve")
            W = build_candidate(plan, system, grid)
            art["field"] = W
            files.append(os.path.join(out_dir, "field.csv"))
            write_field_csv(W, files[-1], system=system.name)
            m = W.meta
            conv = [[m.get(k) for k in ("tau", "sweeps", "converged", "last_update",
                                        "fixed_point_tol", "boundary_value")]]
            if "sweeps" in m:
                files.append(write_table(
                    os.path.join(out_dir, "convergence.csv"),
                    ["tau", "sweeps", "converged", "last_update", "fixed_point_tol",
                     "boundary_value"], conv, meta))
                checks["solver_converged"] = bool(m["converged"])
            sections.append(("stage: solve", [
                f"source: {plan.get('candidate', 'source')}",
                *(f"{k}: {_fmt(m[k])}" for k in sorted(m) if k != "seconds"),
            ]))

        comp = P = brackets = None
        if "verify" in stages or "synthesize" in stages:
            stage = "verify"
            log("stage verify")
            v = plan.sections["verify"]
            comp = make_comparators(plan.get("comparators", "p0"), plan.get("comparators", "gamma"))
            cert.structure_report = check_structure(
                W, plan.get("solver", "target_tol"), levels=tuple(v["levels"]))
            brackets = compute_brackets(W, system.distance)
            cert.brackets = brackets
            slack = sandwich_slack(W, system.distance, brackets)
            tol = v["decrease_tol"]
            if tol is None:
                # solver fields carry fixed-point slack, analytic ones do not
                solved = "sweeps" in W.meta
                tol = 2.0 * W.meta["fixed_point_tol"] / W.meta["tau"] if solved else 0.0
            cert.decrease_report = check_decrease(
                W, system, comp, tol=tol, exit_tol=v["exit_tol"])
            art["histogram"] = cert.decrease_report.histogram
            wmax = float(np.max(W.values[~W.target_mask]))
            P = check_integrability(comp.p0, wmax)
            cert.ic_report = P
            checks.update(cert.checks)
            checks["sandwich"] = bool(slack >= -1e-12)
            files.append(write_table(
                os.path.join(out_dir, "brackets.csv"), ["r", "d_minus", "d_plus"],
                np.column_stack([brackets.radii, brackets.d_minus.y, brackets.d_plus.y]), meta))
            nodes = grid.nodes()
            res, _ = decrease_residuals(W, system, comp, exit_tol=v["exit_tol"])
            files.append(write_table(
                os.path.join(out_dir, "residuals.csv"),
                [*[f"x{i}" for i in range(grid.ndim)], "residual"],
                [[*x, r] for x, r in zip(nodes, res)], meta))
            step = max(1, len(P.v) // 2000)
            files.append(write_table(os.path.join(out_dir, "P.csv"), ["v", "P"],
                                     np.column_stack([P.v[::step], P.P[::step]]), meta))
            sections.append(("stage: verify", [
                "structure:", *("  " + ln for ln in cert.structure_report.lines()),
                f"sandwich_slack: {slack!r}",
                "decrease:", *("  " + ln for ln in cert.decrease_report.lines()),
                "integrability:", *("  " + ln for ln in P.lines()),
            ]))

        if "synthesize" in stages:
            stage = "synthesize"
            log("stage synthesize")
            if not P.passed:
                raise MrfError("integrability check failed; no cost bound to certify")
            rng = np.random.default_rng(seed)
            starts = sample_starts(plan, system, rng)
            records, rate = run_synthesis(system, W, comp, P, starts, synthesis_params(plan),
                                          brackets, plan.get("synthesis", "descent_rate"),
                                          plan.get("run", "workers"))
            cert.synthesis_records = records
            art["records"] = records
            checks.update(cert.checks)
            files.extend(_synthesis_tables(records, out_dir, "", meta, W, system.distance, rate))
            lines = _synthesis_lines(records)
            if rate is not None:
                files.append(write_table(os.path.join(out_dir, "descent_rate.csv"),
                                         ["R", "Gamma"], rate.Gamma_table, meta))
                lines.append(f"descent_rate: R_max={rate.R_max!r} r_min={rate.r_min!r} "
                             f"t_work={rate.t_work!r} min_gap={rate.min_gap!r}")
            sections.append(("stage: synthesize", lines))

        if "converse" in stages:
            stage = "converse"
            log("stage converse")
            files.extend(run_converse_stage(plan, system, grid, out_dir, meta, checks,
                                            sections, art))
    except (MrfError, ValueError, ArithmeticError, OSError) as exc:
        failed, error = stage, f"{type(exc).__name__}: {exc}"
        checks[stage] = False

    summary = [f"check {k}: {'PASS' if v else 'FAIL'}" for k, v in checks.items()]
    ok = failed is None and bool(checks) and all(checks.values())
    summary.append(f"overall: {'PASS' if ok else 'FAIL'}")
    sections.append(("certificate", summary))
    lines = []
    if failed is not None:
        lines.append(f"FAILED in stage '{failed}': {error}")
        lines.append("")
    for title, body in sections:
        lines.append(f"== {title} ==")
        lines.extend(body)
        lines.append("")
    report = os.path.join(out_dir, "report.txt")
    with open(report, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
    files.append(report)
    result = RunResult(plan, cert, checks, files, lines, failed, error, art)
    if plan.get("outputs", "plots"):
        from .plots import emit_plots

        files.extend(emit_plots(art, out_dir))
    return result


def run_converse_stage(plan, system, grid, out_dir, meta, checks, sections, art):
    cv = plan.sections["converse"]
    seed = plan.get("run", "seed")
    params = ConverseParams(cv["i_min"], cv["i_max"], cv["samples_per_strip"],
                            cv["safety_factor"], cv["strip_mode"], None, cv["dt"], cv["cap"],
                            cv["j_max"], seed, plan.get("run", "workers"))
    beta = BETA_REGISTRY[cv["beta"]]
    res = build_mrf(system, beta, BracketPair.identity(), CONTROLLER_REGISTRY[cv["controller"]],
                    grid, params, solver_params(plan))
    cmeta = dict(meta, **{f"converse_{k}": v for k, v in cv.items()})
    files = []
    files.append(write_table(os.path.join(out_dir, "r_table.csv"), ["i", "r"],
                             [[int(i), r] for i, r in res.r_table.rows()], cmeta))
    files.append(write_table(os.path.join(out_dir, "strip_times.csv"), ["i", "observed", "T"],
                             [[int(i), o, t] for i, o, t in res.times.rows()], cmeta))
    files.append(write_table(os.path.join(out_dir, "ell.csv"), ["R", "ell1", "ell"],
                             np.column_stack([res.ell.x, res.ell1(res.ell.x), res.ell.y]), cmeta))
    files.append(write_table(os.path.join(out_dir, "phi.csv"), ["r", "Phi"],
                             res.phi_psi.Phi.rows(), cmeta))
    files.append(os.path.join(out_dir, "converse_field.csv"))
    write_field_csv(res.V, files[-1], system=system.name)
    checks["converse_structure"] = res.structure.passed
    checks["converse_decrease"] = res.decrease.passed
    lines = [
        f"beta_bar(1, 0): {res.ell1.b10!r}",
        f"anchors: {_fmt(res.ell_sequence.anchors)}",
        f"plateaus: {_fmt(res.ell_sequence.plateaus)}",
        f"decrease_tol: {res.tol!r}",
        "structure:", *("  " + ln for ln in res.structure.lines()),
        "decrease:", *("  " + ln for ln in res.decrease.lines()),
    ]
    if plan.get("synthesis", "starts") > 0 and res.decrease.passed:
        P = check_integrability(res.comparators.p0, float(np.max(res.V.values)))
        rng = np.random.default_rng(seed)
        starts = sample_starts(plan, system, rng)
        records, _ = run_synthesis(system, res.V, res.comparators, P, starts,
                                   synthesis_params(plan), res.V_brackets, descent=False,
                                   workers=plan.get("run", "workers"))
        checks["converse_synthesis"] = all(r.passed for r in records)
        files.extend(_synthesis_tables(records, out_dir, "converse_", cmeta, res.V,
                                       system.distance))
        lines.extend(_synthesis_lines(records))
        Js = [evaluate_J(system, res.ell, z, CONTROLLER_REGISTRY[cv["controller"]](z),
                         dt=cv["dt"]) for z in starts]
        lines.append("J under the GAC controller: " + _fmt([j.value for j in Js]))
    sections.append(("stage: converse", lines))
    art["converse"] = res
    return files
