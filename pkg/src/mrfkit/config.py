"""INI run configuration: parsing, validation and the resolved run plan."""

from __future__ import annotations

import configparser
import inspect
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .comparators import P0_REGISTRY, GAMMA_REGISTRY, _split
from .errors import ConfigError
from .systems import SYSTEMS

STAGES = ("solve", "verify", "synthesize", "converse")
CANDIDATES = ("solve", "min_time", "distance", "csv")


def _beta_saturating_exp(r, t):
    r = np.asarray(r, dtype=float)
    return 2.0 * r * np.exp(-np.asarray(t, dtype=float) / (1.0 + r))


def _beta_exp(r, t):
    return 2.0 * np.asarray(r, dtype=float) * np.exp(-np.asarray(t, dtype=float))


BETA_REGISTRY = {"saturating_exp": _beta_saturating_exp, "exp": _beta_exp}


def _neg_sign(z):
    return lambda t, x: -np.sign(np.atleast_1d(x)[:1])


CONTROLLER_REGISTRY = {"neg_sign": _neg_sign}


# section -> key -> (type, default); None default means required or unset
SCHEMA = {
    "run": {
        "stages": (list, ["solve", "verify", "synthesize"]),
        "seed": (int, 0),
        "workers": (int, 1),
    },
    "system": {"name": (str, None)},
    "grid": {
        "spacing": (float, 0.01),
        "resolution": (list, None),
    },
    "candidate": {
        "source": (str, "solve"),
        "scale": (float, 1.0),
        "path": (str, None),
    },
    "comparators": {
        "p0": (str, "one"),
        "gamma": (str, "saturating"),
    },
    "verify": {
        "decrease_tol": (float, None),
        "exit_tol": (float, 1e-9),
        "levels": (list, ["0.25", "0.5", "1.0", "2.0"]),
    },
    "solver": {
        "tau": (float, None),
        "fixed_point_tol": (float, 1e-9),
        "max_sweeps": (int, 20000),
        "boundary_value": (float, 1e6),
        "target_tol": (float, 1e-9),
    },
    "synthesis": {
        "starts": (int, 10),
        "start_low": (list, None),
        "start_high": (list, None),
        "dt": (float, 0.01),
        "safety_factor": (float, 5.0),
        "max_levels": (int, 64),
        "quad_tol": (float, 1e-6),
        "descent_rate": (bool, True),
    },
    "converse": {
        "beta": (str, "saturating_exp"),
        "controller": (str, "neg_sign"),
        "i_min": (int, -4),
        "i_max": (int, 8),
        "samples_per_strip": (int, 8),
        "safety_factor": (float, 2.0),
        "strip_mode": (str, "enter"),
        "j_max": (int, 3),
        "dt": (float, 0.005),
        "cap": (float, 1e3),
    },
    "outputs": {
        "dir": (str, "mrf_out"),
        "plots": (bool, True),
    },
}


@dataclass
class RunPlan:
    """Fully resolved configuration; ``sections`` echoes every value in use."""

    sections: dict
    system_params: dict = field(default_factory=dict)
    source: Optional[str] = None

    def get(self, section, key):
        return self.sections[section][key]

    @property
    def stages(self):
        return tuple(self.sections["run"]["stages"])

    @property
    def out_dir(self):
        return self.sections["outputs"]["dir"]

    def echo(self):
        """``[section] key = value`` lines in fixed order (the report header)."""
        lines = []
        for sec in SCHEMA:
            lines.append(f"[{sec}]")
            vals = dict(self.sections[sec])
            if sec == "system":
                vals.update(self.system_params)
            for key in sorted(vals):
                lines.append(f"{key} = {_show(vals[key])}")
        return lines


def _show(v):
    if isinstance(v, (list, tuple)):
        return ", ".join(_show(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(kind, raw, where):
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is list:
            return [p.strip() for p in raw.split(",") if p.strip()]
        return raw
    except ValueError:
        raise ConfigError(f"{where}: expected {kind.__name__}, got {raw!r}") from None


def _system_keys(name):
    sig = inspect.signature(SYSTEMS[name])
    return {k: p.default for k, p in sig.parameters.items()}


def _parse_system_param(raw, default, where):
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    try:
        if isinstance(default, int) and not isinstance(default, bool):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple) and default and isinstance(default[0], tuple):
            vals = [float(p) for p in parts]
            if len(vals) % 2:
                raise ValueError(raw)
            return tuple(zip(vals[0::2], vals[1::2]))
        if isinstance(default, tuple):
            return tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None
    return raw


def parse_config(source):
    """Parse INI text or a path into a :class:`RunPlan`.

    Unknown sections or keys, missing ``[system] name``, type mismatches and
    out-of-range values raise :class:`ConfigError` naming ``[section] key``.
    """
    text = source
    origin = None
    if isinstance(source, os.PathLike) or ("\n" not in str(source) and os.path.exists(str(source))):
        origin = str(source)
        with open(origin, encoding="utf-8") as fh:
            text = fh.read()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=origin or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"[{sec}]: unknown section")
    if not cp.has_option("system", "name"):
        raise ConfigError("[system] name: required key is missing")
    name = cp.get("system", "name").strip()
    if name not in SYSTEMS:
        raise ConfigError(f"[system] name: unknown system {name!r}; known: {sorted(SYSTEMS)}")
    sys_keys = _system_keys(name)
    sections = {}
    system_params = {}
    for sec, keys in SCHEMA.items():
        vals = {}
        given = dict(cp.items(sec)) if cp.has_section(sec) else {}
        for key, raw in given.items():
            where = f"[{sec}] {key}"
            if key in keys:
                vals[key] = _convert(keys[key][0], raw, where)
            elif sec == "system" and key in sys_keys:
                system_params[key] = _parse_system_param(raw, sys_keys[key], where)
            else:
                raise ConfigError(f"{where}: unknown key")
        for key, (_, default) in keys.items():
            vals.setdefault(key, default)
        sections[sec] = vals
    plan = RunPlan(sections, system_params, origin)
    _validate(plan)
    return plan


def _validate(plan):
    s = plan.sections
    bad = [st for st in s["run"]["stages"] if st not in STAGES]
    if bad:
        raise ConfigError(f"[run] stages: unknown stage(s) {bad}; known: {list(STAGES)}")
    if s["run"]["workers"] < 1:
        raise ConfigError("[run] workers: must be at least 1")
    if s["run"]["seed"] < 0:
        raise ConfigError("[run] seed: must be nonnegative")
    if s["grid"]["spacing"] <= 0:
        raise ConfigError("[grid] spacing: must be positive")
    res = s["grid"]["resolution"]
    if res is not None:
        try:
            res = [int(r) for r in res]
        except ValueError:
            raise ConfigError("[grid] resolution: expected integers") from None
        if any(r < 2 for r in res):
            raise ConfigError("[grid] resolution: need at least 2 nodes per axis")
        s["grid"]["resolution"] = res
    cand = s["candidate"]
    if cand["source"] not in CANDIDATES:
        raise ConfigError(f"[candidate] source: expected one of {list(CANDIDATES)}")
    if cand["source"] == "csv" and not cand["path"]:
        raise ConfigError("[candidate] path: required when source = csv")
    if cand["scale"] <= 0:
        raise ConfigError("[candidate] scale: must be positive")
    for key, reg in (("p0", P0_REGISTRY), ("gamma", GAMMA_REGISTRY)):
        nm, _ = _split(s["comparators"][key])
        if nm not in reg:
            raise ConfigError(f"[comparators] {key}: unknown name {nm!r}; known: {sorted(reg)}")
    try:
        s["verify"]["levels"] = [float(v) for v in s["verify"]["levels"]]
    except ValueError:
        raise ConfigError("[verify] levels: expected floats") from None
    dtol = s["verify"]["decrease_tol"]
    if (dtol is not None and dtol < 0) or s["verify"]["exit_tol"] < 0:
        raise ConfigError("[verify] decrease_tol, exit_tol: must be nonnegative")
    sv = s["solver"]
    if sv["tau"] is not None and sv["tau"] <= 0:
        raise ConfigError("[solver] tau: must be positive")
    for key in ("fixed_point_tol", "boundary_value"):
        if sv[key] <= 0:
            raise ConfigError(f"[solver] {key}: must be positive")
    if sv["max_sweeps"] < 1:
        raise ConfigError("[solver] max_sweeps: must be positive")
    sy = s["synthesis"]
    if sy["starts"] < 0 or sy["dt"] <= 0 or sy["safety_factor"] <= 0:
        raise ConfigError("[synthesis] starts, dt, safety_factor: out of range")
    for key in ("start_low", "start_high"):
        if sy[key] is not None:
            try:
                sy[key] = [float(v) for v in sy[key]]
            except ValueError:
                raise ConfigError(f"[synthesis] {key}: expected floats") from None
    cv = s["converse"]
    if cv["beta"] not in BETA_REGISTRY:
        raise ConfigError(f"[converse] beta: known: {sorted(BETA_REGISTRY)}")
    if cv["controller"] not in CONTROLLER_REGISTRY:
        raise ConfigError(f"[converse] controller: known: {sorted(CONTROLLER_REGISTRY)}")
    if cv["i_min"] > 0 or cv["i_max"] < 1:
        raise ConfigError("[converse] i_min, i_max: need i_min <= 0 < i_max")
    if cv["safety_factor"] <= 1:
        raise ConfigError("[converse] safety_factor: must exceed 1")
    if cv["strip_mode"] not in ("enter", "midpoint"):
        raise ConfigError("[converse] strip_mode: expected enter or midpoint")
    if cv["j_max"] < 2:
        raise ConfigError("[converse] j_max: must be at least 2")
