"""Rectangular grids and scalar fields with multilinear interpolation."""

from __future__ import annotations

import ast
import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfDomainError

# Relative snapping tolerance that makes interpolation exact at grid nodes.
_NODE_SNAP = 1e-9
# Slack (in units of the cell width) for queries that sit on the box faces.
_FACE_SLACK = 1e-9


@dataclass(frozen=True)
class Grid:
    """Axis-aligned box sampled by ``resolution[k]`` nodes along axis ``k``."""

    box: np.ndarray
    resolution: tuple

    def __post_init__(self):
        box = np.atleast_2d(np.asarray(self.box, dtype=float))
        res = tuple(int(r) for r in np.atleast_1d(self.resolution))
        if box.shape != (len(res), 2):
            raise ValueError(f"box shape {box.shape} does not match resolution {res}")
        if any(r < 2 for r in res):
            raise ValueError("every axis needs at least two nodes")
        if np.any(box[:, 1] <= box[:, 0]):
            raise ValueError("box bounds must satisfy lower < upper")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "resolution", res)

    @classmethod
    def from_spacing(cls, box, h):
        """Grid whose spacing is as close to ``h`` as the box allows."""
        box = np.atleast_2d(np.asarray(box, dtype=float))
        res = [int(round((b - a) / h)) + 1 for a, b in box]
        return cls(box, tuple(res))

    @property
    def ndim(self):
        return len(self.resolution)

    @property
    def spacing(self):
        return (self.box[:, 1] - self.box[:, 0]) / (np.asarray(self.resolution) - 1)

    @property
    def shape(self):
        return self.resolution

    @functools.cached_property
    def _interp_constants(self):
        res = np.asarray(self.resolution)
        corners = np.array(list(itertools.product((0, 1), repeat=self.ndim)), dtype=bool)
        strides = np.array([int(np.prod(res[k + 1:])) for k in range(self.ndim)], dtype=np.intp)
        return res, self.box[:, 0], self.spacing, corners, (corners @ strides, strides)

    @property
    def axes(self):
        return [np.linspace(a, b, n) for (a, b), n in zip(self.box, self.resolution)]

    def nodes(self):
        """All node coordinates as an array of shape (num_nodes, ndim), C order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @property
    def size(self):
        return int(np.prod(self.resolution))

    def contains(self, points, slack=0.0):
        points = np.atleast_2d(points)
        pad = slack * self.spacing
        return np.all(
            (points >= self.box[:, 0] - pad) & (points <= self.box[:, 1] + pad), axis=-1
        )

    def on_boundary(self):
        """Boolean array (grid shape) marking nodes on the faces of the box."""
        mask = np.zeros(self.resolution, dtype=bool)
        for k, n in enumerate(self.resolution):
            idx = [slice(None)] * self.ndim
            idx[k] = 0
            mask[tuple(idx)] = True
            idx[k] = n - 1
            mask[tuple(idx)] = True
        return mask


@dataclass(frozen=True)
class GridField:
    """Scalar field stored at the nodes of a :class:`Grid`.

    ``target_mask`` marks nodes that belong to the target set (distance at
    most the node-inclusion tolerance). ``meta`` carries free-form solver
    information such as the sweep count.
    """

    grid: Grid
    values: np.ndarray
    target_mask: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        mask = np.asarray(self.target_mask, dtype=bool).reshape(self.grid.shape)
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "target_mask", mask)

    @classmethod
    def from_function(cls, grid, func, target_distance, target_tol=1e-9, **meta):
        """Tabulate ``func`` (vectorised over points) on ``grid``."""
        nodes = grid.nodes()
        values = np.asarray(func(nodes), dtype=float)
        mask = np.asarray(target_distance(nodes)) <= target_tol
        return cls(grid, values, mask, dict(meta))

    def with_values(self, values, **meta):
        merged = dict(self.meta)
        merged.update(meta)
        return GridField(self.grid, values, self.target_mask, merged)

    @property
    def box(self):
        return self.grid.box

    def __call__(self, x):
        return interpolate(self, x)

    def sample(self, points, fill_value=np.nan):
        """Vectorised interpolation; points outside the box get ``fill_value``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return _multilinear(self.grid, self.values, points, fill_value)


def interpolate(field, x):
    """Multilinear interpolation of ``field`` at a single point ``x``.

    Raises :class:`OutOfDomainError` if ``x`` is outside the field box;
    callers choose their own clamping policy.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (field.grid.ndim,):
        raise ValueError(f"expected a point of dimension {field.grid.ndim}, got {x.shape}")
    if not field.grid.contains(x, slack=_FACE_SLACK)[0]:
        raise OutOfDomainError(f"point {x} lies outside the box {field.box.tolist()}")
    return float(_multilinear(field.grid, field.values, x[None, :], np.nan)[0])


def _multilinear_point(grid, values, p, fill_value):
    """Scalar path of :func:`_multilinear` for one query point (same arithmetic)."""
    res, lo, h, corners, offsets = grid._interp_constants
    flat_vals = values.ravel()
    base = 0
    fr = []
    for k in range(len(p)):
        s = (float(p[k]) - float(lo[k])) / float(h[k])
        r = round(s)
        if abs(s - r) < _NODE_SNAP:
            s = float(r)
        top = int(res[k]) - 1
        if s < -_FACE_SLACK or s > top + _FACE_SLACK:
            return fill_value
        s = min(max(s, 0.0), float(top))
        i = min(math.floor(s), top - 1)
        fr.append(s - i)
        base += i * int(offsets[1][k])
    out = 0.0
    for c, off in zip(corners, offsets[0]):
        w = 1.0
        for k, bit in enumerate(c):
            w *= fr[k] if bit else 1.0 - fr[k]
        if w > 0.0:
            out += w * float(flat_vals[base + int(off)])
    return out


def _multilinear(grid, values, points, fill_value):
    if len(points) == 1:
        return np.array([_multilinear_point(grid, values, points[0], fill_value)], dtype=float)
    res, lo, h, corners, offsets = grid._interp_constants
    s = (points - lo) / h
    snapped = np.round(s)
    s = np.where(np.abs(s - snapped) < _NODE_SNAP, snapped, s)
    inside = np.all((s >= -_FACE_SLACK) & (s <= res - 1 + _FACE_SLACK), axis=-1)
    s = np.clip(s, 0.0, res - 1)
    idx = np.minimum(np.floor(s).astype(np.intp), res - 2)
    frac = (s - idx)[:, None, :]
    w = np.prod(np.where(corners, frac, 1.0 - frac), axis=-1)
    flat = (idx @ offsets[1])[:, None] + offsets[0][None, :]
    # skip zero weights so that huge neighbours never leak in through 0*x
    contrib = np.where(w > 0.0, w * values.ravel()[flat], 0.0)
    out = np.zeros(len(points))
    for k in range(contrib.shape[1]):
        out += contrib[:, k]
    out[~inside] = fill_value
    return out


# Wall-clock entries are kept out of files so reruns are byte-identical.
_VOLATILE_META = ("seconds",)


def write_field_csv(field, path, **header):
    """One row per node: coordinates, value, mask; ``#`` lines carry the header."""
    g = field.grid
    meta = {"box": g.box.tolist(), "resolution": list(g.resolution)}
    meta.update(field.meta)
    meta.update(header)
    for key in _VOLATILE_META:
        meta.pop(key, None)
    nodes = g.nodes()
    names = [f"x{k}" for k in range(g.ndim)] + ["value", "mask"]
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}={_fmt_meta(meta[key])}\n")
        fh.write(",".join(names) + "\n")
        for x, v, m in zip(nodes, field.values.ravel(), field.target_mask.ravel()):
            fh.write(",".join([*(repr(float(c)) for c in x), repr(float(v)), str(int(m))]) + "\n")


def read_field_csv(path):
    """Inverse of :func:`write_field_csv`."""
    meta = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key] = val
        else:
            body.append(line)
    data = np.array([[float(c) for c in row.split(",")] for row in body[1:]])
    box = np.array(ast.literal_eval(meta.pop("box")), dtype=float)
    res = tuple(int(r) for r in ast.literal_eval(meta.pop("resolution")))
    grid = Grid(box, res)
    return GridField(grid, data[:, -2], data[:, -1] > 0.5, meta)


def _fmt_meta(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)
