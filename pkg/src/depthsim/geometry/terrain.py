"""Procedural heightfield terrains.

Terrain-local coordinates put the origin at the centre of a square of side
``extent``; features (steps, gaps, blocks) start at ``x = start`` and run
along +x. World coordinates are obtained with :func:`terrain_world_mesh`,
which applies the border offset.

Two mesh layouts are used:

* smooth kinds (``flat``, ``rough_slope_*``) share one vertex grid and are
  piecewise linear, two triangles per cell split along the lower-left to
  upper-right diagonal;
* terraced kinds (stairs, gap, high_plane, discrete, hurdle) give every cell a
  flat top at the analytic height of its centre and close height changes
  between neighbouring cells with vertical walls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from depthsim.errors import ConfigError, DomainError
from depthsim.geometry.mesh import TriangleMesh, apply_terrain_offset

DEFAULT_PARAMS: dict[str, dict[str, float]] = {
    "flat": {},
    "rough_slope_up": {"grade": 0.15, "roughness": 0.02, "roughness_scale": 0.25},
    "rough_slope_down": {"grade": 0.15, "roughness": 0.02, "roughness_scale": 0.25},
    "stairs_up": {"step_height": 0.1, "step_run": 0.3, "start": 0.0, "num_steps": 10.0},
    "stairs_down": {"step_height": 0.1, "step_run": 0.3, "start": 0.0, "num_steps": 10.0},
    "gap": {"start": 0.5, "width": 0.4, "depth": 0.5},
    "high_plane": {"start": 0.5, "height": 0.2},
    "discrete": {"start": 0.3, "block_size": 0.2, "max_height": 0.1},
    "hurdle": {"start": 0.6, "height": 0.2, "width": 0.1},
}
SMOOTH_KINDS = frozenset({"flat", "rough_slope_up", "rough_slope_down"})
TERRAIN_KINDS = tuple(DEFAULT_PARAMS)

_DOMAIN_TOL = 1e-9


@dataclass(frozen=True)
class TerrainSpec:
    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    extent: float = 8.0
    cell: float = 0.05
    border: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DEFAULT_PARAMS:
            raise ConfigError(f"unknown terrain kind {self.kind!r}; expected one of {TERRAIN_KINDS}")
        defaults = DEFAULT_PARAMS[self.kind]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged = {**defaults, **{k: float(v) for k, v in self.params.items()}}
        if not all(math.isfinite(v) for v in merged.values()):
            raise ConfigError("terrain parameters must be finite")
        if not (self.extent > 0 and self.cell > 0):
            raise ConfigError("terrain extent and cell must be positive")
        n = self.extent / self.cell
        if abs(n - round(n)) > 1e-6:
            raise ConfigError("terrain extent must be an integer multiple of the cell size")
        if self.border < 0:
            raise ConfigError("terrain border must be non-negative")
        object.__setattr__(self, "params", merged)

    @property
    def n_cells(self) -> int:
        return int(round(self.extent / self.cell))

    @property
    def half(self) -> float:
        return 0.5 * self.extent

    def p(self, name: str) -> float:
        return self.params[name]


# ---------------------------------------------------------------------------
# closed-form heights


def _value_noise_lattice(spec: TerrainSpec):
    scale = spec.p("roughness_scale")
    n = int(math.ceil(spec.extent / scale)) + 2
    rng = np.random.default_rng(spec.seed)
    amp = spec.p("roughness")
    return scale, amp * rng.uniform(-1.0, 1.0, size=(n, n))


def _value_noise(spec: TerrainSpec, x, y):
    scale, lattice = _value_noise_lattice(spec)
    gx = (np.asarray(x) + spec.half) / scale
    gy = (np.asarray(y) + spec.half) / scale
    i = np.clip(np.floor(gx).astype(np.int64), 0, lattice.shape[0] - 2)
    j = np.clip(np.floor(gy).astype(np.int64), 0, lattice.shape[1] - 2)
    s, t = gx - i, gy - j
    return (
        lattice[i, j] * (1 - s) * (1 - t)
        + lattice[i + 1, j] * s * (1 - t)
        + lattice[i, j + 1] * (1 - s) * t
        + lattice[i + 1, j + 1] * s * t
    )


def _smooth_vertex_heights(spec: TerrainSpec, x, y):
    if spec.kind == "flat":
        return np.zeros(np.broadcast(x, y).shape)
    sign = 1.0 if spec.kind == "rough_slope_up" else -1.0
    z = sign * spec.p("grade") * np.asarray(x, dtype=np.float64)
    if spec.p("roughness") != 0.0:
        z = z + _value_noise(spec, x, y)
    return z


def _terraced_height(spec: TerrainSpec, x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    kind = spec.kind
    start = spec.p("start")
    z = np.zeros(np.broadcast(x, y).shape)
    if kind in ("stairs_up", "stairs_down"):
        k = np.floor((x - start) / spec.p("step_run"))
        k = np.clip(k, 0, spec.p("num_steps"))
        sign = 1.0 if kind == "stairs_up" else -1.0
        z = sign * spec.p("step_height") * k + 0.0 * y
    elif kind == "gap":
        inside = (x >= start) & (x < start + spec.p("width"))
        z = np.where(inside, -spec.p("depth"), 0.0) + 0.0 * y
    elif kind == "high_plane":
        z = np.where(x >= start, spec.p("height"), 0.0) + 0.0 * y
    elif kind == "hurdle":
        inside = (x >= start) & (x < start + spec.p("width"))
        z = np.where(inside, spec.p("height"), 0.0) + 0.0 * y
    elif kind == "discrete":
        z = _discrete_height(spec, x, y)
    return z


def _discrete_height(spec: TerrainSpec, x, y):
    bs = spec.p("block_size")
    start = spec.p("start")
    nbx = int(math.ceil((spec.half - start) / bs)) + 1
    nby = int(math.ceil(spec.extent / bs)) + 1
    rng = np.random.default_rng(spec.seed)
    table = rng.uniform(-spec.p("max_height"), spec.p("max_height"), size=(max(nbx, 1), nby))
    bi = np.clip(np.floor((x - start) / bs).astype(np.int64), 0, table.shape[0] - 1)
    bj = np.clip(np.floor((y + spec.half) / bs).astype(np.int64), 0, nby - 1)
    return np.where(x >= start, table[bi, bj], 0.0)


def analytic_height(spec: TerrainSpec, x, y):
    """Exact terrain height at terrain-local ``(x, y)``; vectorized over arrays.

    Smooth kinds return the piecewise-linear interpolant of the vertex grid
    (the same surface the mesh carries); terraced kinds return the closed-form
    step function.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lim = spec.half + _DOMAIN_TOL
    if np.any(np.abs(x) > lim) or np.any(np.abs(y) > lim):
        raise DomainError(f"query outside terrain extent [-{spec.half}, {spec.half}]^2")
    if spec.kind not in SMOOTH_KINDS:
        z = _terraced_height(spec, x, y)
        return float(z) if z.ndim == 0 else z

    n = spec.n_cells
    gx = (x + spec.half) / spec.cell
    gy = (y + spec.half) / spec.cell
    i = np.clip(np.floor(gx).astype(np.int64), 0, n - 1)
    j = np.clip(np.floor(gy).astype(np.int64), 0, n - 1)
    s, t = gx - i, gy - j
    x0 = -spec.half + i * spec.cell
    y0 = -spec.half + j * spec.cell
    x1 = -spec.half + (i + 1) * spec.cell
    y1 = -spec.half + (j + 1) * spec.cell
    z00 = _smooth_vertex_heights(spec, x0, y0)
    z10 = _smooth_vertex_heights(spec, x1, y0)
    z11 = _smooth_vertex_heights(spec, x1, y1)
    z01 = _smooth_vertex_heights(spec, x0, y1)
    lower = s >= t
    z = np.where(
        lower,
        z00 + s * (z10 - z00) + t * (z11 - z10),
        z00 + t * (z01 - z00) + s * (z11 - z01),
    )
    return float(z) if z.ndim == 0 else z


# ---------------------------------------------------------------------------
# mesh construction


def _smooth_mesh(spec: TerrainSpec) -> TriangleMesh:
    n = spec.n_cells
    coords = -spec.half + np.arange(n + 1) * spec.cell
    gx, gy = np.meshgrid(coords, coords, indexing="ij")
    z = _smooth_vertex_heights(spec, gx, gy)
    vertices = np.stack([gx, gy, z], axis=-1).reshape(-1, 3)

    idx = np.arange((n + 1) * (n + 1)).reshape(n + 1, n + 1)
    ll = idx[:-1, :-1].ravel()
    lr = idx[1:, :-1].ravel()
    ur = idx[1:, 1:].ravel()
    ul = idx[:-1, 1:].ravel()
    faces = np.empty((2 * n * n, 3), dtype=np.int64)
    faces[0::2] = np.stack([ll, lr, ur], axis=1)
    faces[1::2] = np.stack([ll, ur, ul], axis=1)
    return TriangleMesh(vertices, faces)


def _quads_to_mesh(quads: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(Q, 4, 3)`` corner arrays -> vertices and faces (0-1-2, 0-2-3 split)."""
    vertices = quads.reshape(-1, 3)
    base = 4 * np.arange(len(quads))[:, None]
    faces = np.empty((2 * len(quads), 3), dtype=np.int64)
    faces[0::2] = base + np.array([0, 1, 2])
    faces[1::2] = base + np.array([0, 2, 3])
    return vertices, faces


def _terraced_mesh(spec: TerrainSpec) -> TriangleMesh:
    n = spec.n_cells
    edges = -spec.half + np.arange(n + 1) * spec.cell
    centers = -spec.half + (np.arange(n) + 0.5) * spec.cell
    cx, cy = np.meshgrid(centers, centers, indexing="ij")
    h = _terraced_height(spec, cx, cy)

    x0, y0 = np.meshgrid(edges[:-1], edges[:-1], indexing="ij")
    x1, y1 = np.meshgrid(edges[1:], edges[1:], indexing="ij")
    tops = np.stack(
        [
            np.stack([x0, y0, h], -1),
            np.stack([x1, y0, h], -1),
            np.stack([x1, y1, h], -1),
            np.stack([x0, y1, h], -1),
        ],
        axis=2,
    ).reshape(-1, 4, 3)

    # walls on the x = const boundaries between cells (i, j) and (i + 1, j)
    ii, jj = np.nonzero(h[:-1, :] != h[1:, :])
    lo = np.minimum(h[ii, jj], h[ii + 1, jj])
    hi = np.maximum(h[ii, jj], h[ii + 1, jj])
    xw = edges[ii + 1]
    ya, yb = edges[jj], edges[jj + 1]
    walls_x = np.stack(
        [
            np.stack([xw, ya, lo], -1),
            np.stack([xw, yb, lo], -1),
            np.stack([xw, yb, hi], -1),
            np.stack([xw, ya, hi], -1),
        ],
        axis=1,
    )
    # walls on the y = const boundaries between cells (i, j) and (i, j + 1)
    ii, jj = np.nonzero(h[:, :-1] != h[:, 1:])
    lo = np.minimum(h[ii, jj], h[ii, jj + 1])
    hi = np.maximum(h[ii, jj], h[ii, jj + 1])
    yw = edges[jj + 1]
    xa, xb = edges[ii], edges[ii + 1]
    walls_y = np.stack(
        [
            np.stack([xa, yw, lo], -1),
            np.stack([xb, yw, lo], -1),
            np.stack([xb, yw, hi], -1),
            np.stack([xa, yw, hi], -1),
        ],
        axis=1,
    )
    vertices, faces = _quads_to_mesh(np.concatenate([tops, walls_x, walls_y]))
    return TriangleMesh(vertices, faces)


def build_terrain(spec: TerrainSpec) -> TriangleMesh:
    """Triangulate a terrain in terrain-local coordinates (no border offset)."""
    if spec.kind in SMOOTH_KINDS:
        return _smooth_mesh(spec)
    return _terraced_mesh(spec)


def terrain_world_mesh(spec: TerrainSpec) -> TriangleMesh:
    return apply_terrain_offset(build_terrain(spec), spec.border)


def terrain_spec_from_dict(d: Mapping[str, Any]) -> TerrainSpec:
    d = dict(d)
    try:
        kind = d.pop("kind")
    except KeyError:
        raise ConfigError("terrain section needs a 'kind'") from None
    params = d.pop("params", {}) or {}
    allowed = {"extent", "cell", "border", "seed"}
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown terrain keys: {sorted(extra)}")
    return TerrainSpec(kind=kind, params=params, **d)


def terrain_spec_to_dict(spec: TerrainSpec) -> dict[str, Any]:
    return {
        "kind": spec.kind,
        "params": dict(spec.params),
        "extent": float(spec.extent),
        "cell": float(spec.cell),
        "border": float(spec.border),
        "seed": int(spec.seed),
    }
