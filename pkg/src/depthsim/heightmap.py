"""Base-relative ground-truth heightmaps and reconstruction metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from depthsim.errors import ConfigError, InvalidInputError
from depthsim.geometry.mesh import TriangleMesh
from depthsim.geometry.terrain import TerrainSpec, terrain_world_mesh
from depthsim.geometry.transforms import yaw_matrix
from depthsim.raycast.bvh import Bvh, build_bvh, intersect_rays

ROWS = 20
COLS = 20
CELL = 0.05


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    return math.pi if a == -math.pi else a


@dataclass(frozen=True)
class BaseFrame:
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    yaw: float = 0.0

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3:
            raise InvalidInputError("base position needs three coordinates")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))


@dataclass(frozen=True)
class GridLayout:
    """Placement of the sample grid in the base frame.

    Row ``i`` sits at forward distance ``origin[0] + i * cell``; column ``j``
    at lateral offset ``origin[1] + j * cell`` (positive to the left).
    """

    rows: int = ROWS
    cols: int = COLS
    cell: float = CELL
    origin: tuple[float, float] = (0.5 * CELL, -0.5 + 0.5 * CELL)

    def base_points(self) -> np.ndarray:
        fwd = self.origin[0] + np.arange(self.rows) * self.cell
        lat = self.origin[1] + np.arange(self.cols) * self.cell
        f, l = np.meshgrid(fwd, lat, indexing="ij")
        return np.stack([f, l], axis=-1)


DEFAULT_LAYOUT = GridLayout()


@dataclass(frozen=True, eq=False)
class HeightmapGrid:
    values: np.ndarray
    cell: float = CELL
    origin: tuple[float, float] = DEFAULT_LAYOUT.origin
    base: BaseFrame = field(default_factory=BaseFrame)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise InvalidInputError("heightmap values must be a 2-D grid")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("heightmap values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def layout(self) -> GridLayout:
        return GridLayout(self.shape[0], self.shape[1], self.cell, tuple(self.origin))


def sample_points_world(base: BaseFrame, layout: GridLayout = DEFAULT_LAYOUT) -> np.ndarray:
    """World ``(x, y)`` of every cell centre, shape ``(rows, cols, 2)``."""
    rot = yaw_matrix(base.yaw)[:2, :2]
    return base.position[:2] + layout.base_points() @ rot.T


def extract_heightmap(
    terrain: Union[TerrainSpec, TriangleMesh, Bvh],
    base: BaseFrame,
    layout: GridLayout = DEFAULT_LAYOUT,
) -> HeightmapGrid:
    """Sample the terrain under each grid cell centre, relative to the base height.

    A ray is cast straight down from above the highest vertex; the first hit
    is the top-most surface at that point.
    """
    if isinstance(terrain, TerrainSpec):
        terrain = terrain_world_mesh(terrain)
    bvh = terrain if isinstance(terrain, Bvh) else build_bvh(terrain)

    xy = sample_points_world(base, layout).reshape(-1, 2)
    top = float(bvh.mesh.vertices[:, 2].max()) + 1.0
    origins = np.column_stack([xy, np.full(len(xy), top)])
    dirs = np.tile([0.0, 0.0, -1.0], (len(xy), 1))
    t, _ = intersect_rays(bvh, origins, dirs)
    if not np.all(np.isfinite(t)):
        missing = int((~np.isfinite(t)).sum())
        raise ConfigError(f"{missing} heightmap cells have no terrain beneath them")
    z = origins[:, 2] + t * dirs[:, 2]
    values = (z - base.position[2]).reshape(layout.rows, layout.cols)
    return HeightmapGrid(values, layout.cell, tuple(layout.origin), base)


def _values(g) -> np.ndarray:
    return g.values if isinstance(g, HeightmapGrid) else np.asarray(g, dtype=np.float64)


def _aligned(*grids) -> list[np.ndarray]:
    arrays = [_values(g) for g in grids]
    if any(a.shape != arrays[0].shape for a in arrays):
        raise InvalidInputError(f"heightmap shapes differ: {[a.shape for a in arrays]}")
    return arrays


def mae(pred, gt) -> float:
    """Mean absolute error in centimetres."""
    p, g = _aligned(pred, gt)
    return float(np.mean(np.abs(p - g)) * 100.0)


def recon_loss(rough, refined, gt) -> tuple[float, float, float]:
    """Two-stage reconstruction loss: MSE on the rough map plus L1 on the refined map.

    Both terms are means over cells. Returns ``(mse, l1, mse + l1)``.
    """
    r, f, g = _aligned(rough, refined, gt)
    mse = float(np.mean(np.square(r - g)))
    l1 = float(np.mean(np.abs(f - g)))
    return mse, l1, mse + l1
