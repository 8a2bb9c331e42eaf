"""Depth rendering of a terrain plus optional robot geometry."""
from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from depthsim.geometry.mesh import TriangleMesh
from depthsim.raycast.bvh import Bvh, build_bvh, intersect_rays
from depthsim.raycast.camera import Extrinsics, PinholeIntrinsics, pixel_rays

NO_HIT = 0.0

Scene = Union[Bvh, TriangleMesh, None]


def _as_bvh(scene: Scene) -> Optional[Bvh]:
    if scene is None:
        return None
    if isinstance(scene, Bvh):
        return scene
    if scene.n_faces == 0:
        return None
    return build_bvh(scene)


def render_depth(
    terrain: Scene,
    robot: Scene,
    intr: PinholeIntrinsics,
    extr: Extrinsics,
    parallel: bool = False,
) -> np.ndarray:
    """Render a ``(height, width)`` depth image in metres.

    Depth is the camera-frame z of the nearest hit on terrain or robot, not
    the Euclidean ray length. Pixels whose ray hits nothing read ``0.0``.
    Passing ``robot=None`` renders without self-occlusion.
    """
    origins, dirs, _ = pixel_rays(intr, extr)
    t_best = np.full(len(origins), np.inf)
    for scene in (_as_bvh(terrain), _as_bvh(robot)):
        if scene is None:
            continue
        t, _ = intersect_rays(scene, origins, dirs, parallel=parallel)
        np.minimum(t_best, t, out=t_best)

    hit = np.isfinite(t_best)
    depth = np.zeros(len(origins))
    p_w = origins[hit] + t_best[hit, None] * dirs[hit]
    depth[hit] = p_w @ extr.rotation[2] + extr.translation[2]
    return depth.reshape(intr.height, intr.width)


def render_batch(
    terrain: Scene,
    robots: Sequence[Optional[TriangleMesh]],
    intr: PinholeIntrinsics,
    cameras: Sequence[Extrinsics],
    parallel: bool = False,
) -> list[np.ndarray]:
    """Render one image per environment; the terrain BVH is built once and shared."""
    terrain_bvh = _as_bvh(terrain)
    return [
        render_depth(terrain_bvh, robot, intr, extr, parallel=parallel)
        for robot, extr in zip(robots, cameras, strict=True)
    ]
