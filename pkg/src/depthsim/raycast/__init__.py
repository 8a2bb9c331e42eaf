from depthsim.raycast.bvh import (
    Bvh,
    Hit,
    Ray,
    brute_force_intersect,
    brute_force_rays,
    build_bvh,
    intersect,
    intersect_rays,
)
from depthsim.raycast.camera import (
    CameraMount,
    Extrinsics,
    PinholeIntrinsics,
    pixel_ray,
    pixel_rays,
)
from depthsim.raycast.render import NO_HIT, render_batch, render_depth

__all__ = [
    "Bvh",
    "CameraMount",
    "Extrinsics",
    "Hit",
    "NO_HIT",
    "PinholeIntrinsics",
    "Ray",
    "brute_force_intersect",
    "brute_force_rays",
    "build_bvh",
    "intersect",
    "intersect_rays",
    "pixel_ray",
    "pixel_rays",
    "render_batch",
    "render_depth",
]
