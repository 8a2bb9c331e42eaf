from depthsim.geometry.mesh import (
    BodyPoseSet,
    KinematicTemplate,
    TriangleMesh,
    apply_terrain_offset,
    box_mesh,
    merge_meshes,
    pose_robot,
)
from depthsim.geometry.terrain import (
    TERRAIN_KINDS,
    TerrainSpec,
    analytic_height,
    build_terrain,
    terrain_world_mesh,
)
from depthsim.geometry.transforms import (
    normalize_quat,
    quat_from_axis_angle,
    quat_multiply,
    quat_rotate,
    quat_to_matrix,
)

__all__ = [
    "BodyPoseSet",
    "KinematicTemplate",
    "TERRAIN_KINDS",
    "TerrainSpec",
    "TriangleMesh",
    "analytic_height",
    "apply_terrain_offset",
    "box_mesh",
    "build_terrain",
    "merge_meshes",
    "normalize_quat",
    "pose_robot",
    "quat_from_axis_angle",
    "quat_multiply",
    "quat_rotate",
    "quat_to_matrix",
    "terrain_world_mesh",
]
