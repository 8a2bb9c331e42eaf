"""Indexed triangle meshes and rigid-body posing of articulated geometry."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from depthsim.errors import InvalidInputError
from depthsim.geometry.transforms import normalize_quat, quat_to_matrix


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Triangle soup as a ``(V, 3)`` float vertex array and ``(F, 3)`` index array."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise InvalidInputError("face index out of range")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("mesh vertices must be finite")
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "faces", _frozen(f))

    @classmethod
    def empty(cls) -> "TriangleMesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        """Per-face corner coordinates, shape ``(F, 3, 3)``."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        tri = self.triangles()
        return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)

    def translated(self, offset) -> "TriangleMesh":
        return TriangleMesh(self.vertices + np.asarray(offset, dtype=np.float64), self.faces)

    def to_obj(self, path) -> None:
        """Write the mesh as ASCII Wavefront OBJ (1-based indices)."""
        lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in self.vertices]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in self.faces]
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True, eq=False)
class KinematicTemplate:
    """Canonical robot mesh: body-frame vertices, faces, and a vertex-to-body map."""

    local_vertices: np.ndarray
    faces: np.ndarray
    body_index: np.ndarray
    n_bodies: int | None = None

    def __post_init__(self):
        v = np.asarray(self.local_vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        b = np.asarray(self.body_index, dtype=np.int64).reshape(-1)
        if len(b) != len(v):
            raise InvalidInputError(
                f"body_index has {len(b)} entries for {len(v)} vertices"
            )
        n = self.n_bodies if self.n_bodies is not None else (int(b.max()) + 1 if b.size else 0)
        if b.size and (b.min() < 0 or b.max() >= n):
            raise InvalidInputError("body_index entry outside [0, n_bodies)")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise InvalidInputError("face index out of range")
        object.__setattr__(self, "local_vertices", _frozen(v))
        object.__setattr__(self, "faces", _frozen(f))
        object.__setattr__(self, "body_index", _frozen(b))
        object.__setattr__(self, "n_bodies", int(n))


@dataclass(frozen=True, eq=False)
class BodyPoseSet:
    """Per-body world poses: ``(N, 4)`` quaternions (w, x, y, z) and ``(N, 3)`` translations."""

    orientations: np.ndarray
    translations: np.ndarray

    def __post_init__(self):
        q = normalize_quat(np.asarray(self.orientations, dtype=np.float64).reshape(-1, 4))
        t = np.asarray(self.translations, dtype=np.float64).reshape(-1, 3)
        if len(q) != len(t):
            raise InvalidInputError("orientation and translation counts differ")
        object.__setattr__(self, "orientations", _frozen(q))
        object.__setattr__(self, "translations", _frozen(t))

    def __len__(self) -> int:
        return len(self.orientations)

    @classmethod
    def identity(cls, n: int) -> "BodyPoseSet":
        q = np.zeros((n, 4))
        q[:, 0] = 1.0
        return cls(q, np.zeros((n, 3)))


def pose_robot(template: KinematicTemplate, poses: BodyPoseSet) -> TriangleMesh:
    """Place every template vertex with the rigid pose of the body it belongs to."""
    if len(poses) != template.n_bodies:
        raise InvalidInputError(
            f"got {len(poses)} body poses for a template with {template.n_bodies} bodies"
        )
    rot = quat_to_matrix(poses.orientations)[template.body_index]
    world = np.einsum("kij,kj->ki", rot, template.local_vertices)
    world += poses.translations[template.body_index]
    return TriangleMesh(world, template.faces)


def merge_meshes(a: TriangleMesh, b: TriangleMesh) -> TriangleMesh:
    return TriangleMesh(
        np.concatenate([a.vertices, b.vertices]),
        np.concatenate([a.faces, b.faces + a.n_vertices]),
    )


def apply_terrain_offset(mesh: TriangleMesh, border: float) -> TriangleMesh:
    """Shift terrain vertices by ``(-border, -border, 0)`` into the world frame."""
    if border < 0:
        raise InvalidInputError("border must be non-negative")
    if border == 0:
        return mesh
    return mesh.translated([-border, -border, 0.0])


def box_mesh(center, size) -> TriangleMesh:
    """Axis-aligned box with outward-wound faces; handy for fixtures and robot parts."""
    c = np.asarray(center, dtype=np.float64)
    h = 0.5 * np.asarray(size, dtype=np.float64)
    corners = np.array(
        [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64
    )
    faces = np.array(
        [
            [0, 1, 3], [0, 3, 2],  # -x
            [4, 6, 7], [4, 7, 5],  # +x
            [0, 4, 5], [0, 5, 1],  # -y
            [2, 3, 7], [2, 7, 6],  # +y
            [0, 2, 6], [0, 6, 4],  # -z
            [1, 5, 7], [1, 7, 3],  # +z
        ]
    )
    return TriangleMesh(c + corners * h, faces)
