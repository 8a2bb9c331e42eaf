"""Pinhole camera model and per-pixel ray generation.

Camera frame follows the usual optical convention: +z along the optical axis,
+x to the right of the image, +y down. Rays are cast through integer pixel
coordinates ``(u, v)``, not pixel centres, so ``cx, cy`` should be calibrated
accordingly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from depthsim.errors import DomainError, InvalidInputError
from depthsim.geometry.transforms import yaw_matrix
from depthsim.raycast.bvh import Ray

DEFAULT_WIDTH = 600
DEFAULT_HEIGHT = 480


@dataclass(frozen=True)
class PinholeIntrinsics:
    fx: float = 350.0
    fy: float = 350.0
    cx: float = 300.0
    cy: float = 240.0
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidInputError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise InvalidInputError("image size must be positive")


@dataclass(frozen=True, eq=False)
class Extrinsics:
    """World-to-camera map ``p_c = rotation @ p_w + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.abs(r @ r.T - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise InvalidInputError("extrinsic rotation must be orthonormal with det +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_camera_pose(cls, r_wc, position) -> "Extrinsics":
        """Build from the camera's orientation and position in the world."""
        r_cw = np.asarray(r_wc, dtype=np.float64).T
        return cls(r_cw, -r_cw @ np.asarray(position, dtype=np.float64))

    @property
    def camera_center(self) -> np.ndarray:
        return self.rotation.T @ (-self.translation)


@dataclass(frozen=True)
class CameraMount:
    """Camera placement on the floating base.

    ``position`` is in the base frame (x forward, y left, z up); ``pitch`` is
    the downward tilt of the optical axis from the base's horizontal, in
    radians.
    """

    position: tuple[float, float, float] = (0.15, 0.0, 0.45)
    pitch: float = 0.9

    def base_rotation(self) -> np.ndarray:
        """Camera-to-base rotation (columns are the camera axes in base frame)."""
        c, s = np.cos(self.pitch), np.sin(self.pitch)
        z_c = np.array([c, 0.0, -s])
        x_c = np.array([0.0, -1.0, 0.0])
        y_c = np.cross(z_c, x_c)
        return np.stack([x_c, y_c, z_c], axis=1)

    def extrinsics(self, base_position, yaw: float) -> Extrinsics:
        r_wb = yaw_matrix(yaw)
        r_wc = r_wb @ self.base_rotation()
        center = np.asarray(base_position, dtype=np.float64) + r_wb @ np.asarray(self.position)
        return Extrinsics.from_camera_pose(r_wc, center)


def pixel_ray(intr: PinholeIntrinsics, extr: Extrinsics, u: float, v: float) -> Ray:
    if not (0 <= u < intr.width and 0 <= v < intr.height):
        raise DomainError(f"pixel ({u}, {v}) outside {intr.width}x{intr.height} image")
    x = (u - intr.cx) / intr.fx
    y = (v - intr.cy) / intr.fy
    d_c = np.array([x, y, 1.0])
    d_c /= np.linalg.norm(d_c)
    r_t = extr.rotation.T
    return Ray(r_t @ (-extr.translation), r_t @ d_c)


def pixel_rays(intr: PinholeIntrinsics, extr: Extrinsics):
    """Origins and unit directions for every pixel, row-major ``(H*W, 3)``.

    Also returns the camera-frame directions, which the renderer needs for
    nothing but tests find convenient.
    """
    v, u = np.meshgrid(np.arange(intr.height), np.arange(intr.width), indexing="ij")
    x = (u.ravel() - intr.cx) / intr.fx
    y = (v.ravel() - intr.cy) / intr.fy
    d_c = np.stack([x, y, np.ones_like(x)], axis=1)
    d_c /= np.linalg.norm(d_c, axis=1, keepdims=True)
    r_t = extr.rotation.T
    d_w = d_c @ r_t.T
    o_w = np.broadcast_to(r_t @ (-extr.translation), d_w.shape)
    return np.ascontiguousarray(o_w), np.ascontiguousarray(d_w), d_c
