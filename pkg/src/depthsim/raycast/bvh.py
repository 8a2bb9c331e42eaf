"""Bounding volume hierarchy and ray-triangle intersection.

The BVH is a binary tree built by median split along the longest axis of each
node's bounds, with at most ``LEAF_SIZE`` triangles per leaf. Traversal and
construction are numba kernels; :func:`brute_force_rays` is a plain numpy
implementation of the same intersection test kept as an independent check.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numba
import numpy as np

from depthsim.errors import InvalidInputError
from depthsim.geometry.mesh import TriangleMesh

T_EPS = 1e-6  # hits closer than this to the ray origin are ignored
BARY_EPS = 1e-9  # closes pinholes along shared triangle edges
DET_EPS = 1e-15
LEAF_SIZE = 4
_STACK_SIZE = 128


class Ray(NamedTuple):
    origin: np.ndarray
    direction: np.ndarray


class Hit(NamedTuple):
    t: float
    point: np.ndarray
    face: int


# ---------------------------------------------------------------------------
# construction


@numba.njit(cache=True)
def _build_kernel(tri_min, tri_max, centroids, leaf_size):
    n = centroids.shape[0]
    max_nodes = 2 * n
    bmin = np.empty((max_nodes, 3))
    bmax = np.empty((max_nodes, 3))
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    start = np.zeros(max_nodes, dtype=np.int64)
    count = np.zeros(max_nodes, dtype=np.int64)
    order = np.arange(n)

    st_node = np.empty(max_nodes, dtype=np.int64)
    st_lo = np.empty(max_nodes, dtype=np.int64)
    st_hi = np.empty(max_nodes, dtype=np.int64)
    sp = 0
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    sp = 1
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        for a in range(3):
            mn = np.inf
            mx = -np.inf
            for k in range(lo, hi):
                f = order[k]
                if tri_min[f, a] < mn:
                    mn = tri_min[f, a]
                if tri_max[f, a] > mx:
                    mx = tri_max[f, a]
            bmin[node, a] = mn
            bmax[node, a] = mx
        if hi - lo <= leaf_size:
            start[node] = lo
            count[node] = hi - lo
            continue
        axis = 0
        ext = bmax[node, 0] - bmin[node, 0]
        for a in range(1, 3):
            e = bmax[node, a] - bmin[node, a]
            if e > ext:
                ext = e
                axis = a
        sub = order[lo:hi].copy()
        keys = np.empty(hi - lo)
        for k in range(hi - lo):
            keys[k] = centroids[sub[k], axis]
        perm = np.argsort(keys, kind="mergesort")
        for k in range(hi - lo):
            order[lo + k] = sub[perm[k]]
        mid = lo + (hi - lo) // 2
        lch = n_nodes
        rch = n_nodes + 1
        n_nodes += 2
        left[node] = lch
        right[node] = rch
        st_node[sp] = rch
        st_lo[sp] = mid
        st_hi[sp] = hi
        sp += 1
        st_node[sp] = lch
        st_lo[sp] = lo
        st_hi[sp] = mid
        sp += 1
    return (
        bmin[:n_nodes].copy(),
        bmax[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        start[:n_nodes].copy(),
        count[:n_nodes].copy(),
        order,
    )


@dataclass(frozen=True, eq=False)
class Bvh:
    mesh: TriangleMesh
    bmin: np.ndarray
    bmax: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray  # leaf slot -> original face index
    v0: np.ndarray  # per leaf slot, first corner
    e1: np.ndarray
    e2: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.left)

    def is_leaf(self, node: int) -> bool:
        return self.left[node] < 0

    def _kernel_args(self):
        return (self.bmin, self.bmax, self.left, self.right, self.start, self.count,
                self.v0, self.e1, self.e2)


def build_bvh(mesh: TriangleMesh, leaf_size: int = LEAF_SIZE) -> Bvh:
    if mesh.n_faces == 0:
        raise InvalidInputError("cannot build a BVH over an empty mesh")
    tri = mesh.triangles()
    tri_min = tri.min(axis=1)
    tri_max = tri.max(axis=1)
    centroids = tri.mean(axis=1)
    bmin, bmax, left, right, start, count, order = _build_kernel(
        tri_min, tri_max, centroids, leaf_size
    )
    # padding keeps box tests conservative w.r.t. the barycentric tolerance
    pad = 1e-8 * (1.0 + float(np.abs(tri).max()))
    bmin -= pad
    bmax += pad
    t = tri[order]
    return Bvh(
        mesh=mesh,
        bmin=bmin,
        bmax=bmax,
        left=left,
        right=right,
        start=start,
        count=count,
        order=order,
        v0=np.ascontiguousarray(t[:, 0]),
        e1=np.ascontiguousarray(t[:, 1] - t[:, 0]),
        e2=np.ascontiguousarray(t[:, 2] - t[:, 0]),
    )


# ---------------------------------------------------------------------------
# traversal


@numba.njit(cache=True, inline="always")
def _triangle_t(ox, oy, oz, dx, dy, dz, v0, e1, e2, k):
    e1x, e1y, e1z = e1[k, 0], e1[k, 1], e1[k, 2]
    e2x, e2y, e2z = e2[k, 0], e2[k, 1], e2[k, 2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < DET_EPS:
        return np.inf
    inv = 1.0 / det
    tx = ox - v0[k, 0]
    ty = oy - v0[k, 1]
    tz = oz - v0[k, 2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -BARY_EPS or u > 1.0 + BARY_EPS:
        return np.inf
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
        return np.inf
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t > T_EPS:
        return t
    return np.inf


@numba.njit(cache=True, inline="always")
def _box_entry(ox, oy, oz, dx, dy, dz, bmin, bmax, node, best):
    tnear = -np.inf
    tfar = np.inf
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    for a in range(3):
        lo = bmin[node, a]
        hi = bmax[node, a]
        if d[a] == 0.0:
            if o[a] < lo or o[a] > hi:
                return np.inf
        else:
            inv = 1.0 / d[a]
            t1 = (lo - o[a]) * inv
            t2 = (hi - o[a]) * inv
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tnear:
                tnear = t1
            if t2 < tfar:
                tfar = t2
    if tnear > tfar or tfar < T_EPS or tnear > best:
        return np.inf
    return tnear


@numba.njit(cache=True)
def _trace_one(ox, oy, oz, dx, dy, dz, bmin, bmax, left, right, start, count, v0, e1, e2):
    best = np.inf
    best_k = -1
    stack = np.empty(_STACK_SIZE, dtype=np.int64)
    if _box_entry(ox, oy, oz, dx, dy, dz, bmin, bmax, 0, best) == np.inf:
        return best, best_k
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if left[node] < 0:
            for k in range(start[node], start[node] + count[node]):
                t = _triangle_t(ox, oy, oz, dx, dy, dz, v0, e1, e2, k)
                if t < best:
                    best = t
                    best_k = k
            continue
        lch = left[node]
        rch = right[node]
        tl = _box_entry(ox, oy, oz, dx, dy, dz, bmin, bmax, lch, best)
        tr = _box_entry(ox, oy, oz, dx, dy, dz, bmin, bmax, rch, best)
        # push the farther child first so the nearer one is popped next
        if tl <= tr:
            if tr < np.inf:
                stack[sp] = rch
                sp += 1
            if tl < np.inf:
                stack[sp] = lch
                sp += 1
        else:
            if tl < np.inf:
                stack[sp] = lch
                sp += 1
            if tr < np.inf:
                stack[sp] = rch
                sp += 1
    return best, best_k


@numba.njit(cache=True)
def _trace_serial(origins, dirs, bmin, bmax, left, right, start, count, v0, e1, e2, out_t, out_k):
    for i in range(origins.shape[0]):
        t, k = _trace_one(origins[i, 0], origins[i, 1], origins[i, 2],
                          dirs[i, 0], dirs[i, 1], dirs[i, 2],
                          bmin, bmax, left, right, start, count, v0, e1, e2)
        out_t[i] = t
        out_k[i] = k


@numba.njit(cache=True, parallel=True)
def _trace_parallel(origins, dirs, bmin, bmax, left, right, start, count, v0, e1, e2, out_t, out_k):
    for i in numba.prange(origins.shape[0]):
        t, k = _trace_one(origins[i, 0], origins[i, 1], origins[i, 2],
                          dirs[i, 0], dirs[i, 1], dirs[i, 2],
                          bmin, bmax, left, right, start, count, v0, e1, e2)
        out_t[i] = t
        out_k[i] = k


def intersect_rays(bvh: Bvh, origins, directions, parallel: bool = False):
    """Nearest hit for a batch of rays.

    Returns ``(t, face)`` where ``t`` is ``inf`` and ``face`` is ``-1`` for
    rays that miss. ``face`` indexes ``bvh.mesh.faces``.
    """
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.ascontiguousarray(directions, dtype=np.float64).reshape(-1, 3)
    if origins.shape != directions.shape:
        raise InvalidInputError("origins and directions must have the same shape")
    out_t = np.empty(len(origins))
    out_k = np.empty(len(origins), dtype=np.int64)
    kernel = _trace_parallel if parallel else _trace_serial
    kernel(origins, directions, *bvh._kernel_args(), out_t, out_k)
    face = np.where(out_k >= 0, bvh.order[np.maximum(out_k, 0)], -1)
    return out_t, face


def _as_ray(ray) -> Ray:
    o = np.asarray(ray[0], dtype=np.float64)
    d = np.asarray(ray[1], dtype=np.float64)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise InvalidInputError("ray direction must be unit-norm")
    return Ray(o, d)


def intersect(bvh: Bvh, ray) -> Optional[Hit]:
    """Nearest hit of a single ray, or ``None``."""
    ray = _as_ray(ray)
    t, face = intersect_rays(bvh, ray.origin[None], ray.direction[None])
    if not np.isfinite(t[0]):
        return None
    return Hit(float(t[0]), ray.origin + t[0] * ray.direction, int(face[0]))


# ---------------------------------------------------------------------------
# brute force


def brute_force_rays(mesh: TriangleMesh, origins, directions, max_pairs: int = 1 << 21):
    """Exhaustive Moller-Trumbore over every (ray, triangle) pair, in numpy."""
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    n = len(origins)
    best_t = np.full(n, np.inf)
    best_f = np.full(n, -1, dtype=np.int64)
    if mesh.n_faces == 0 or n == 0:
        return best_t, best_f
    tri = mesh.triangles()
    v0 = tri[:, 0]
    e1 = tri[:, 1] - v0
    e2 = tri[:, 2] - v0
    chunk = max(1, max_pairs // mesh.n_faces)
    for lo in range(0, n, chunk):
        o = origins[lo:lo + chunk, None, :]
        d = directions[lo:lo + chunk, None, :]
        dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]
        e1x, e1y, e1z = e1[:, 0], e1[:, 1], e1[:, 2]
        e2x, e2y, e2z = e2[:, 0], e2[:, 1], e2[:, 2]
        px = dy * e2z - dz * e2y
        py = dz * e2x - dx * e2z
        pz = dx * e2y - dy * e2x
        det = e1x * px + e1y * py + e1z * pz
        ok = np.abs(det) >= DET_EPS
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / det
            tx = o[..., 0] - v0[:, 0]
            ty = o[..., 1] - v0[:, 1]
            tz = o[..., 2] - v0[:, 2]
            u = (tx * px + ty * py + tz * pz) * inv
            qx = ty * e1z - tz * e1y
            qy = tz * e1x - tx * e1z
            qz = tx * e1y - ty * e1x
            v = (dx * qx + dy * qy + dz * qz) * inv
            t = (e2x * qx + e2y * qy + e2z * qz) * inv
            ok &= (u >= -BARY_EPS) & (u <= 1.0 + BARY_EPS)
            ok &= (v >= -BARY_EPS) & (u + v <= 1.0 + BARY_EPS)
            ok &= t > T_EPS
        t = np.where(ok, t, np.inf)
        idx = np.argmin(t, axis=1)
        tmin = t[np.arange(len(t)), idx]
        best_t[lo:lo + chunk] = tmin
        best_f[lo:lo + chunk] = np.where(np.isfinite(tmin), idx, -1)
    return best_t, best_f


def brute_force_intersect(mesh: TriangleMesh, ray) -> Optional[Hit]:
    ray = _as_ray(ray)
    t, face = brute_force_rays(mesh, ray.origin[None], ray.direction[None])
    if not np.isfinite(t[0]):
        return None
    return Hit(float(t[0]), ray.origin + t[0] * ray.direction, int(face[0]))
