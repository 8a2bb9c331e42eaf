"""On-disk formats.

PFM depth
    ``Pf\\n<width> <height>\\n-1.0\\n`` followed by little-endian float32
    samples, rows stored bottom-to-top as the PFM convention requires.

PNG16 depth
    16-bit grayscale PNG in millimetres; depths above 65.535 m saturate.

Heightmap binary (version 1)
    Eight little-endian float32 header values
    ``rows, cols, cell, origin_forward, origin_lateral, base_x, base_y, base_yaw``
    followed by ``rows * cols`` float32 heights in row-major order.

Robot template
    JSON object with ``local_vertices`` (list of xyz), ``faces`` (list of
    index triples), ``body_index`` (per-vertex int) and optional ``n_bodies``;
    a ``.npz`` archive with the same keys is also accepted.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
from PIL import Image

from depthsim.errors import InvalidInputError
from depthsim.geometry.mesh import KinematicTemplate
from depthsim.heightmap import BaseFrame, HeightmapGrid

HEIGHTMAP_HEADER = 8
HEIGHTMAP_VERSION = 1
PFM_VERSION = "Pf-le-1"


def write_pfm(path, depth: np.ndarray) -> None:
    depth = np.asarray(depth)
    if depth.ndim != 2:
        raise InvalidInputError("only single-channel PFM is supported")
    h, w = depth.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    body = np.flipud(depth).astype("<f4").tobytes()
    Path(path).write_bytes(header + body)


def read_pfm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0].strip() != b"Pf":
        raise InvalidInputError(f"{path}: not a grayscale PFM file")
    try:
        w, h = (int(x) for x in parts[1].split())
        scale = float(parts[2])
    except ValueError:
        raise InvalidInputError(f"{path}: malformed PFM header") from None
    dtype = "<f4" if scale < 0 else ">f4"
    body = np.frombuffer(parts[3], dtype=dtype)
    if body.size != w * h:
        raise InvalidInputError(f"{path}: expected {w * h} samples, found {body.size}")
    return np.flipud(body.reshape(h, w)).astype(np.float64)


def write_png16(path, depth: np.ndarray) -> None:
    mm = np.clip(np.rint(np.asarray(depth) * 1000.0), 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(path, format="PNG")


def read_png16(path) -> np.ndarray:
    return np.asarray(Image.open(path), dtype=np.float64) / 1000.0


def write_heightmap(path, grid: HeightmapGrid) -> None:
    rows, cols = grid.shape
    header = np.array(
        [rows, cols, grid.cell, grid.origin[0], grid.origin[1],
         grid.base.position[0], grid.base.position[1], grid.base.yaw],
        dtype="<f4",
    )
    Path(path).write_bytes(header.tobytes() + grid.values.astype("<f4").tobytes())


def read_heightmap(path) -> HeightmapGrid:
    raw = np.frombuffer(Path(path).read_bytes(), dtype="<f4")
    if raw.size < HEIGHTMAP_HEADER:
        raise InvalidInputError(f"{path}: truncated heightmap header")
    rows, cols, cell, o_f, o_l, bx, by, yaw = (float(v) for v in raw[:HEIGHTMAP_HEADER])
    rows, cols = int(rows), int(cols)
    values = raw[HEIGHTMAP_HEADER:]
    if values.size != rows * cols:
        raise InvalidInputError(f"{path}: expected {rows * cols} heights, found {values.size}")
    return HeightmapGrid(
        values.reshape(rows, cols).astype(np.float64),
        cell=cell,
        origin=(o_f, o_l),
        base=BaseFrame((bx, by, 0.0), yaw),
    )


def write_heightmap_csv(path, grid: HeightmapGrid) -> None:
    np.savetxt(path, grid.values, delimiter=",", fmt="%.9g")


def load_template(path) -> KinematicTemplate:
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as z:
            d = {k: z[k] for k in z.files}
    else:
        d = json.loads(path.read_text())
    try:
        n = d.get("n_bodies")
        return KinematicTemplate(
            d["local_vertices"], d["faces"], d["body_index"],
            None if n is None else int(np.asarray(n)),
        )
    except KeyError as e:
        raise InvalidInputError(f"{path}: template is missing {e}") from None


def save_template(path, template: KinematicTemplate) -> None:
    Path(path).write_text(json.dumps({
        "local_vertices": template.local_vertices.tolist(),
        "faces": template.faces.tolist(),
        "body_index": template.body_index.tolist(),
        "n_bodies": template.n_bodies,
    }))


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
