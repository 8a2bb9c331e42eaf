"""End-to-end rendering, dataset generation and evaluation."""
from __future__ import annotations

import csv
import json
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from depthsim.cli_io import formats
from depthsim.cli_io.config import SceneConfig
from depthsim.errors import ConfigError, InvalidInputError
from depthsim.geometry.mesh import BodyPoseSet, KinematicTemplate, TriangleMesh, pose_robot
from depthsim.geometry.terrain import terrain_world_mesh
from depthsim.heightmap import BaseFrame, extract_heightmap, mae
from depthsim.raycast.bvh import Bvh, build_bvh
from depthsim.raycast.render import render_depth
from depthsim.rng import RngStream
from depthsim.sensor_noise import corrupt

MANIFEST_VERSION = 1
HISTORY = 5

_BODY_COL = re.compile(r"^b(\d+)_(qw|qx|qy|qz|tx|ty|tz)$")
_BODY_FIELDS = ("qw", "qx", "qy", "qz", "tx", "ty", "tz")


@dataclass
class Scene:
    """Config plus the objects shared by every frame."""

    config: SceneConfig
    terrain_bvh: Bvh
    template: Optional[KinematicTemplate]

    @classmethod
    def from_config(cls, cfg: SceneConfig) -> "Scene":
        return cls(cfg, build_bvh(terrain_world_mesh(cfg.terrain)), cfg.template())

    def robot_mesh(self, base: BaseFrame, body_poses: Optional[BodyPoseSet]) -> Optional[TriangleMesh]:
        if self.template is None or not self.config.toggles["self_occlusion"]:
            return None
        if body_poses is None:
            body_poses = self.config.base_relative_poses(base, self.template.n_bodies)
        return pose_robot(self.template, body_poses)

    def render_frame(self, base: BaseFrame, env: int, frame: int,
                     body_poses: Optional[BodyPoseSet] = None, parallel: bool = False):
        """Return ``(clean, corrupted)`` depth frames for one environment step."""
        cfg = self.config
        clean = render_depth(self.terrain_bvh, self.robot_mesh(base, body_poses),
                             cfg.intrinsics, cfg.camera_for(base), parallel=parallel)
        corrupted = corrupt(
            clean,
            cfg.noise,
            RngStream(cfg.seed, frame=frame, env=env),
            crop_resize_enabled=cfg.toggles["crop_resize"],
            noise_model=cfg.toggles["noise_model"],
            out_size=(cfg.intrinsics.width, cfg.intrinsics.height),
        )
        return clean, corrupted


def _write_depth(out_dir: Path, stem: str, depth: np.ndarray, fmt: str) -> dict[str, Path]:
    files = {}
    if fmt in ("pfm", "both"):
        p = out_dir / f"{stem}.pfm"
        formats.write_pfm(p, depth)
        files["pfm"] = p
    if fmt in ("png16", "both"):
        p = out_dir / f"{stem}.png"
        formats.write_png16(p, depth)
        files["png16"] = p
    return files


def _record_files(root: Path, files: dict[str, Path]) -> dict[str, dict]:
    return {
        k: {"path": p.relative_to(root).as_posix(), "sha256": formats.sha256_file(p)}
        for k, p in sorted(files.items())
    }


def cmd_render(cfg: SceneConfig, out_dir, parallel: bool = False) -> list[Path]:
    """Render frame 0 for every environment; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scene = Scene.from_config(cfg)
    written = []
    for env in range(cfg.environments):
        clean, corrupted = scene.render_frame(cfg.base_for(env), env, 0, parallel=parallel)
        env_dir = out_dir / f"env{env:03d}"
        env_dir.mkdir(exist_ok=True)
        for stem, img in (("frame00000_clean", clean), ("frame00000_depth", corrupted)):
            written += _write_depth(env_dir, stem, img, cfg.output_format).values()
    return written


# ---------------------------------------------------------------------------
# trajectories and datasets


@dataclass(frozen=True)
class TrajectoryRow:
    frame: int
    env: int
    base: BaseFrame
    body_poses: Optional[BodyPoseSet]


def read_trajectory(path) -> list[TrajectoryRow]:
    """Parse a trajectory CSV.

    Required columns: ``frame, env, x, y, z, yaw``. Optional per-body world
    poses use columns ``b<j>_qw, b<j>_qx, b<j>_qy, b<j>_qz, b<j>_tx, b<j>_ty,
    b<j>_tz`` for ``j = 0 .. N_body - 1``.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = {"frame", "env", "x", "y", "z", "yaw"} - set(cols)
        if missing:
            raise InvalidInputError(f"trajectory is missing columns {sorted(missing)}")
        bodies = sorted({int(m.group(1)) for c in cols if (m := _BODY_COL.match(c))})
        if bodies and bodies != list(range(len(bodies))):
            raise InvalidInputError("body pose columns must be numbered 0..N-1")
        for j in bodies:
            for f in _BODY_FIELDS:
                if f"b{j}_{f}" not in cols:
                    raise InvalidInputError(f"trajectory is missing column b{j}_{f}")
        rows = []
        for line, rec in enumerate(reader, start=2):
            try:
                base = BaseFrame((float(rec["x"]), float(rec["y"]), float(rec["z"])),
                                 float(rec["yaw"]))
                poses = None
                if bodies:
                    vals = np.array([[float(rec[f"b{j}_{f}"]) for f in _BODY_FIELDS]
                                     for j in bodies])
                    poses = BodyPoseSet(vals[:, :4], vals[:, 4:])
                rows.append(TrajectoryRow(int(rec["frame"]), int(rec["env"]), base, poses))
            except (TypeError, ValueError) as e:
                raise InvalidInputError(f"trajectory line {line}: {e}") from None
    keys = [(r.env, r.frame) for r in rows]
    if len(set(keys)) != len(keys):
        raise InvalidInputError("trajectory has duplicate (env, frame) rows")
    return sorted(rows, key=lambda r: (r.env, r.frame))


def _history(frames: list[int], idx: int, h: int = HISTORY) -> list[int]:
    """The ``h`` most recent frames up to ``frames[idx]``, front-padded with the earliest."""
    window = frames[max(0, idx - h + 1): idx + 1]
    return [window[0]] * (h - len(window)) + window


def cmd_dataset(cfg: SceneConfig, trajectory, out_dir, parallel: bool = False) -> dict:
    """Render clean/corrupted depth and ground-truth heightmaps for every trajectory row.

    Writes ``env<e>/frame<f>_{clean,depth}.pfm``, ``env<e>/frame<f>_height.bin``
    and ``manifest.json`` under ``out_dir``; returns the manifest.
    """
    out_dir = Path(out_dir)
    rows = read_trajectory(trajectory)
    scene = Scene.from_config(cfg)
    for r in rows:
        if not 0 <= r.env < cfg.environments:
            raise ConfigError(f"trajectory env {r.env} outside the {cfg.environments} configured")
        if r.body_poses is not None:
            if scene.template is None:
                raise ConfigError("trajectory has body poses but the config has no robot template")
            if len(r.body_poses) != scene.template.n_bodies:
                raise ConfigError(
                    f"trajectory has {len(r.body_poses)} bodies, template has {scene.template.n_bodies}"
                )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.yaml").write_text(cfg.dumps())

    frames_by_env: dict[int, list[int]] = defaultdict(list)
    for r in rows:
        frames_by_env[r.env].append(r.frame)

    records = []
    for r in rows:
        env_dir = out_dir / f"env{r.env:03d}"
        env_dir.mkdir(exist_ok=True)
        clean, corrupted = scene.render_frame(r.base, r.env, r.frame, r.body_poses, parallel)
        grid = extract_heightmap(scene.terrain_bvh, r.base)
        stem = f"frame{r.frame:05d}"
        files = {}
        for k, p in _write_depth(env_dir, f"{stem}_clean", clean, cfg.output_format).items():
            files[f"clean_{k}"] = p
        for k, p in _write_depth(env_dir, f"{stem}_depth", corrupted, cfg.output_format).items():
            files[f"depth_{k}"] = p
        files["heightmap"] = env_dir / f"{stem}_height.bin"
        formats.write_heightmap(files["heightmap"], grid)
        idx = frames_by_env[r.env].index(r.frame)
        records.append({
            "env": r.env,
            "frame": r.frame,
            "base": {"position": list(r.base.position), "yaw": r.base.yaw},
            "files": _record_files(out_dir, files),
            "history": _history(frames_by_env[r.env], idx),
        })

    manifest = {
        "format_versions": {
            "manifest": MANIFEST_VERSION,
            "depth": formats.PFM_VERSION,
            "heightmap": formats.HEIGHTMAP_VERSION,
        },
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "terrain": cfg.terrain.kind,
        "history_length": HISTORY,
        "records": records,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def verify_manifest(out_dir) -> list[str]:
    """Check that every file in ``manifest.json`` exists with its recorded checksum."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    problems = []
    for rec in manifest["records"]:
        for entry in rec["files"].values():
            p = out_dir / entry["path"]
            if not p.exists():
                problems.append(f"missing {entry['path']}")
            elif formats.sha256_file(p) != entry["sha256"]:
                problems.append(f"checksum mismatch {entry['path']}")
    return problems


# ---------------------------------------------------------------------------
# evaluation


def cmd_eval_mae(pred_dir, gt_dir) -> tuple[dict[str, dict[str, float]], list[str]]:
    """Per-terrain MAE (cm) between matching heightmap files.

    Files are paired by path relative to each root. The terrain label is the
    first directory component of that path, or ``all`` for top-level files.
    Returns ``(table, errors)``; ``table[label]`` holds ``mean``, ``std``
    (population) and ``n``.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    errors: list[str] = []
    per_label: dict[str, list[float]] = defaultdict(list)
    gt_files = {p.relative_to(gt_dir) for p in gt_dir.rglob("*.bin")}
    pred_files = {p.relative_to(pred_dir) for p in pred_dir.rglob("*.bin")}
    for rel in sorted(gt_files - pred_files):
        errors.append(f"{rel.as_posix()}: no prediction")
    for rel in sorted(pred_files - gt_files):
        errors.append(f"{rel.as_posix()}: no ground truth")
    for rel in sorted(gt_files & pred_files):
        try:
            value = mae(formats.read_heightmap(pred_dir / rel), formats.read_heightmap(gt_dir / rel))
        except InvalidInputError as e:
            errors.append(f"{rel.as_posix()}: {e}")
            continue
        label = rel.parts[0] if len(rel.parts) > 1 else "all"
        per_label[label].append(value)
    table = {
        label: {"mean": float(np.mean(v)), "std": float(np.std(v)), "n": len(v)}
        for label, v in sorted(per_label.items())
    }
    return table, errors


def format_mae_table(table: dict[str, dict[str, float]]) -> str:
    lines = [f"{'terrain':<20} {'MAE [cm]':>16} {'n':>6}"]
    for label, s in table.items():
        lines.append(f"{label:<20} {s['mean']:>8.2f} ± {s['std']:<5.2f} {s['n']:>6d}")
    return "\n".join(lines)
