"""Scene configuration files.

Configs are YAML mappings. Every key is optional; omitted keys take the
defaults shown here::

    seed: 0                  # master seed for the noise streams
    environments: 1          # number of parallel environments B
    terrain:
      kind: flat             # flat | rough_slope_up | rough_slope_down | stairs_up
                             # | stairs_down | gap | high_plane | discrete | hurdle
      params: {}             # kind-specific, see depthsim.geometry.terrain
      extent: 8.0
      cell: 0.05
      border: 0.0
      seed: 0                # terrain randomness, independent of the master seed
    camera:
      intrinsics: {fx: 350.0, fy: 350.0, cx: 300.0, cy: 240.0, width: 600, height: 480}
      mount: {position: [0.15, 0.0, 0.45], pitch: 0.9}
      extrinsics: null       # or {rotation: 3x3 list, translation: [x, y, z]};
                             # a fixed world-to-camera map that overrides the mount
    base:                    # base pose per environment for `render`
      - {position: [0.0, 0.0, 0.9], yaw: 0.0}
    robot:
      template: null         # path to a template file, relative to the config file
      poses: []              # per body [qw, qx, qy, qz, tx, ty, tz] in the base frame
    noise: {...}             # NoiseParams fields
    pipeline: {self_occlusion: true, crop_resize: true, noise_model: true}
    output: {format: pfm}    # pfm | png16 | both
    rewards: {weights: {...}, torque_norm: l1}

The canonical form is the fully-populated mapping serialised as JSON with
sorted keys and no whitespace; its 64-bit FNV-1a digest is the config hash.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np
import yaml

from depthsim.errors import ConfigError
from depthsim.geometry.mesh import BodyPoseSet, KinematicTemplate
from depthsim.geometry.terrain import TerrainSpec, terrain_spec_from_dict, terrain_spec_to_dict
from depthsim.geometry.transforms import quat_from_axis_angle, quat_multiply, yaw_matrix
from depthsim.heightmap import BaseFrame
from depthsim.policy import DEFAULT_REWARD_WEIGHTS
from depthsim.raycast.camera import CameraMount, Extrinsics, PinholeIntrinsics
from depthsim.sensor_noise import NoiseParams

TOGGLES = ("self_occlusion", "crop_resize", "noise_model")
FORMATS = ("pfm", "png16", "both")

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass
class SceneConfig:
    terrain: TerrainSpec = field(default_factory=lambda: TerrainSpec("flat"))
    intrinsics: PinholeIntrinsics = field(default_factory=PinholeIntrinsics)
    mount: CameraMount = field(default_factory=CameraMount)
    extrinsics: Optional[Extrinsics] = None
    bases: list[BaseFrame] = field(default_factory=lambda: [BaseFrame((0.0, 0.0, 0.9), 0.0)])
    template_path: Optional[str] = None
    robot_poses: Optional[np.ndarray] = None
    noise: NoiseParams = field(default_factory=NoiseParams)
    toggles: dict[str, bool] = field(default_factory=lambda: {t: True for t in TOGGLES})
    environments: int = 1
    seed: int = 0
    output_format: str = "pfm"
    reward_weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_REWARD_WEIGHTS))
    torque_norm: str = "l1"
    base_dir: Path = field(default_factory=Path.cwd, compare=False)

    def __post_init__(self):
        if self.environments < 1:
            raise ConfigError("environments must be >= 1")
        if self.output_format not in FORMATS:
            raise ConfigError(f"output format must be one of {FORMATS}")
        unknown = set(self.toggles) - set(TOGGLES)
        if unknown:
            raise ConfigError(f"unknown pipeline toggles: {sorted(unknown)}")
        self.toggles = {t: bool(self.toggles.get(t, True)) for t in TOGGLES}
        if len(self.bases) not in (1, self.environments):
            raise ConfigError("give one base pose or one per environment")

    # -- derived objects ----------------------------------------------------

    def base_for(self, env: int) -> BaseFrame:
        return self.bases[env] if len(self.bases) > 1 else self.bases[0]

    def camera_for(self, base: BaseFrame) -> Extrinsics:
        if self.extrinsics is not None:
            return self.extrinsics
        return self.mount.extrinsics(base.position, base.yaw)

    def template(self) -> Optional[KinematicTemplate]:
        if self.template_path is None:
            return None
        from depthsim.cli_io.formats import load_template

        path = self.base_dir / self.template_path
        if not path.exists():
            raise ConfigError(f"robot template {path} does not exist")
        return load_template(path)

    def base_relative_poses(self, base: BaseFrame, n_bodies: int) -> BodyPoseSet:
        """Compose the configured base-frame body poses with a base pose."""
        if self.robot_poses is None or len(self.robot_poses) == 0:
            rel = BodyPoseSet.identity(n_bodies)
        else:
            rel = BodyPoseSet(self.robot_poses[:, :4], self.robot_poses[:, 4:])
        if len(rel) != n_bodies:
            raise ConfigError(f"robot.poses has {len(rel)} bodies, template has {n_bodies}")
        q_yaw = quat_from_axis_angle([0.0, 0.0, 1.0], base.yaw)
        q = quat_multiply(np.broadcast_to(q_yaw, rel.orientations.shape), rel.orientations)
        t = np.asarray(base.position) + rel.translations @ yaw_matrix(base.yaw).T
        return BodyPoseSet(q, t)

    # -- (de)serialisation ----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        intr = self.intrinsics
        return {
            "seed": int(self.seed),
            "environments": int(self.environments),
            "terrain": terrain_spec_to_dict(self.terrain),
            "camera": {
                "intrinsics": {"fx": float(intr.fx), "fy": float(intr.fy), "cx": float(intr.cx),
                               "cy": float(intr.cy), "width": int(intr.width),
                               "height": int(intr.height)},
                "mount": {"position": [float(v) for v in self.mount.position],
                          "pitch": float(self.mount.pitch)},
                "extrinsics": None if self.extrinsics is None else {
                    "rotation": self.extrinsics.rotation.tolist(),
                    "translation": self.extrinsics.translation.tolist(),
                },
            },
            "base": [{"position": list(b.position), "yaw": b.yaw} for b in self.bases],
            "robot": {
                "template": self.template_path,
                "poses": [] if self.robot_poses is None else self.robot_poses.tolist(),
            },
            "noise": {k: (int(v) if k == "margin" else float(v))
                      for k, v in self.noise.to_dict().items()},
            "pipeline": dict(self.toggles),
            "output": {"format": self.output_format},
            "rewards": {"weights": dict(sorted(self.reward_weights.items())),
                        "torque_norm": self.torque_norm},
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base_dir: Optional[Path] = None) -> "SceneConfig":
        d = copy.deepcopy(dict(d or {}))
        known = {"seed", "environments", "terrain", "camera", "base", "robot", "noise",
                 "pipeline", "output", "rewards"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config sections: {sorted(extra)}")
        try:
            cam = d.get("camera") or {}
            intr = PinholeIntrinsics(**(cam.get("intrinsics") or {}))
            mount_d = cam.get("mount") or {}
            mount = CameraMount(
                position=tuple(float(v) for v in mount_d.get("position", CameraMount.position)),
                pitch=float(mount_d.get("pitch", CameraMount.pitch)),
            )
            ext_d = cam.get("extrinsics")
            extr = None if ext_d is None else Extrinsics(ext_d["rotation"], ext_d["translation"])
            bases_d = d.get("base")
            if bases_d is None:
                bases = [BaseFrame((0.0, 0.0, 0.9), 0.0)]
            else:
                if isinstance(bases_d, Mapping):
                    bases_d = [bases_d]
                bases = [BaseFrame(tuple(b.get("position", (0.0, 0.0, 0.9))), b.get("yaw", 0.0))
                         for b in bases_d]
            robot = d.get("robot") or {}
            poses = robot.get("poses") or []
            poses = np.asarray(poses, dtype=np.float64).reshape(-1, 7) if len(poses) else None
            rewards = d.get("rewards") or {}
            weights = dict(DEFAULT_REWARD_WEIGHTS)
            weights.update({k: float(v) for k, v in (rewards.get("weights") or {}).items()})
            cfg = cls(
                terrain=terrain_spec_from_dict(d.get("terrain") or {"kind": "flat"}),
                intrinsics=intr,
                mount=mount,
                extrinsics=extr,
                bases=bases,
                template_path=robot.get("template"),
                robot_poses=poses,
                noise=NoiseParams.from_dict(d.get("noise") or {}),
                toggles=dict(d.get("pipeline") or {}),
                environments=int(d.get("environments", 1)),
                seed=int(d.get("seed", 0)),
                output_format=(d.get("output") or {}).get("format", "pfm"),
                reward_weights=weights,
                torque_norm=rewards.get("torque_norm", "l1"),
                base_dir=base_dir or Path.cwd(),
            )
        except (TypeError, KeyError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"invalid config: {e}") from e
        return cfg

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()

    def config_hash(self) -> str:
        return f"{fnv1a64(self.canonical_bytes()):016x}"

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def load_config(path) -> SceneConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}") from e
    if data is not None and not isinstance(data, Mapping):
        raise ConfigError("config root must be a mapping")
    cfg = SceneConfig.from_dict(data or {}, base_dir=path.parent.resolve())
    cfg.template()  # fail early on missing template files
    return cfg


def loads_config(text: str, base_dir: Optional[Path] = None) -> SceneConfig:
    return SceneConfig.from_dict(yaml.safe_load(text) or {}, base_dir=base_dir)


def parse_toggle(arg: str) -> tuple[str, bool]:
    """Parse ``stage=bool`` as given to ``--toggle``."""
    name, sep, value = arg.partition("=")
    if not sep or name not in TOGGLES:
        raise ConfigError(f"--toggle expects <stage>=<bool> with stage in {TOGGLES}, got {arg!r}")
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return name, True
    if v in ("0", "false", "no", "off"):
        return name, False
    raise ConfigError(f"--toggle value must be a boolean, got {value!r}")
