"""Command-line entry point.

Every subcommand exits 0 on success. On failure a single JSON line
``{"error": <kind>, "message": <text>}`` is written to stderr and the exit
status is nonzero (2 for usage errors, 1 otherwise).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import re
import sys
from pathlib import Path
from typing import Optional, Sequence

from depthsim import __version__
from depthsim.cli_io import formats
from depthsim.cli_io.config import FORMATS, SceneConfig, load_config, parse_toggle
from depthsim.cli_io.pipeline import cmd_dataset, cmd_eval_mae, cmd_render, format_mae_table
from depthsim.errors import DepthSimError, InvalidInputError
from depthsim.heightmap import BaseFrame, extract_heightmap
from depthsim.policy import REWARD_TERMS, RewardInputs, amp_reward, reward_terms, total_reward
from depthsim.raycast.bvh import build_bvh
from depthsim.geometry.terrain import terrain_world_mesh
from depthsim.rng import RngStream
from depthsim.sensor_noise import corrupt


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _emit_error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _scene_config(args) -> SceneConfig:
    cfg = load_config(args.config) if args.config else SceneConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "format", None) is not None:
        changes["output_format"] = args.format
    toggles = dict(cfg.toggles)
    for t in getattr(args, "toggle", None) or []:
        name, value = parse_toggle(t)
        toggles[name] = value
    changes["toggles"] = toggles
    return dataclasses.replace(cfg, **changes)


# ---------------------------------------------------------------------------
# subcommands


def _run_render(args) -> int:
    cfg = _scene_config(args)
    for p in cmd_render(cfg, args.out, parallel=args.parallel):
        print(p)
    return 0


def _run_dataset(args) -> int:
    cfg = _scene_config(args)
    manifest = cmd_dataset(cfg, args.trajectory, args.out, parallel=args.parallel)
    print(f"{len(manifest['records'])} records, config {manifest['config_hash']}")
    return 0


def _run_eval_mae(args) -> int:
    table, errors = cmd_eval_mae(args.pred, args.gt)
    for e in errors:
        _emit_error("pairing", e)
    print(format_mae_table(table))
    if args.json:
        Path(args.json).write_text(json.dumps(table, sort_keys=True, indent=2) + "\n")
    return 1 if errors else 0


def _run_heightmap(args) -> int:
    cfg = _scene_config(args)
    if args.x is None:
        base = cfg.base_for(args.env)
    else:
        base = BaseFrame((args.x, args.y, args.z), args.yaw)
    grid = extract_heightmap(build_bvh(terrain_world_mesh(cfg.terrain)), base)
    if args.out is None:
        for row in grid.values:
            print(" ".join(f"{v:.6f}" for v in row))
    elif Path(args.out).suffix == ".csv":
        formats.write_heightmap_csv(args.out, grid)
    else:
        formats.write_heightmap(args.out, grid)
    return 0


def _run_corrupt(args) -> int:
    cfg = _scene_config(args)
    depth = formats.read_pfm(args.input)
    out = corrupt(
        depth,
        cfg.noise,
        RngStream(cfg.seed, frame=args.frame, env=args.env),
        crop_resize_enabled=cfg.toggles["crop_resize"],
        noise_model=cfg.toggles["noise_model"],
    )
    out_path = Path(args.out)
    if cfg.output_format in ("pfm", "both"):
        formats.write_pfm(out_path.with_suffix(".pfm"), out)
    if cfg.output_format in ("png16", "both"):
        formats.write_png16(out_path.with_suffix(".png"), out)
    return 0


_INDEXED = ("tau", "kp", "dq", "q", "q_min", "q_max", "tau_max")
_FOOT = ("fx", "fz", "swing")


def _indexed(rec: dict, prefix: str) -> list[str]:
    pat = re.compile(rf"^{prefix}_(\d+)$")
    idx = sorted(int(m.group(1)) for k in rec if (m := pat.match(k)))
    if idx != list(range(len(idx))):
        raise InvalidInputError(f"columns {prefix}_<i> must be numbered from 0 without gaps")
    return [rec[f"{prefix}_{i}"] for i in idx]


def reward_inputs_from_row(rec: dict) -> RewardInputs:
    """Build :class:`RewardInputs` from one ``reward-eval`` CSV row."""
    try:
        f = {k: float(rec[k]) for k in ("vx_cmd", "vy_cmd", "vx_mean", "vy_mean", "vz",
                                         "wx", "wy", "gx", "gy", "a21", "a22")}
        arrays = {k: [float(v) for v in _indexed(rec, k)] for k in _INDEXED + ("fx", "fz")}
        swing = [float(v) != 0.0 for v in _indexed(rec, "swing")]
        return RewardInputs(
            vx_cmd=f["vx_cmd"], vy_cmd=f["vy_cmd"], vx_mean=f["vx_mean"], vy_mean=f["vy_mean"],
            vz=f["vz"], omega_xy=[f["wx"], f["wy"]], gravity_xy=[f["gx"], f["gy"]],
            tau=arrays["tau"], kp=arrays["kp"], dq=arrays["dq"], q=arrays["q"],
            q_min=arrays["q_min"], q_max=arrays["q_max"], tau_max=arrays["tau_max"],
            foot_fx=arrays["fx"], foot_fz=arrays["fz"], swing=swing,
            a21=f["a21"], a22=f["a22"],
            a21_prev=float(rec.get("a21_prev") or 0.0), a22_prev=float(rec.get("a22_prev") or 0.0),
        )
    except KeyError as e:
        raise InvalidInputError(f"missing column {e}") from None
    except ValueError as e:
        raise InvalidInputError(str(e)) from None


def _run_reward_eval(args) -> int:
    cfg = _scene_config(args)
    header = ["row", *REWARD_TERMS, "amp", "total"]
    out_fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out_fh, lineterminator="\n")
        writer.writerow(header)
        with open(args.input, newline="") as fh:
            for i, rec in enumerate(csv.DictReader(fh)):
                try:
                    terms = reward_terms(reward_inputs_from_row(rec), cfg.torque_norm)
                    d = rec.get("d")
                    amp = amp_reward(float(d)) if d not in (None, "") else 0.0
                except InvalidInputError as e:
                    raise InvalidInputError(f"row {i}: {e}") from None
                total = total_reward(cfg.reward_weights, terms, amp)
                writer.writerow([i, *(repr(terms[k]) for k in REWARD_TERMS), repr(amp), repr(total)])
    finally:
        if out_fh is not sys.stdout:
            out_fh.close()
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="depthsim", description="Depth rendering, corruption and heightmap tools.")
    p.add_argument("--version", action="version", version=f"depthsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_required=True, fmt=True):
        sp.add_argument("--config", help="scene config (YAML)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--toggle", action="append", metavar="STAGE=BOOL",
                        help="self_occlusion | crop_resize | noise_model; repeatable")
        sp.add_argument("--out", required=out_required)
        if fmt:
            sp.add_argument("--format", choices=FORMATS)

    sp = sub.add_parser("render", help="render clean and corrupted depth for every environment")
    common(sp)
    sp.add_argument("--parallel", action="store_true", help="multi-threaded ray casting")
    sp.set_defaults(func=_run_render)

    sp = sub.add_parser("dataset", help="render a trajectory into a dataset with manifest")
    common(sp)
    sp.add_argument("--trajectory", required=True, help="trajectory CSV")
    sp.add_argument("--parallel", action="store_true")
    sp.set_defaults(func=_run_dataset)

    sp = sub.add_parser("eval-mae", help="per-terrain heightmap MAE table")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--json", help="also write the table as JSON")
    sp.set_defaults(func=_run_eval_mae)

    sp = sub.add_parser("heightmap", help="extract the ground-truth heightmap at one base pose")
    common(sp, out_required=False, fmt=False)
    sp.add_argument("--env", type=int, default=0, help="use this environment's configured base")
    sp.add_argument("--x", type=float)
    sp.add_argument("--y", type=float, default=0.0)
    sp.add_argument("--z", type=float, default=0.0)
    sp.add_argument("--yaw", type=float, default=0.0)
    sp.set_defaults(func=_run_heightmap)

    sp = sub.add_parser("corrupt", help="apply the noise pipeline to an existing PFM")
    common(sp)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--frame", type=int, default=0)
    sp.add_argument("--env", type=int, default=0)
    sp.set_defaults(func=_run_corrupt)

    sp = sub.add_parser("reward-eval", help="evaluate reward terms for rows of a CSV")
    common(sp, out_required=False, fmt=False)
    sp.add_argument("--in", dest="input", required=True)
    sp.set_defaults(func=_run_reward_eval)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except _UsageError as e:
        _emit_error("usage", str(e))
        return 2
    except DepthSimError as e:
        _emit_error(e.kind, str(e))
        return 1
    except OSError as e:
        _emit_error("io", str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
