"""File formats, scene configuration and the command-line front end."""
from depthsim.cli_io.config import SceneConfig, load_config, loads_config, parse_toggle
from depthsim.cli_io.formats import (
    read_heightmap,
    read_pfm,
    read_png16,
    write_heightmap,
    write_pfm,
    write_png16,
)
from depthsim.cli_io.pipeline import (
    Scene,
    cmd_dataset,
    cmd_eval_mae,
    cmd_render,
    read_trajectory,
    verify_manifest,
)

__all__ = [
    "SceneConfig",
    "load_config",
    "loads_config",
    "parse_toggle",
    "read_heightmap",
    "read_pfm",
    "read_png16",
    "write_heightmap",
    "write_pfm",
    "write_png16",
    "Scene",
    "cmd_dataset",
    "cmd_eval_mae",
    "cmd_render",
    "read_trajectory",
    "verify_manifest",
]
