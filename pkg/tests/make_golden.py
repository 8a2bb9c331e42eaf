"""Regenerate the frozen corruption fixture: ``python tests/make_golden.py``.

Only rerun this after an intentional change to the rendering or noise
pipeline; the test compares against the stored arrays.
"""
from pathlib import Path

import numpy as np

from depthsim.geometry import TerrainSpec, build_terrain
from depthsim.raycast import CameraMount, PinholeIntrinsics, render_depth
from depthsim.rng import RngStream
from depthsim.sensor_noise import NoiseParams, corrupt_stages

GOLDEN = Path(__file__).parent / "data" / "golden_stairs.npz"


def golden_inputs():
    intr = PinholeIntrinsics(fx=70.0, fy=70.0, cx=60.0, cy=48.0, width=120, height=96)
    extr = CameraMount().extrinsics([0.0, 0.0, 0.9], 0.0)
    terrain = build_terrain(TerrainSpec("stairs_up", extent=4.0, cell=0.05))
    clean = render_depth(terrain, None, intr, extr)
    params = NoiseParams(margin=4, rho=0.1, lambda_e=0.4)
    return clean, params, RngStream(seed=2024, frame=3, env=1)


def main():
    clean, params, stream = golden_inputs()
    st = corrupt_stages(clean, params, stream)
    GOLDEN.parent.mkdir(exist_ok=True)
    np.savez_compressed(GOLDEN, clean=clean, mask=st.mask, output=st.output)
    print(f"wrote {GOLDEN}: {st.mask.sum()} dropped of {st.mask.size}")


if __name__ == "__main__":
    main()
