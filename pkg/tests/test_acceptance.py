"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -s`` to read the report inline; the
lines are also written through the terminal when output is captured.
"""
import math
import time

import numpy as np
import pytest
import yaml
from scipy import stats

from conftest import random_rays, random_soup
from depthsim.cli_io import formats
from depthsim.cli_io.config import load_config
from depthsim.cli_io.pipeline import Scene, cmd_dataset
from depthsim.geometry import KinematicTemplate, TerrainSpec, TriangleMesh, analytic_height, box_mesh
from depthsim.geometry.terrain import terrain_world_mesh
from depthsim.heightmap import DEFAULT_LAYOUT, BaseFrame, extract_heightmap, mae, recon_loss
from depthsim.policy import (
    REWARD_TERMS,
    GaitClock,
    amp_reward,
    blend_actions,
    reward_terms,
    update_phase,
)
from depthsim.raycast import (
    CameraMount,
    Extrinsics,
    PinholeIntrinsics,
    brute_force_rays,
    build_bvh,
    intersect_rays,
    render_depth,
)
from depthsim.rng import RngStream
from depthsim.sensor_noise import NoiseParams, add_axial_noise, axial_sigma, corrupt_stages, edge_set
from test_policy import oracle_terms, random_inputs


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
        assert ok, detail
    return emit


def look_down(height):
    return Extrinsics.from_camera_pose(np.diag([1.0, -1.0, -1.0]), [0.0, 0.0, height])


def big_plane(z=0.0, half=60.0):
    v = np.array([[-half, -half, z], [half, -half, z], [half, half, z], [-half, half, z]])
    return TriangleMesh(v, np.array([[0, 1, 2], [0, 2, 3]]))


# ---------------------------------------------------------------------------


def test_c01_bvh_matches_brute_force(report):
    r = np.random.default_rng(101)
    start = time.perf_counter()
    worst, mismatched, hits, total = 0.0, 0, 0, 0
    for m in range(20):
        mesh = random_soup(r, int(r.integers(1, 501)))
        origins, dirs = random_rays(r, 10_000)
        bvh = build_bvh(mesh)
        t_bvh, _ = intersect_rays(bvh, origins, dirs)
        t_ref, _ = brute_force_rays(mesh, origins, dirs)
        hit_b, hit_r = np.isfinite(t_bvh), np.isfinite(t_ref)
        mismatched += int(np.count_nonzero(hit_b != hit_r))
        both = hit_b & hit_r
        if both.any():
            worst = max(worst, float(np.abs(t_bvh[both] - t_ref[both]).max()))
        hits += int(both.sum())
        total += len(origins)
    elapsed = time.perf_counter() - start
    ok = mismatched == 0 and worst <= 1e-9 and elapsed < 60.0 and hits > 0
    report(1, ok, f"20 meshes x 1e4 rays, {hits}/{total} hits, hit mismatches={mismatched}, "
                  f"max |dt|={worst:.2e}, {elapsed:.1f}s")


def test_c02_analytic_plane_depth(report):
    intr = PinholeIntrinsics(fx=350.0, fy=350.0, cx=300.0, cy=240.0, width=600, height=480)
    plane = build_bvh(big_plane())
    render_depth(plane, None, intr, look_down(1.0))  # warm the kernels
    results = []
    start = time.perf_counter()
    for d in (0.5, 2.0, 5.0):
        depth = render_depth(plane, None, intr, look_down(d))
        hit = depth > 0
        err = float(np.abs(depth[hit] - d).max()) if hit.any() else math.inf
        results.append((d, int(hit.sum()), err))
    elapsed = time.perf_counter() - start
    ok = all(n == 600 * 480 and e < 1e-6 for _, n, e in results) and elapsed < 10.0
    detail = ", ".join(f"d={d}: {n} hit px max|z-d|={e:.1e}" for d, n, e in results)
    report(2, ok, f"600x480 {detail}, {elapsed:.2f}s")


def test_c03_self_occlusion(report, tmp_path):
    slab = box_mesh([0.35, 0.0, 0.25], [0.3, 0.4, 0.03])  # base frame, below the camera
    formats.save_template(tmp_path / "slab.json",
                          KinematicTemplate(slab.vertices, slab.faces, np.zeros(8, int)))
    cfg = {"seed": 3, "terrain": {"kind": "stairs_up", "extent": 4.0},
           "base": {"position": [0.0, 0.0, 0.9], "yaw": 0.2},
           "robot": {"template": "slab.json"}}
    (tmp_path / "on.yaml").write_text(yaml.safe_dump(cfg))
    (tmp_path / "off.yaml").write_text(yaml.safe_dump({**cfg, "pipeline": {"self_occlusion": False}}))
    base = BaseFrame((0.0, 0.0, 0.9), 0.2)
    on = Scene.from_config(load_config(tmp_path / "on.yaml"))
    off = Scene.from_config(load_config(tmp_path / "off.yaml"))

    with_robot, _ = on.render_frame(base, 0, 0)
    terrain_only = render_depth(on.terrain_bvh, None, on.config.intrinsics, on.config.camera_for(base))
    robot_alone = render_depth(None, on.robot_mesh(base, None), on.config.intrinsics,
                               on.config.camera_for(base))
    covered = robot_alone > 0
    decreased = bool(np.all(with_robot[covered] < terrain_only[covered]))
    untouched = bool(np.array_equal(with_robot[~covered], terrain_only[~covered]))
    toggled, _ = off.render_frame(base, 0, 0)
    restored = toggled.tobytes() == terrain_only.tobytes()
    ok = covered.sum() > 1000 and decreased and untouched and restored
    report(3, ok, f"{int(covered.sum())} covered px all strictly closer={decreased}, "
                  f"others unchanged={untouched}, toggle off bit-exact={restored}")


def test_c04_axial_noise_statistics(report):
    params = NoiseParams(a=0.01, b=0.0, c=0.0)
    depth = np.full((1000, 1000), 2.0)
    sigma = axial_sigma(depth, params)
    assert np.all(sigma == 0.01)
    noisy = add_axial_noise(depth, sigma, RngStream(seed=7, frame=0, env=0))
    resid = (noisy - depth).ravel()
    std = float(resid.std())
    p = float(stats.kstest(resid, "norm", args=(0.0, 0.01)).pvalue)
    ok = 0.0097 <= std <= 0.0103 and p > 0.01
    report(4, ok, f"1e6 px sigma_z=0.01: sample std={std:.5f}, KS p={p:.3f}")


def test_c05_dropout_bounds(report):
    h, w = 400, 400
    depth = np.ones((h, w))
    depth[:, 3 * w // 4:] = 3.0  # one quarter sits at the maximum sigma
    params = NoiseParams(a=0.0, b=1.0, c=0.0, alpha=0.0, w=1.0, rho=0.2, lambda_e=0.0,
                         z_min=0.2, z_max=5.0)
    st = corrupt_stages(depth, params, RngStream(seed=5, frame=0, env=0), crop_resize_enabled=False)
    valid = depth > 0
    rate = float(st.mask[valid].mean())
    top = st.sigma_tot == st.sigma_tot[valid].max()
    n_top = int(top.sum())
    top_rate = float(st.mask[top].mean())
    band = 3.0 * math.sqrt(0.2 * 0.8 / n_top)
    part1 = rate <= 0.2 and abs(top_rate - 0.2) <= band

    step = np.ones((200, 200))
    step[:, 100:] = 2.0
    edge_params = NoiseParams(a=0.001, b=0.0, c=0.0, alpha=0.0, rho=0.0, lambda_e=0.5)
    se = corrupt_stages(step, edge_params, RngStream(seed=9, frame=0, env=0),
                        crop_resize_enabled=False)
    e = edge_set(se.grad, edge_params.edge_percentile, se.noisy > 0)
    dropped = int(se.mask.sum())
    inside = int((se.mask & e).sum())
    part2 = dropped > 0 and inside == dropped
    report(5, part1 and part2,
           f"rho=0.2: drop rate={rate:.4f} <= 0.2, max-sigma rate={top_rate:.4f} "
           f"(0.2 +/- {band:.4f}, n={n_top}); rho=0 lambda_e=0.5: {inside}/{dropped} drops in E")


def test_c06_heightmap_oracle(report):
    worst = 0.0
    r = np.random.default_rng(606)
    shapes = set()
    for kind in ("stairs_up", "stairs_down", "gap", "high_plane", "discrete"):
        spec = TerrainSpec(kind, extent=4.0, seed=4)
        bvh = build_bvh(terrain_world_mesh(spec))
        for _ in range(5):
            base = BaseFrame((r.uniform(-0.8, 0.0), r.uniform(-0.8, 0.8), r.uniform(0.4, 1.0)),
                             r.uniform(-math.pi, math.pi))
            got = extract_heightmap(bvh, base).values
            shapes.add(got.shape)
            c, s = math.cos(base.yaw), math.sin(base.yaw)
            for i in range(20):
                for j in range(20):
                    f, l = 0.025 + 0.05 * i, -0.475 + 0.05 * j
                    x = base.position[0] + c * f - s * l + spec.border
                    y = base.position[1] + s * f + c * l + spec.border
                    worst = max(worst, abs(got[i, j] - (analytic_height(spec, x, y) - base.position[2])))
    lay = DEFAULT_LAYOUT
    geom = (lay.rows, lay.cols, lay.cell) == (20, 20, 0.05) and \
        math.isclose(lay.rows * lay.cell, 1.0) and math.isclose(lay.cols * lay.cell, 1.0)
    ok = worst <= 1e-6 and shapes == {(20, 20)} and geom
    report(6, ok, f"5 kinds x 5 poses x 400 cells: max |h - analytic|={worst:.1e}, "
                  f"grid {lay.rows}x{lay.cols} @ {lay.cell} m = {lay.rows * lay.cell:.2f} m square")


def test_c07_policy_closed_forms(report):
    r = np.random.default_rng(707)
    convex = True
    for _ in range(10_000):
        a, b = r.normal(scale=10, size=20), r.normal(scale=10, size=20)
        alpha = r.uniform()
        out = blend_actions(a, b, alpha)
        convex &= bool(np.all(out >= np.minimum(a, b)) and np.all(out <= np.maximum(a, b)))
    clock = GaitClock(phi=0.3, phase_bounds=(-0.05, 0.08), dphi_cmd=0.1)
    hi = update_phase(clock, 5.0)[1]
    lo = update_phase(clock, -5.0)[1]
    saturates = hi == pytest.approx(0.18, abs=1e-15) and lo == pytest.approx(0.05, abs=1e-15)
    amp = [amp_reward(d) for d in (-1.0, 0.0, 1.0, 3.0)]
    amp_ok = amp == [0.0, 0.75, 1.0, 0.0]
    worst = 0.0
    for _ in range(1000):
        x = random_inputs(r)
        got, want = reward_terms(x), oracle_terms(x)
        for name in REWARD_TERMS:
            worst = max(worst, abs(got[name] - want[name]) / max(1.0, abs(want[name])))
    ok = convex and saturates and amp_ok and worst <= 1e-9
    report(7, ok, f"convexity 1e4={convex}, phase saturation={saturates} ({lo:.2f}, {hi:.2f}), "
                  f"amp={amp}, 14 terms x 1e3 max rel err={worst:.1e}")


def test_c08_metric_fidelity(report):
    r = np.random.default_rng(808)
    worst = 0.0
    for _ in range(100):
        p, g, f = (r.normal(size=(20, 20)) for _ in range(3))
        brute = 100.0 * sum(abs(a - b) for a, b in zip(p.ravel(), g.ravel())) / 400
        worst = max(worst, abs(mae(p, g) - brute))
        sq = sum((a - b) ** 2 for a, b in zip(p.ravel(), g.ravel())) / 400
        ab = sum(abs(a - b) for a, b in zip(f.ravel(), g.ravel())) / 400
        mse, l1, total = recon_loss(p, f, g)
        worst = max(worst, abs(mse - sq), abs(l1 - ab), abs(total - sq - ab))
    g = r.uniform(-1, 1, (20, 20))
    m = mae(g + 0.05, g)
    rl = recon_loss(g + 0.1, g, g)
    fixtures = f"{m:.2f}" == "5.00" and abs(m - 5.0) <= 1e-12 and \
        all(abs(a - b) <= 1e-12 for a, b in zip(rl, (0.01, 0.0, 0.01)))
    ok = worst <= 1e-12 and fixtures
    report(8, ok, f"max |metric - brute|={worst:.1e}; offset 0.05 m -> {m:.2f} cm; "
                  f"recon -> ({rl[0]:.2f}, {rl[1]:.0f}, {rl[2]:.2f})")


def test_c09_end_to_end_determinism(report, tmp_path):
    cfg = {"seed": 21, "environments": 2, "terrain": {"kind": "discrete", "extent": 4.0, "seed": 1},
           "base": [{"position": [0.0, 0.0, 0.9], "yaw": 0.0},
                    {"position": [0.4, -0.3, 0.9], "yaw": 0.6}]}
    (tmp_path / "a.yaml").write_text(yaml.safe_dump(cfg))
    (tmp_path / "b.yaml").write_text(yaml.safe_dump({**cfg, "seed": 22}))
    rows = ["frame,env,x,y,z,yaw"] + [f"{f},{e},{0.1 * f},{0.2 * e},0.9,{0.05 * f}"
                                      for e in range(2) for f in range(3)]
    (tmp_path / "t.csv").write_text("\n".join(rows) + "\n")
    run1 = tmp_path / "run1"
    cmd_dataset(load_config(tmp_path / "a.yaml"), tmp_path / "t.csv", run1)
    cmd_dataset(load_config(tmp_path / "a.yaml"), tmp_path / "t.csv", tmp_path / "run2")
    cmd_dataset(load_config(tmp_path / "b.yaml"), tmp_path / "t.csv", tmp_path / "reseed")
    files = sorted(p.relative_to(run1) for p in run1.rglob("*") if p.is_file())

    def same(root, rel):
        return (run1 / rel).read_bytes() == (root / rel).read_bytes()

    identical = all(same(tmp_path / "run2", rel) for rel in files)
    clean = [rel for rel in files if rel.name.endswith("_clean.pfm")]
    depth = [rel for rel in files if rel.name.endswith("_depth.pfm")]
    clean_kept = all(same(tmp_path / "reseed", rel) for rel in clean)
    depth_changed = all(not same(tmp_path / "reseed", rel) for rel in depth)
    ok = identical and clean_kept and depth_changed and len(clean) == 6 and len(depth) == 6 \
        and any(rel.name == "manifest.json" for rel in files)
    report(9, ok, f"{len(files)} files byte-identical across runs={identical}; new seed: "
                  f"clean unchanged={clean_kept}, corrupted changed={depth_changed}")


def test_c10_throughput(report):
    spec = TerrainSpec("stairs_up", extent=8.0, cell=0.05)
    mesh = terrain_world_mesh(spec)
    bvh = build_bvh(mesh)
    intr = PinholeIntrinsics(fx=350.0, fy=350.0, cx=300.0, cy=240.0, width=600, height=480)
    extr = CameraMount().extrinsics([-3.0, 0.0, 0.9], 0.0)
    rates = {}
    images = {}
    for parallel in (False, True):
        render_depth(bvh, None, intr, extr, parallel=parallel)  # warm-up
        best = math.inf
        for _ in range(3):
            t0 = time.perf_counter()
            images[parallel] = render_depth(bvh, None, intr, extr, parallel=parallel)
            best = min(best, time.perf_counter() - t0)
        rates[parallel] = intr.width * intr.height / best
    equal = np.array_equal(images[False], images[True])
    coverage = float((images[False] > 0).mean())
    report(10, equal, f"informational: {mesh.n_faces} triangles, 600x480 "
                      f"({coverage:.0%} hit): serial {rates[False] / 1e6:.2f} Mpx/s, "
                      f"parallel {rates[True] / 1e6:.2f} Mpx/s")
