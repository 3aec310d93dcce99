"""Acceptance harness.

Each test covers one release criterion at its stated tolerance and prints a
single PASS/FAIL line (run with ``pytest tests/test_acceptance.py -s``).
The heavy reference renders are generated once per session by the module's
fixtures using the renderer's own high-spp mode.
"""

import asyncio
import json
import os
import time

import numpy as np
import pytest
import websockets
from synth import small_session
from test_illumdiff import _brute_force_patch_ssim

from voxbeam import quat, wire
from voxbeam.config import SessionConfig
from voxbeam.denoise import (BilateralParams, d2_lambda, denoise_d1,
                             denoise_d2, inter_eye_inconsistency,
                             temporal_weight)
from voxbeam.envlight import (HDR, WARPED, RadianceMap, estimate_hdr,
                              illumination_difference, make_map, stitch,
                              stitch_weights, synthesize_fisheye)
from voxbeam.fixtures import (fixture_scene, make_constant_volume,
                              make_sky_panorama, make_smooth_panorama,
                              make_uniform_tf)
from voxbeam.imageio import read_png
from voxbeam.paths import path_from_config
from voxbeam.pipeline import Pipeline, run_offline
from voxbeam.render import (RenderMode, Scene, StereoRig, render,
                            transmittance_estimates)
from voxbeam.reproject import build_reprojection
from voxbeam.server import FrameServer
from voxbeam.volume import VolumeGrid


def _report(name, ok, detail=""):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


ORBIT_FRAMES = 60
ORBIT_EYE_RES = 96
REFERENCE_SPP = 1024
REFERENCE_SEED = 424242


def _orbit_config():
    return SessionConfig(
        volume="<in-memory>", transfer_function="preset:default",
        environment={"kind": "map", "map": make_sky_panorama(64)},
        width=ORBIT_EYE_RES, height=ORBIT_EYE_RES, spp=2, seed=7,
        camera={"kind": "orbit", "frames": ORBIT_FRAMES, "radius": 1.15,
                "elevation_deg": 15.0, "azimuth_start_deg": 0.0,
                "azimuth_end_deg": 90.0})


def _swap_panorama():
    # adversarial counterpart of the sky: sun opposite, gradient inverted
    return make_sky_panorama(64, sun_azimuth=2.5, sun_polar=2.2,
                             zenith=(0.05, 0.05, 0.12), ground=(0.95, 0.9, 0.85))


def _reference_for(pipeline, rig, frame_index):
    return render(pipeline.scene, pipeline.prev_hdr, rig, RenderMode.VPT_ENV,
                  spp=REFERENCE_SPP, seed=REFERENCE_SEED,
                  frame_index=frame_index)


def _mse(a, b):
    return float(np.mean((np.asarray(a, dtype=np.float64) - b) ** 2))


@pytest.fixture(scope="module")
def orbit_run():
    """60-frame orbit at 2 spp with per-frame 1024-spp references."""
    cfg = _orbit_config()
    scene = fixture_scene(48)
    pipeline = Pipeline(cfg, scene=scene)
    poses = path_from_config(cfg.camera)
    records = []
    t_gen0 = time.perf_counter()
    for i, (pos, orient) in enumerate(poses):
        result = pipeline.step(pos, orient)
        rig = pipeline.rig_for(pos, orient)
        ref = _reference_for(pipeline, rig, i)
        mse_raw = np.mean([_mse(result.frame.eyes[e].radiance,
                                ref.eyes[e].radiance) for e in ("L", "R")])
        mse_d2 = np.mean([_mse(result.denoised[e], ref.eyes[e].radiance)
                          for e in ("L", "R")])
        records.append({
            "T": result.illum_diff,
            "mse_raw": mse_raw,
            "mse_d2": mse_d2,
            "incons_d1": inter_eye_inconsistency(result.denoised_d1,
                                                 result.frame, result.reproj),
            "incons_d2": inter_eye_inconsistency(result.denoised,
                                                 result.frame, result.reproj),
        })
    gen_minutes = (time.perf_counter() - t_gen0) / 60.0
    return {"records": records, "gen_minutes": gen_minutes}


# ---------------------------------------------------------------------------

def test_transmittance_correctness():
    t0 = time.perf_counter()
    scene = Scene(make_constant_volume(1.0), make_uniform_tf(scale=1.0,
                                                             sigma_max=2.0))
    est = transmittance_estimates(scene, (-0.2, 0, 0), (0.3, 0, 0),
                                  n=100_000, seed=11)
    homo_err = abs(est.mean() - np.exp(-1.0))

    sigma_max = 3.0
    n = 32
    ramp = np.broadcast_to(np.linspace(0, 1, n)[:, None, None], (n, n, n))
    grid = VolumeGrid(dims=(n, n, n), spacing=(1.0 / (n - 1),) * 3,
                      origin=(-0.5, -0.5, -0.5),
                      values=np.ascontiguousarray(ramp, dtype=np.float32))
    tf = make_uniform_tf(scale=1.0, sigma_max=sigma_max)
    tf = type(tf)(nodes=((0.0, (1, 1, 1), 0.0), (1.0, (1, 1, 1), 1.0)),
                  sigma_max=sigma_max)
    hscene = Scene(grid, tf)
    a, b = -0.4, 0.4
    tau = sigma_max * ((b ** 2 / 2 + 0.5 * b) - (a ** 2 / 2 + 0.5 * a))
    het = transmittance_estimates(hscene, (a, 0, 0), (b, 0, 0),
                                  n=100_000, seed=12).mean()
    het_rel = abs(het - np.exp(-tau)) / np.exp(-tau)
    elapsed = time.perf_counter() - t0
    ok = homo_err <= 0.005 and het_rel <= 0.01 and elapsed < 10.0
    _report("transmittance correctness", ok,
            f"homogeneous |mean-e^-1|={homo_err:.4f} (<=0.005), "
            f"ramp rel err={het_rel:.4%} (<=1%), runtime {elapsed:.1f}s (<10s)")


def test_mc_consistency_slope():
    t0 = time.perf_counter()
    scene = fixture_scene(48)
    env = estimate_hdr(make_sky_panorama(64))
    rig = StereoRig(position=np.array([-1.4, 0.0, 0.35]),
                    orientation=quat.from_axis_angle((0, 1, 0), 0.24),
                    width=128, height=128)
    ref = render(scene, env, rig, RenderMode.VPT_ENV, spp=REFERENCE_SPP,
                 seed=999).left.radiance.astype(np.float64)
    renders = [render(scene, env, rig, RenderMode.VPT_ENV, spp=2,
                      seed=2000 + i).left.radiance.astype(np.float64)
               for i in range(64)]
    ks = [1, 4, 16, 64]
    mses = [_mse(np.mean(renders[:k], axis=0), ref) for k in ks]
    slope = np.polyfit(np.log(ks), np.log(mses), 1)[0]
    elapsed = time.perf_counter() - t0
    ok = abs(slope + 1.0) <= 0.15 and elapsed < 300.0
    _report("MC consistency", ok,
            f"log-log MSE slope {slope:.3f} (target -1 +/- 0.15), "
            f"MSE(k)={['%.2e' % m for m in mses]}, runtime {elapsed:.0f}s (<5min)")


def test_denoiser_quality(orbit_run):
    t0 = time.perf_counter()
    rec = orbit_run["records"]
    mean_raw = np.mean([r["mse_raw"] for r in rec])
    mean_d2 = np.mean([r["mse_d2"] for r in rec])
    ratio = mean_d2 / mean_raw
    improved = sum(r["incons_d2"] < r["incons_d1"] for r in rec)
    check_s = time.perf_counter() - t0
    ok = (ratio <= 0.25 and improved >= 55
          and orbit_run["gen_minutes"] < 30.0 and check_s < 60.0)
    _report("denoiser quality", ok,
            f"MSE ratio {ratio:.3f} (<=0.25), inter-eye improved on "
            f"{improved}/60 frames (>=55), references took "
            f"{orbit_run['gen_minutes']:.1f} min (<30), check {check_s:.1f}s (<60)")


def test_eq4_eq5_numeric_contracts():
    w = temporal_weight(0.0, 1.0)
    eq4_ok = abs(w - 1.0 / (1.0 + np.e)) <= 1e-9
    lam0 = float(d2_lambda(0.0))
    lam_ln2 = float(d2_lambda(np.log(2.0)))
    grid = np.linspace(0.0, 10.0, 100)
    lam_grid = d2_lambda(grid)
    monotone = bool(np.all(np.diff(lam_grid) >= 0.0))
    ok = (eq4_ok and abs(lam0 - 0.5) <= 1e-12 and abs(lam_ln2 - 0.75) <= 1e-12
          and monotone)
    _report("temporal/inter-screen weight contracts", ok,
            f"w_v(0,1)={w:.9f} (1/(1+e)={1 / (1 + np.e):.9f}), "
            f"lambda(0)={lam0}, lambda(ln2)={lam_ln2}, monotone={monotone}")


def test_eq1_contract():
    base = make_map(make_smooth_panorama(3, height=16).pixels * 4.0, HDR, WARPED)
    d_self = illumination_difference(base, base, grid_n=4)
    self_ok = d_self.value == 0.0

    rng = np.random.default_rng(8)
    in_range = True
    for _ in range(100):
        a = make_map(rng.random((16, 32, 3)) * rng.uniform(0.1, 30), HDR, WARPED)
        b = make_map(rng.random((16, 32, 3)) * rng.uniform(0.1, 30), HDR, WARPED)
        t_val = illumination_difference(a, b, grid_n=4).value
        in_range &= (0.0 <= t_val < 1.0)

    other = base.pixels.copy()
    other[0:8, 0:8] = base.pixels.max() - other[0:8, 0:8]
    curr = make_map(other, HDR, WARPED)
    diff = illumination_difference(base, curr, grid_n=2)
    tau_oracle = _brute_force_patch_ssim(base, curr, 2, 0, 0)
    oracle_ok = abs(diff.value - (1.0 - tau_oracle)) <= 1e-6
    ok = self_ok and in_range and oracle_ok
    _report("illumination difference contract", ok,
            f"T(Q,Q)={d_self.value}, 100 random pairs in [0,1): {in_range}, "
            f"patch-inversion |T-(1-tau_oracle)|<=1e-6: {oracle_ok}")


def test_temporal_gating_on_hot_swap():
    cfg = _orbit_config()
    scene = fixture_scene(48)
    pipeline = Pipeline(cfg, scene=scene)
    poses = path_from_config(cfg.camera)
    swap_at = 30
    result = None
    for i, (pos, orient) in enumerate(poses[:swap_at + 1]):
        if i == swap_at:
            pipeline.env_source.set_map(_swap_panorama())
        result = pipeline.step(pos, orient)
    rig = pipeline.rig_for(*poses[swap_at])
    ref = _reference_for(pipeline, rig, swap_at)

    # history-free rerun of the same frame through the public denoiser path
    reproj_nf = build_reprojection(result.frame, None, cfg.reprojection)
    v1_nf = denoise_d1(result.frame, None, reproj_nf, cfg.denoiser,
                       result.illum_diff)
    v2_nf = denoise_d2(v1_nf, result.frame, reproj_nf, cfg.denoiser)

    mse_hist = np.mean([_mse(result.denoised[e], ref.eyes[e].radiance)
                        for e in ("L", "R")])
    mse_nf = np.mean([_mse(v2_nf[e], ref.eyes[e].radiance)
                      for e in ("L", "R")])
    ok = mse_hist <= 1.10 * mse_nf
    _report("temporal gating (no ghosting)", ok,
            f"T at swap={result.illum_diff:.4f}, frame-30 MSE with history "
            f"{mse_hist:.3e} vs history-free {mse_nf:.3e} "
            f"(ratio {mse_hist / mse_nf:.3f} <= 1.10)")


def test_stitch_roundtrip_psnr():
    worst = np.inf
    for seed in range(10):
        ref = make_smooth_panorama(seed, height=128)
        pair = synthesize_fisheye(ref, size=512)
        pano = stitch(pair, height=128, width=256)
        w_f, w_b = stitch_weights(pair, 128, 256)
        exclusive = (w_f >= 1.0) | (w_b >= 1.0)
        mse = _mse(pano.pixels[exclusive], ref.pixels[exclusive])
        worst = min(worst, 10.0 * np.log10(1.0 / max(mse, 1e-20)))
    default = stitch(synthesize_fisheye(make_smooth_panorama(0, 128), size=512))
    dims_ok = (default.width, default.height) == (512, 256)
    ok = worst > 35.0 and dims_ok
    _report("stitch round trip", ok,
            f"worst PSNR outside blend band {worst:.1f} dB (>35), "
            f"default output {default.width}x{default.height} (512x256)")


def test_determinism_and_parity(tmp_path):
    frames = 3
    cfg_a = small_session(tmp_path / "in_a", frames=frames, width=24, height=24,
                          output=tmp_path / "a")
    run_offline(cfg_a)
    cfg_b = small_session(tmp_path / "in_b", frames=frames, width=24, height=24,
                          output=tmp_path / "b")
    run_offline(cfg_b)
    rerun_ok = all(
        (tmp_path / "a" / f"frame_{t:05d}_{e}.pfm").read_bytes()
        == (tmp_path / "b" / f"frame_{t:05d}_{e}.pfm").read_bytes()
        and (tmp_path / "a" / f"frame_{t:05d}_{e}.png").read_bytes()
        == (tmp_path / "b" / f"frame_{t:05d}_{e}.png").read_bytes()
        for t in range(frames) for e in ("L", "R"))

    cfg_srv = small_session(tmp_path / "in_srv", frames=frames, width=24,
                            height=24, output=tmp_path / "served", lockstep=True)
    poses = path_from_config(cfg_srv.camera)

    async def replay():
        server = FrameServer(cfg_srv)
        port = await server.start()
        async with websockets.connect(f"ws://127.0.0.1:{port}") as ws:
            for pos, orient in poses:
                await ws.send(wire.make_control(
                    "pose", position=[float(v) for v in pos],
                    orientation=[float(v) for v in orient]))
                while True:
                    msg = await asyncio.wait_for(ws.recv(), 60.0)
                    if isinstance(msg, str) and json.loads(msg)["type"] == "stats":
                        break
        await server.close()

    asyncio.run(replay())
    parity_ok = all(
        (tmp_path / "a" / f"frame_{t:05d}_{e}.pfm").read_bytes()
        == (tmp_path / "served" / f"frame_{t:05d}_{e}.pfm").read_bytes()
        for t in range(frames) for e in ("L", "R"))
    ok = rerun_ok and parity_ok
    _report("determinism & offline/serve parity", ok,
            f"offline rerun byte-identical: {rerun_ok}, "
            f"serve replay byte-identical: {parity_ok}")


def test_performance_smoke():
    cores = os.cpu_count() or 1
    scene = fixture_scene(48)
    cfg = SessionConfig(
        volume="<in-memory>", transfer_function="preset:default",
        environment={"kind": "map", "map": make_sky_panorama(128)},
        width=256, height=256, spp=2, seed=3,
        camera={"kind": "orbit", "frames": 1, "radius": 1.4})
    pipeline = Pipeline(cfg, scene=scene)
    poses = path_from_config({"kind": "orbit", "frames": 12, "radius": 1.4,
                              "elevation_deg": 15.0, "azimuth_end_deg": 18.0})
    for pos, orient in poses[:2]:   # warm up compiled kernels and caches
        pipeline.step(pos, orient)
    n = 6
    t0 = time.perf_counter()
    for pos, orient in poses[2:2 + n]:
        pipeline.step(pos, orient)
    fps = n / (time.perf_counter() - t0)
    # stated soft target: 5 fps on an 8-core desk machine; pro-rate by the
    # cores actually available here
    target = 5.0 * min(1.0, cores / 8.0)
    ok = fps >= target
    _report("performance smoke (soft target)", ok,
            f"{fps:.2f} fps full loop at 256x256/eye, 2 spp on {cores} cores "
            f"(8-core target 5 fps, pro-rated here to {target:.2f})")
