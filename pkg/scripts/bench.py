#!/usr/bin/env python3
"""Frame-loop timing breakdown at streaming resolution."""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from voxbeam.config import SessionConfig
from voxbeam.fixtures import fixture_scene, make_sky_panorama
from voxbeam.paths import path_from_config
from voxbeam.pipeline import Pipeline


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--spp", type=int, default=2)
    ap.add_argument("--frames", type=int, default=10)
    args = ap.parse_args()

    cfg = SessionConfig(
        volume="<in-memory>", transfer_function="preset:default",
        environment={"kind": "map", "map": make_sky_panorama(128)},
        width=args.size, height=args.size, spp=args.spp, seed=3,
        camera={"kind": "orbit", "frames": 1, "radius": 1.15})
    pipeline = Pipeline(cfg, scene=fixture_scene(48))
    poses = path_from_config({"kind": "orbit", "frames": args.frames + 2,
                              "radius": 1.15, "elevation_deg": 15.0,
                              "azimuth_end_deg": 1.5 * (args.frames + 2)})
    for pos, orient in poses[:2]:
        pipeline.step(pos, orient)

    render_ms = denoise_ms = 0.0
    t0 = time.perf_counter()
    for pos, orient in poses[2:]:
        result = pipeline.step(pos, orient)
        render_ms += result.render_ms
        denoise_ms += result.denoise_ms
    total = time.perf_counter() - t0
    n = args.frames
    print(f"{args.size}x{args.size} per eye, {args.spp} spp, {n} frames on "
          f"{os.cpu_count()} cores")
    print(f"  full loop : {total / n * 1e3:8.1f} ms/frame  ({n / total:.2f} fps)")
    print(f"  render    : {render_ms / n:8.1f} ms/frame")
    print(f"  denoise   : {denoise_ms / n:8.1f} ms/frame")
    print(f"  other     : {total * 1e3 / n - (render_ms + denoise_ms) / n:8.1f} ms/frame"
          " (environment estimation, reprojection, bookkeeping)")


if __name__ == "__main__":
    main()
