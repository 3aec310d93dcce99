#!/usr/bin/env python3
"""Generate demo assets (volume, transfer function, panorama) and a session
config, ready for `voxbeam render` / `voxbeam serve`."""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from voxbeam.config import SessionConfig, save_config
from voxbeam.fixtures import make_blob_volume, make_default_tf, make_sky_panorama
from voxbeam.imageio import write_png
from voxbeam.volume import save_transfer_function, save_volume


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="demo", help="asset directory")
    ap.add_argument("--volume-n", type=int, default=64)
    ap.add_argument("--frames", type=int, default=60)
    ap.add_argument("--size", type=int, default=256, help="per-eye resolution")
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    save_volume(os.path.join(args.out, "blob.yaml"), make_blob_volume(args.volume_n))
    save_transfer_function(os.path.join(args.out, "tf.yaml"), make_default_tf())
    pano = make_sky_panorama(256)
    write_png(os.path.join(args.out, "sky.png"),
              np.clip(np.rint(pano.pixels * 255), 0, 255).astype(np.uint8))

    # paths inside the config are resolved relative to the config file
    cfg = SessionConfig(
        volume="blob.yaml",
        transfer_function="tf.yaml",
        environment={"kind": "static", "path": "sky.png"},
        width=args.size, height=args.size, spp=2, seed=7,
        camera={"kind": "orbit", "frames": args.frames, "radius": 1.15,
                "elevation_deg": 15.0, "azimuth_start_deg": 0.0,
                "azimuth_end_deg": min(90.0, 1.5 * args.frames)},
        output="frames")
    cfg_path = os.path.join(args.out, "session.yaml")
    save_config(cfg_path, cfg)
    print(f"demo assets in {args.out}/")
    print(f"  offline: voxbeam render --config {cfg_path}")
    print(f"  live:    voxbeam serve --config {cfg_path} --port 9742")


if __name__ == "__main__":
    main()
