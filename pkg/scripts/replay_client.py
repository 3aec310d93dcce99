#!/usr/bin/env python3
"""Scripted client: replays a config's camera path against a running
`voxbeam serve` instance and reports per-frame stats (optionally saving the
received frames as PNGs)."""

import argparse
import asyncio
import json
import os
import sys

import websockets

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from voxbeam import wire
from voxbeam.config import load_config
from voxbeam.imageio import write_png
from voxbeam.paths import path_from_config
from voxbeam.wire import decode_image, decode_packet


async def replay(url, config_path, save_dir=None):
    cfg = load_config(config_path)
    poses = path_from_config(cfg.camera)
    if save_dir:
        os.makedirs(save_dir, exist_ok=True)
    async with websockets.connect(url, max_size=32 * 1024 * 1024) as ws:
        for i, (pos, orient) in enumerate(poses):
            await ws.send(wire.make_control(
                "pose", position=[float(v) for v in pos],
                orientation=[float(v) for v in orient]))
            packets = []
            while True:
                msg = await ws.recv()
                if isinstance(msg, bytes):
                    packets.append(decode_packet(msg))
                    continue
                data = json.loads(msg)
                if data["type"] == "stats":
                    print(f"frame {data['frame']:4d}  T={data['T']:.4f}  "
                          f"render {data['render_ms']:7.1f} ms  "
                          f"denoise {data['denoise_ms']:6.1f} ms  {data['mode']}")
                    break
                print("service:", data, file=sys.stderr)
            if save_dir:
                for pkt in packets:
                    write_png(os.path.join(
                        save_dir, f"recv_{pkt.frame_id:05d}_{pkt.eye_name}.png"),
                        decode_image(pkt))
            if i + 1 >= len(poses):
                break


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--url", default="ws://127.0.0.1:9742")
    ap.add_argument("--config", required=True,
                    help="session config providing the camera path")
    ap.add_argument("--save", help="directory for received PNG frames")
    args = ap.parse_args()
    asyncio.run(replay(args.url, args.config, args.save))


if __name__ == "__main__":
    main()
