"""voxbeam command line: offline rendering, the streaming service, and the
standalone environment/denoiser tools."""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import re
import sys

import numpy as np
import yaml

from .config import load_config
from .denoise import BilateralParams, FrameHistory, denoise_d1, denoise_d2
from .envlight import (CAMERA, HDR, LDR, FisheyePair, estimate_hdr,
                       illumination_difference, make_map, stitch)
from .imageio import (octa_decode, read_pfm, read_png, tonemap, write_pfm,
                      write_png)
from .pipeline import DEPTH_SENTINEL, camera_from_doc, run_offline
from .render import EyeFrame, GBuffer, StereoFrame
from .reproject import ReprojectionParams, build_reprojection
from .server import run_serve


def _cmd_render(args):
    cfg = load_config(args.config)
    if args.output:
        cfg.output = args.output
    if args.dump_aux:
        cfg.dump_aux = True
    if args.dump_validity:
        cfg.dump_validity = True
    manifest = run_offline(cfg)
    print(f"rendered {len(manifest)} frames into {cfg.output}")
    return 0


def _cmd_serve(args):
    cfg = load_config(args.config)
    run_serve(cfg, args.port, host=args.host)
    return 0


def _cmd_stitch(args):
    front = read_png(args.front).astype(np.float32)
    back = read_png(args.back).astype(np.float32)
    pair = FisheyePair(front, back, fov_deg=args.fov)
    pano = stitch(pair, height=args.height, width=args.width)
    write_png(args.out, np.clip(np.rint(pano.pixels * 255), 0, 255).astype(np.uint8))
    print(f"stitched {args.width}x{args.height} panorama -> {args.out}")
    return 0


def _cmd_estimate_hdr(args):
    pano = make_map(read_png(args.input), LDR, CAMERA)
    hdr = estimate_hdr(pano, args.percentile, args.floor, args.boost)
    write_pfm(args.out, hdr.pixels)
    print(f"estimated HDR map -> {args.out} "
          f"(max {hdr.pixels.max():.2f}, mean {hdr.pixels.mean():.4f})")
    return 0


def _load_hdr_any(path):
    if path.endswith(".pfm"):
        return make_map(np.maximum(read_pfm(path), 0.0), HDR, CAMERA)
    return estimate_hdr(make_map(read_png(path), LDR, CAMERA))


def _cmd_diff_illum(args):
    prev = _load_hdr_any(args.prev)
    curr = _load_hdr_any(args.curr)
    diff = illumination_difference(prev, curr, args.grid_n, args.extremal)
    print(f"T = {diff.value:.6f}  (extremal = {args.extremal}, N = {args.grid_n})")
    for row in diff.per_patch:
        print("  " + " ".join(f"{v:+.4f}" for v in row))
    return 0


def _load_dumped_frame(directory, t):
    eyes = {}
    for eye in ("L", "R"):
        stem = os.path.join(directory, f"frame_{t:05d}_{eye}")
        raw = read_pfm(stem + "_raw.pfm")
        albedo = read_pfm(stem + "_gbuf_albedo.pfm")
        normdepth = read_pfm(stem + "_gbuf_normdepth.pfm")
        position = read_pfm(stem + "_gbuf_position.pfm")
        with open(stem + "_camera.yaml") as f:
            cam = camera_from_doc(yaml.safe_load(f))
        depth = normdepth[..., 2].astype(np.float32)
        covered = depth < DEPTH_SENTINEL * 0.1
        depth = np.where(covered, depth, np.inf).astype(np.float32)
        grad = np.where((np.abs(normdepth[..., :2]) <= 1.0).all(axis=-1, keepdims=True),
                        octa_decode(normdepth[..., :2]), 0.0)
        gb = GBuffer(albedo=albedo,
                     gradient=grad.astype(np.float32),
                     depth=depth,
                     x=np.where(covered[..., None], position, 0.0).astype(np.float32),
                     coverage=covered.astype(np.float32))
        eyes[eye] = EyeFrame(radiance=raw, gbuffer=gb, camera=cam)
    return StereoFrame(index=t, eyes=eyes)


def _cmd_denoise(args):
    frames = sorted(int(m.group(1)) for m in
                    (re.match(r"frame_(\d+)_L_raw\.pfm$", os.path.basename(p))
                     for p in glob.glob(os.path.join(args.input, "frame_*_L_raw.pfm")))
                    if m)
    if not frames:
        print("no dumped frames (frame_*_raw.pfm) found; render with --dump-aux",
              file=sys.stderr)
        return 2
    with open(os.path.join(args.input, "manifest.json")) as f:
        t_values = {e["frame"]: e["T"] for e in json.load(f)["frames"]}
    params = BilateralParams(spatial_radius=args.spatial_radius,
                             sigma_albedo=args.sigma_albedo,
                             sigma_gradient=args.sigma_gradient,
                             sigma_depth=args.sigma_depth,
                             alpha=args.alpha, beta=args.beta,
                             temporal_gain=args.temporal_gain)
    rp_params = ReprojectionParams(depth_tolerance=args.depth_tolerance,
                                   albedo_tolerance=args.albedo_tolerance)
    os.makedirs(args.out, exist_ok=True)
    history = None
    for t in frames:
        frame = _load_dumped_frame(args.input, t)
        reproj = build_reprojection(frame, history, rp_params)
        v1 = denoise_d1(frame, history, reproj, params, t_values.get(t, 0.0))
        v2 = denoise_d2(v1, frame, reproj, params)
        for eye in ("L", "R"):
            out_stem = os.path.join(args.out, f"denoised_{t:05d}_{eye}")
            write_pfm(out_stem + ".pfm", v2[eye])
            write_png(out_stem + ".png", tonemap(v2[eye]))
        history = FrameHistory(index=t, denoised=v2,
                               gbuffers={e: frame.eyes[e].gbuffer for e in ("L", "R")},
                               cameras={e: frame.eyes[e].camera for e in ("L", "R")})
        print(f"denoised frame {t} (T={t_values.get(t, 0.0):.4f})")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="voxbeam",
        description="environment-lit stereo volumetric path tracer")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a camera path offline")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="override the configured output directory")
    p.add_argument("--dump-aux", action="store_true",
                   help="also dump raw radiance, G-buffers and cameras")
    p.add_argument("--dump-validity", action="store_true",
                   help="dump reprojection validity masks as PNG")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("serve", help="run the live frame-streaming service")
    p.add_argument("--config", required=True)
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("stitch", help="stitch a dual-fisheye pair")
    p.add_argument("--front", required=True)
    p.add_argument("--back", required=True)
    p.add_argument("--fov", type=float, default=200.0)
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stitch)

    p = sub.add_parser("estimate-hdr", help="expand an LDR panorama to HDR")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="output PFM path")
    p.add_argument("--percentile", type=float, default=95.0)
    p.add_argument("--floor", type=float, default=0.9)
    p.add_argument("--boost", type=float, default=50.0)
    p.set_defaults(func=_cmd_estimate_hdr)

    p = sub.add_parser("diff-illum",
                       help="patch-wise illumination difference of two maps")
    p.add_argument("--prev", required=True)
    p.add_argument("--curr", required=True)
    p.add_argument("--grid-n", type=int, default=8)
    p.add_argument("--extremal", choices=("min", "max"), default="min")
    p.set_defaults(func=_cmd_diff_illum)

    p = sub.add_parser("denoise", help="denoise a dumped frame sequence")
    p.add_argument("--input", required=True, help="directory with --dump-aux output")
    p.add_argument("--out", required=True)
    p.add_argument("--spatial-radius", type=int, default=2)
    p.add_argument("--sigma-albedo", type=float, default=0.1)
    p.add_argument("--sigma-gradient", type=float, default=0.5)
    p.add_argument("--sigma-depth", type=float, default=0.05)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--temporal-gain", type=float, default=1.0)
    p.add_argument("--depth-tolerance", type=float, default=0.05)
    p.add_argument("--albedo-tolerance", type=float, default=0.2)
    p.add_argument("--extremal", choices=("min", "max"), default="min",
                   help="accepted for parity with diff-illum; T values come "
                        "from the manifest")
    p.set_defaults(func=_cmd_denoise)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
