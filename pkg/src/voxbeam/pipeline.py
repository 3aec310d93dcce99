"""Per-frame pipeline: environment update -> render -> reproject -> denoise,
plus the deterministic offline harness writing image sequences to disk.
"""

from __future__ import annotations

import glob
import json
import logging
import os
import time
from dataclasses import dataclass, replace

import numpy as np
import yaml

from . import fixtures
from .config import SessionConfig
from .denoise import FrameHistory, denoise_d1, denoise_d2
from .envlight import (CAMERA, HDR, LDR, T_EPSILON, FisheyePair, RadianceMap,
                       calibrate, capture_in_camera_frame, estimate_hdr,
                       illumination_difference, make_map, prefilter, stitch,
                       warp_to_center)
from .imageio import (octa_encode, read_pfm, read_png, tonemap, write_pfm,
                      write_png)
from .paths import path_from_config
from .render import (Camera, RenderMode, Scene, StereoFrame, StereoRig,
                     render)
from .reproject import build_reprojection
from .volume import load_transfer_function, load_volume

log = logging.getLogger(__name__)

DEPTH_SENTINEL = 1.0e30

TF_PRESETS = {
    "default": fixtures.make_default_tf,
    "dense": lambda: fixtures.make_default_tf(sigma_max=12.0),
    "milky": lambda: fixtures.make_uniform_tf(albedo=(0.9, 0.9, 0.95),
                                              scale=0.5, sigma_max=4.0),
}

ENV_PRESETS = {
    "sky": lambda: fixtures.make_sky_panorama(),
    "sunset": lambda: fixtures.make_sky_panorama(sun_azimuth=-2.2, sun_polar=1.4,
                                                 zenith=(0.5, 0.3, 0.25),
                                                 ground=(0.1, 0.08, 0.1)),
    "smooth": lambda: fixtures.make_smooth_panorama(0),
}


class PipelineError(RuntimeError):
    pass


@dataclass
class FrameResult:
    frame: StereoFrame
    denoised: dict            # {"L", "R"} final images v(.,2)
    denoised_d1: dict         # intermediate v(.,1)
    illum_diff: float
    render_ms: float
    denoise_ms: float
    reproj: dict


def _load_panorama(path) -> RadianceMap:
    if path.endswith(".pfm"):
        return make_map(np.maximum(read_pfm(path), 0.0), HDR, CAMERA)
    return make_map(read_png(path), LDR, CAMERA)


class EnvironmentSource:
    """Resolves the input panorama for each frame index.

    Panorama files and presets are world-anchored environments (the emulated
    capture rotates them into the camera frame per pose); fisheye directories
    hold raw per-frame captures already in the camera frame.
    """

    def __init__(self, cfg: dict, fov_deg: float = 200.0):
        self.kind = cfg.get("kind", "static")
        self.cfg = cfg
        self.fov_deg = float(cfg.get("fov_deg", fov_deg))
        self._cache = {}
        if self.kind == "static":
            self._cache[0] = _load_panorama(cfg["path"])
        elif self.kind == "preset":
            self._cache[0] = ENV_PRESETS[cfg["name"]]()
        elif self.kind == "sequence":
            self.entries = sorted(cfg["entries"], key=lambda e: int(e["frame"]))
            if not self.entries or int(self.entries[0]["frame"]) != 0:
                raise PipelineError("environment sequence must start at frame 0")
            for e in self.entries:
                if not os.path.exists(e["path"]):
                    raise PipelineError(f"missing environment file {e['path']}")
        elif self.kind == "fisheye_dir":
            self.directory = cfg["path"]
            fronts = sorted(glob.glob(os.path.join(self.directory, "front_*.png")))
            if not fronts:
                raise PipelineError(f"no front_*.png in {self.directory}")
        elif self.kind == "map":
            self._cache[0] = cfg["map"]  # pre-built RadianceMap (tests, serve)
        else:
            raise PipelineError(f"unknown environment kind {self.kind!r}")

    def set_map(self, pano: RadianceMap):
        self.kind = "map"
        self._cache = {0: pano}

    @property
    def world_anchored(self) -> bool:
        return self.kind != "fisheye_dir"

    def panorama(self, t: int) -> RadianceMap:
        if self.kind in ("static", "preset", "map"):
            return self._cache[0]
        if self.kind == "sequence":
            active = self.entries[0]
            for e in self.entries:
                if int(e["frame"]) <= t:
                    active = e
            key = active["path"]
            if key not in self._cache:
                self._cache.clear()
                try:
                    self._cache[key] = _load_panorama(key)
                except Exception as exc:
                    raise PipelineError(f"frame {t}: cannot load environment "
                                        f"{key}: {exc}")
            return self._cache[key]
        # fisheye_dir
        front = os.path.join(self.directory, f"front_{t:05d}.png")
        back = os.path.join(self.directory, f"back_{t:05d}.png")
        try:
            pair = FisheyePair(read_png(front).astype(np.float32),
                               read_png(back).astype(np.float32),
                               fov_deg=self.fov_deg)
        except FileNotFoundError as exc:
            raise PipelineError(f"frame {t}: missing fisheye input {exc.filename}")
        except ValueError as exc:
            raise PipelineError(f"frame {t}: bad fisheye pair: {exc}")
        return stitch(pair)


class Pipeline:
    """Advances one stereo frame at a time; frame t consumes frame t-1's
    denoised output, so steps are strictly sequential."""

    def __init__(self, config: SessionConfig, scene: Scene | None = None):
        self.config = config
        if scene is None:
            grid = load_volume(config.volume)
            tf_id = str(config.transfer_function)
            if tf_id.startswith("preset:"):
                tf = TF_PRESETS[tf_id.split(":", 1)[1]]()
            else:
                tf = load_transfer_function(tf_id)
            scene = Scene(grid, tf)
        self.scene = scene
        self.env_source = EnvironmentSource(config.environment,
                                            config.fisheye_fov_deg)
        self.mode = config.mode
        self.denoiser_params = config.denoiser
        self.volume_offset = np.asarray(config.volume_offset, dtype=np.float64)
        self.history: FrameHistory | None = None
        self.prev_hdr: RadianceMap | None = None
        self.frame_index = 0
        self.env_uploads = {}
        self._warned_offset = False

    # -- interactive state -------------------------------------------------
    def set_mode(self, mode):
        self.mode = RenderMode.parse(mode)

    def set_transfer_function(self, name: str):
        if name not in TF_PRESETS:
            raise ValueError(f"unknown transfer function preset {name!r}")
        self.scene = Scene(self.scene.grid, TF_PRESETS[name]())

    def set_environment(self, name=None, upload_id=None):
        if name is not None:
            if name not in ENV_PRESETS:
                raise ValueError(f"unknown environment preset {name!r}")
            self.env_source.set_map(ENV_PRESETS[name]())
        elif upload_id is not None:
            if upload_id not in self.env_uploads:
                raise ValueError(f"unknown uploaded panorama {upload_id!r}")
            self.env_source.set_map(self.env_uploads[upload_id])
        else:
            raise ValueError("env message needs a name or an id")

    def set_denoiser_params(self, overrides: dict):
        self.denoiser_params = replace(self.denoiser_params, **overrides)

    def set_volume_offset(self, offset):
        self.volume_offset = np.asarray(offset, dtype=np.float64)

    # -- frame advance -----------------------------------------------------
    def rig_for(self, position, orientation) -> StereoRig:
        cfg = self.config
        return StereoRig(position=np.asarray(position, dtype=np.float64),
                         orientation=orientation, ipd=cfg.ipd,
                         vfov=np.radians(cfg.vfov_deg), width=cfg.width,
                         height=cfg.height, near=cfg.near)

    def _environment_for(self, t: int, position, orientation):
        cfg = self.config
        pano = self.env_source.panorama(t)
        if self.env_source.world_anchored:
            pano = capture_in_camera_frame(pano, orientation)
        world = calibrate(pano, orientation)
        center = self.scene.grid.center + self.volume_offset
        offset = center - np.asarray(position, dtype=np.float64)
        radius = cfg.sphere_radius
        norm = float(np.linalg.norm(offset))
        if norm >= radius:
            if not self._warned_offset:
                log.warning("volume center outside environment sphere "
                            "(|offset|=%.2f >= %.2f); clamping", norm, radius)
                self._warned_offset = True
            offset = offset * (0.95 * radius / norm)
        warped = warp_to_center(world, offset, radius)
        if warped.kind == LDR:
            hdr = estimate_hdr(warped, cfg.hdr_percentile, cfg.hdr_floor,
                               cfg.hdr_boost)
            ldr_for_levels = warped
        else:
            hdr = warped
            ldr_for_levels = make_map(np.clip(warped.pixels, 0.0, 1.0), LDR,
                                      warped.frame)
        return hdr, ldr_for_levels

    def step(self, position, orientation) -> FrameResult:
        t = self.frame_index
        cfg = self.config
        hdr, ldr = self._environment_for(t, position, orientation)
        if self.prev_hdr is None:
            t_illum = 0.0
        elif (self.prev_hdr.height, self.prev_hdr.width) != (hdr.height, hdr.width):
            # swapped to an incomparable map: maximal illumination change
            t_illum = 1.0 - T_EPSILON
        else:
            t_illum = illumination_difference(self.prev_hdr, hdr, cfg.grid_n,
                                              cfg.illum_extremal).value

        rig = self.rig_for(position, orientation)
        levels = (prefilter(ldr, cfg.prefilter_levels)
                  if self.mode == RenderMode.PREFILTERED_ENV else None)
        t0 = time.perf_counter()
        frame = render(self.scene, hdr, rig, self.mode, spp=cfg.spp,
                       seed=cfg.seed, frame_index=t, prefiltered=levels,
                       settings=cfg.render_settings)
        frame.illum_diff = t_illum
        t1 = time.perf_counter()
        reproj = build_reprojection(frame, self.history, cfg.reprojection)
        v1 = denoise_d1(frame, self.history, reproj, self.denoiser_params,
                        t_illum)
        v2 = denoise_d2(v1, frame, reproj, self.denoiser_params)
        t2 = time.perf_counter()

        self.history = FrameHistory(
            index=t,
            denoised=v2,
            gbuffers={e: frame.eyes[e].gbuffer for e in ("L", "R")},
            cameras={e: frame.eyes[e].camera for e in ("L", "R")},
            hdr_map=hdr)
        self.prev_hdr = hdr
        self.frame_index = t + 1
        return FrameResult(frame=frame, denoised=v2, denoised_d1=v1,
                           illum_diff=t_illum, render_ms=(t1 - t0) * 1e3,
                           denoise_ms=(t2 - t1) * 1e3, reproj=reproj)


# ---------------------------------------------------------------------------
# Offline harness

def _camera_doc(cam: Camera) -> dict:
    return {
        "position": [float(v) for v in cam.position],
        "forward": [float(v) for v in cam.forward],
        "up": [float(v) for v in cam.up],
        "vfov": float(cam.vfov),
        "width": int(cam.width),
        "height": int(cam.height),
        "near": float(cam.near),
    }


def camera_from_doc(doc: dict) -> Camera:
    return Camera(np.asarray(doc["position"]), np.asarray(doc["forward"]),
                  np.asarray(doc["up"]), float(doc["vfov"]),
                  int(doc["width"]), int(doc["height"]), float(doc["near"]))


def write_frame_outputs(outdir, result: FrameResult, dump_aux=False,
                        dump_validity=False):
    t = result.frame.index
    for eye in ("L", "R"):
        stem = os.path.join(outdir, f"frame_{t:05d}_{eye}")
        final = result.denoised[eye]
        write_pfm(stem + ".pfm", final)
        write_png(stem + ".png", tonemap(final))
        if dump_aux:
            ef = result.frame.eyes[eye]
            gb = ef.gbuffer
            write_pfm(stem + "_raw.pfm", ef.radiance)
            write_pfm(stem + "_gbuf_albedo.pfm", gb.albedo)
            octa = octa_encode(gb.unit_gradient.astype(np.float64))
            octa[~gb.covered] = 2.0  # sentinel: no gradient stored
            depth = np.where(np.isfinite(gb.depth), gb.depth, DEPTH_SENTINEL)
            normdepth = np.concatenate([octa, depth[..., None]], axis=-1)
            write_pfm(stem + "_gbuf_normdepth.pfm", normdepth.astype(np.float32))
            pos = np.where(gb.covered[..., None], gb.x, DEPTH_SENTINEL)
            write_pfm(stem + "_gbuf_position.pfm", pos.astype(np.float32))
            with open(stem + "_camera.yaml", "w") as f:
                yaml.safe_dump(_camera_doc(ef.camera), f, sort_keys=False)
        if dump_validity:
            rp = result.reproj[eye]
            mask = np.stack([rp.stereo.valid, rp.prev.valid,
                             rp.prev_stereo.valid], axis=-1)
            write_png(stem + "_validity.png",
                      (mask * 255).astype(np.uint8))


def run_offline(config: SessionConfig, scene: Scene | None = None,
                progress=None):
    """Render the configured camera path; returns the list of FrameResults'
    T values and writes frames + manifest into config.output."""
    if config.output is None:
        raise PipelineError("offline runs need an output directory")
    for p in (config.volume, config.transfer_function):
        if scene is None and not str(p).startswith("preset:") and not os.path.exists(p):
            raise PipelineError(f"missing input file {p}")
    os.makedirs(config.output, exist_ok=True)
    poses = path_from_config(config.camera)
    pipeline = Pipeline(config, scene=scene)
    manifest = []
    for i, (position, orientation) in enumerate(poses):
        result = pipeline.step(position, orientation)
        write_frame_outputs(config.output, result, config.dump_aux,
                            config.dump_validity)
        manifest.append({"frame": i, "T": result.illum_diff,
                         "files": [f"frame_{i:05d}_L.pfm",
                                   f"frame_{i:05d}_R.pfm"]})
        if progress:
            progress(i, len(poses), result)
        log.info("frame %d/%d T=%.4f render=%.1fms denoise=%.1fms",
                 i + 1, len(poses), result.illum_diff, result.render_ms,
                 result.denoise_ms)
    with open(os.path.join(config.output, "manifest.json"), "w") as f:
        json.dump({"frames": manifest}, f, indent=2, sort_keys=True)
    return manifest
