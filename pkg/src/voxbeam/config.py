"""Session configuration: one YAML file drives both the offline harness and
the streaming service."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import yaml

from .denoise import BilateralParams
from .render import RenderMode, RenderSettings
from .reproject import ReprojectionParams

MAX_EYE_WIDTH = 1440
MAX_EYE_HEIGHT = 936


@dataclass
class SessionConfig:
    volume: str
    transfer_function: str            # path or "preset:<name>"
    environment: dict                 # kind: static | sequence | fisheye_dir
    mode: RenderMode = RenderMode.VPT_ENV
    width: int = 256                  # per eye
    height: int = 256
    spp: int = 2
    seed: int = 0
    ipd: float = 0.065
    vfov_deg: float = 60.0
    near: float = 0.01
    sphere_radius: float = 3.0
    grid_n: int = 8
    illum_extremal: str = "min"
    hdr_percentile: float = 95.0
    hdr_floor: float = 0.9
    hdr_boost: float = 50.0
    prefilter_levels: int = 4
    fisheye_fov_deg: float = 200.0
    denoiser: BilateralParams = field(default_factory=BilateralParams)
    reprojection: ReprojectionParams = field(default_factory=ReprojectionParams)
    render_settings: RenderSettings = field(default_factory=RenderSettings)
    camera: dict = field(default_factory=lambda: {"kind": "orbit", "frames": 1,
                                                  "radius": 2.0})
    volume_offset: tuple = (0.0, 0.0, 0.0)
    output: str | None = None
    dump_aux: bool = False
    dump_validity: bool = False
    lockstep: bool = False            # serve: one frame per control message
    packet_encoding: int = 0          # 0 = raw RGB8, 1 = PNG

    def __post_init__(self):
        self.mode = RenderMode.parse(self.mode)
        if not (1 <= self.width <= MAX_EYE_WIDTH):
            raise ValueError(f"width must lie in [1, {MAX_EYE_WIDTH}]")
        if not (1 <= self.height <= MAX_EYE_HEIGHT):
            raise ValueError(f"height must lie in [1, {MAX_EYE_HEIGHT}]")
        if self.spp < 1:
            raise ValueError("spp must be >= 1")
        if self.illum_extremal not in ("min", "max"):
            raise ValueError("illum_extremal must be 'min' or 'max'")


def _dataclass_from(cls, mapping):
    if not mapping:
        return cls()
    return cls(**mapping)


def load_config(path) -> SessionConfig:
    path = os.fspath(path)
    base = os.path.dirname(os.path.abspath(path))
    with open(path) as f:
        doc = yaml.safe_load(f) or {}

    def resolve(p):
        return p if os.path.isabs(p) or p.startswith("preset:") else os.path.join(base, p)

    env = dict(doc.get("environment") or {})
    if "path" in env:
        env["path"] = resolve(env["path"])
    for entry in env.get("entries", []):
        entry["path"] = resolve(entry["path"])

    kwargs = {k: v for k, v in doc.items()
              if k not in ("environment", "denoiser", "reprojection",
                           "render_settings", "volume", "transfer_function",
                           "output", "volume_offset")}
    cfg = SessionConfig(
        volume=resolve(doc["volume"]),
        transfer_function=(doc["transfer_function"]
                           if str(doc["transfer_function"]).startswith("preset:")
                           else resolve(doc["transfer_function"])),
        environment=env,
        denoiser=_dataclass_from(BilateralParams, doc.get("denoiser")),
        reprojection=_dataclass_from(ReprojectionParams, doc.get("reprojection")),
        render_settings=_dataclass_from(RenderSettings, doc.get("render_settings")),
        volume_offset=tuple(doc.get("volume_offset", (0.0, 0.0, 0.0))),
        output=resolve(doc["output"]) if doc.get("output") else None,
        **kwargs,
    )
    return cfg


def save_config(path, cfg: SessionConfig) -> None:
    doc = {
        "volume": cfg.volume,
        "transfer_function": cfg.transfer_function,
        "environment": cfg.environment,
        "mode": cfg.mode.value,
        "width": cfg.width,
        "height": cfg.height,
        "spp": cfg.spp,
        "seed": cfg.seed,
        "ipd": cfg.ipd,
        "vfov_deg": cfg.vfov_deg,
        "sphere_radius": cfg.sphere_radius,
        "grid_n": cfg.grid_n,
        "illum_extremal": cfg.illum_extremal,
        "prefilter_levels": cfg.prefilter_levels,
        "denoiser": vars(cfg.denoiser).copy(),
        "reprojection": vars(cfg.reprojection).copy(),
        "camera": cfg.camera,
        "volume_offset": list(cfg.volume_offset),
        "lockstep": cfg.lockstep,
    }
    if cfg.output:
        doc["output"] = cfg.output
    if cfg.dump_aux:
        doc["dump_aux"] = True
    with open(path, "w") as f:
        yaml.safe_dump(doc, f, sort_keys=False)
