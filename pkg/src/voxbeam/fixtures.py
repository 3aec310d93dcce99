"""Synthetic volumes, transfer functions and panoramas.

These generators back the test suite, the acceptance harness and the demo
scripts; everything is deterministic.
"""

from __future__ import annotations

import numpy as np

from .envlight import CAMERA, HDR, LDR, RadianceMap, make_map
from .render import Scene
from .volume import TransferFunction, VolumeGrid


def make_blob_volume(n: int = 64, bits: int = 8) -> VolumeGrid:
    """Smooth two-lobe blob in [-0.5, 0.5]^3 (values peak near the center)."""
    axis = np.linspace(-0.5, 0.5, n)
    x, y, z = np.meshgrid(axis, axis, axis, indexing="ij")
    r1 = np.sqrt((x - 0.08) ** 2 + y ** 2 + z ** 2)
    r2 = np.sqrt((x + 0.15) ** 2 + (y - 0.1) ** 2 + (z + 0.05) ** 2)
    field = np.exp(-(r1 / 0.22) ** 2) + 0.7 * np.exp(-(r2 / 0.16) ** 2)
    field = np.clip(field / field.max(), 0.0, 1.0)
    peak = 255 if bits == 8 else 65535
    field = np.rint(field * peak) / peak
    spacing = 1.0 / (n - 1)
    return VolumeGrid(dims=(n, n, n), spacing=(spacing,) * 3,
                      origin=(-0.5, -0.5, -0.5),
                      values=field.astype(np.float32), bits=bits)


def make_constant_volume(value: float, n: int = 8, extent: float = 1.0,
                         origin=None) -> VolumeGrid:
    spacing = extent / (n - 1)
    if origin is None:
        origin = (-extent / 2.0,) * 3
    return VolumeGrid(dims=(n, n, n), spacing=(spacing,) * 3, origin=tuple(origin),
                      values=np.full((n, n, n), value, dtype=np.float32), bits=8)


def make_sphere_volume(n: int = 64, radius: float = 0.4) -> VolumeGrid:
    """Hard ball of value 1 (voxelized, trilinear edges)."""
    axis = np.linspace(-0.5, 0.5, n)
    x, y, z = np.meshgrid(axis, axis, axis, indexing="ij")
    field = (np.sqrt(x * x + y * y + z * z) <= radius).astype(np.float32)
    spacing = 1.0 / (n - 1)
    return VolumeGrid(dims=(n, n, n), spacing=(spacing,) * 3,
                      origin=(-0.5, -0.5, -0.5), values=field, bits=8)


def make_default_tf(sigma_max: float = 12.0) -> TransferFunction:
    # zero extinction below 0.32 cuts the faint halo away, the usual DVR
    # air/noise rejection; a steep ramp keeps the filterable surface crisp
    nodes = (
        (0.0, (1.0, 1.0, 1.0), 0.0),
        (0.32, (0.9, 0.7, 0.4), 0.0),
        (0.5, (0.9, 0.45, 0.25), 0.7),
        (1.0, (0.95, 0.9, 0.85), 1.0),
    )
    return TransferFunction(nodes=nodes, sigma_max=sigma_max)


def make_uniform_tf(albedo=(1.0, 1.0, 1.0), scale: float = 1.0,
                    sigma_max: float = 2.0) -> TransferFunction:
    nodes = ((0.0, tuple(albedo), scale), (1.0, tuple(albedo), scale))
    return TransferFunction(nodes=nodes, sigma_max=sigma_max)


def fixture_scene(n: int = 64) -> Scene:
    return Scene(grid=make_blob_volume(n), tf=make_default_tf())


# ---------------------------------------------------------------------------
# Panoramas

def make_sky_panorama(height: int = 256, sun_azimuth: float = 0.8,
                      sun_polar: float = 0.9, sun_radius: float = 0.12,
                      ground=(0.18, 0.15, 0.12), zenith=(0.35, 0.45, 0.6),
                      kind: str = LDR) -> RadianceMap:
    """Smooth sky gradient with a saturated sun disk."""
    width = 2 * height
    rows = (np.arange(height) + 0.5) * (np.pi / height)
    cols = -np.pi + (np.arange(width) + 0.5) * (2 * np.pi / width)
    theta = rows[:, None] * np.ones((1, width))
    phi = np.ones((height, 1)) * cols[None, :]
    tsky = np.clip(theta / np.pi, 0, 1)[..., None]
    img = (1 - tsky) * np.asarray(zenith) + tsky * np.asarray(ground)
    # angular distance to the sun center
    d = (np.sin(theta) * np.sin(sun_polar) * np.cos(phi - sun_azimuth)
         + np.cos(theta) * np.cos(sun_polar))
    sun = np.clip((d - np.cos(sun_radius)) / (1 - np.cos(sun_radius)), 0, 1) ** 0.5
    img = img * (1 - sun[..., None]) + sun[..., None] * 1.0
    return make_map(np.clip(img, 0, 1), kind, CAMERA)


def make_smooth_panorama(seed: int = 0, height: int = 256,
                         kind: str = LDR) -> RadianceMap:
    """Random low-frequency panorama (sums of spherical sinusoids)."""
    rng = np.random.default_rng(seed)
    width = 2 * height
    rows = (np.arange(height) + 0.5) * (np.pi / height)
    cols = -np.pi + (np.arange(width) + 0.5) * (2 * np.pi / width)
    theta = rows[:, None]
    phi = cols[None, :]
    img = np.zeros((height, width, 3))
    for c in range(3):
        acc = np.zeros((height, width))
        for _ in range(4):
            m = rng.integers(0, 3)
            k = rng.integers(1, 3)
            a = rng.uniform(0.1, 0.5)
            p0 = rng.uniform(0, 2 * np.pi)
            acc += a * np.cos(m * phi + p0) * np.cos(k * theta)
        img[..., c] = acc
    img = (img - img.min()) / (img.max() - img.min() + 1e-12)
    img = 0.05 + 0.9 * img
    return make_map(img, kind, CAMERA)


def make_uniform_env(value: float = 1.0, height: int = 64,
                     frame: str = "WARPED") -> RadianceMap:
    px = np.full((height, 2 * height, 3), value, dtype=np.float32)
    return RadianceMap(px, HDR, frame)


def make_hot_texel_env(height: int = 32, row: int | None = None,
                       col: int | None = None, hot: float = 1.0e6,
                       base: float = 1.0) -> RadianceMap:
    px = np.full((height, 2 * height, 3), base, dtype=np.float32)
    r = height // 2 if row is None else row
    c = height if col is None else col
    px[r, c] = hot
    return RadianceMap(px, HDR, "WARPED")
