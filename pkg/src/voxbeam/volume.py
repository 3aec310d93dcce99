"""Scalar volume grid, transfer function, and the field queries feeding every
render mode.

A :class:`VolumeGrid` stores one normalized scalar per grid point; point
(i, j, k) sits at ``origin + (i*sx, j*sy, k*sz)``. Trilinear interpolation is
defined inside the bounding box ``[origin, origin + (dims-1)*spacing]`` and
the field is exactly zero outside, so environment light passes untouched
around the data.

Volumes load from a YAML header (keys: dims, spacing, bits, origin,
data_file) plus a raw little-endian array, x-fastest.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import yaml


@dataclass(frozen=True)
class VolumeGrid:
    dims: tuple            # (nx, ny, nz), each >= 2
    spacing: tuple         # world units per voxel step
    origin: tuple          # world position of grid point (0, 0, 0)
    values: np.ndarray     # float32 (nx, ny, nz), all in [0, 1]
    bits: int = 8

    def __post_init__(self):
        nx, ny, nz = self.dims
        if min(nx, ny, nz) < 2:
            raise ValueError(f"every axis needs >= 2 samples, got dims={self.dims}")
        if self.values.shape != (nx, ny, nz):
            raise ValueError(f"values shape {self.values.shape} != dims {self.dims}")
        if self.bits not in (8, 16):
            raise ValueError(f"bits must be 8 or 16, got {self.bits}")
        vmin, vmax = float(self.values.min()), float(self.values.max())
        if vmin < 0.0 or vmax > 1.0:
            raise ValueError(f"values outside [0,1]: min={vmin} max={vmax}")

    @property
    def bbox_min(self):
        return np.asarray(self.origin, dtype=np.float64)

    @property
    def bbox_max(self):
        d = np.asarray(self.dims, dtype=np.float64) - 1.0
        return self.bbox_min + d * np.asarray(self.spacing, dtype=np.float64)

    @property
    def center(self):
        return 0.5 * (self.bbox_min + self.bbox_max)


def sample(grid: VolumeGrid, p) -> np.ndarray:
    """Trilinear field lookup at world point(s) ``p`` (..., 3); 0 outside."""
    p = np.asarray(p, dtype=np.float64)
    scalar_in = p.ndim == 1
    p = np.atleast_2d(p)
    g = (p - grid.bbox_min) / np.asarray(grid.spacing, dtype=np.float64)
    nx, ny, nz = grid.dims
    hi = np.array([nx - 1, ny - 1, nz - 1], dtype=np.float64)
    inside = np.all((g >= 0.0) & (g <= hi), axis=-1)

    gc = np.clip(g, 0.0, hi)
    i0 = np.minimum(np.floor(gc).astype(np.int64), (hi - 1).astype(np.int64))
    f = gc - i0
    ix, iy, iz = i0[..., 0], i0[..., 1], i0[..., 2]
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    v = grid.values
    c00 = v[ix, iy, iz] * (1 - fx) + v[ix + 1, iy, iz] * fx
    c10 = v[ix, iy + 1, iz] * (1 - fx) + v[ix + 1, iy + 1, iz] * fx
    c01 = v[ix, iy, iz + 1] * (1 - fx) + v[ix + 1, iy, iz + 1] * fx
    c11 = v[ix, iy + 1, iz + 1] * (1 - fx) + v[ix + 1, iy + 1, iz + 1] * fx
    out = ((c00 * (1 - fy) + c10 * fy) * (1 - fz)
           + (c01 * (1 - fy) + c11 * fy) * fz)
    out = np.where(inside, out, 0.0)
    return float(out[0]) if scalar_in else out


def gradient(grid: VolumeGrid, p) -> np.ndarray:
    """Central-difference gradient with step = one voxel spacing per axis.

    Zero vector at points outside the grid bounding box.
    """
    p = np.asarray(p, dtype=np.float64)
    scalar_in = p.ndim == 1
    p = np.atleast_2d(p)
    sp = np.asarray(grid.spacing, dtype=np.float64)
    out = np.zeros_like(p)
    for ax in range(3):
        step = np.zeros(3)
        step[ax] = sp[ax]
        out[..., ax] = (sample(grid, p + step) - sample(grid, p - step)) / (2.0 * sp[ax])
    inside = np.all((p >= grid.bbox_min) & (p <= grid.bbox_max), axis=-1)
    out = np.where(inside[..., None], out, 0.0)
    return out[0] if scalar_in else out


@dataclass(frozen=True)
class TransferFunction:
    """Piecewise-linear classification: scalar -> (albedo rgb, extinction).

    ``nodes`` is an ordered list of (scalar, rgb, extinction_scale); node
    scalars are strictly increasing with first = 0 and last = 1, scales lie
    in [0, 1] so extinction never exceeds ``sigma_max``.
    """
    nodes: tuple
    sigma_max: float
    scalars: np.ndarray = field(init=False, repr=False)
    rgb: np.ndarray = field(init=False, repr=False)
    scale: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.sigma_max <= 0:
            raise ValueError("sigma_max must be > 0")
        s = np.array([n[0] for n in self.nodes], dtype=np.float64)
        rgb = np.array([n[1] for n in self.nodes], dtype=np.float64)
        sc = np.array([n[2] for n in self.nodes], dtype=np.float64)
        if len(s) < 2 or s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise ValueError("node scalars must be strictly increasing from 0 to 1")
        if rgb.min() < 0 or rgb.max() > 1:
            raise ValueError("node rgb values must lie in [0,1]")
        if sc.min() < 0 or sc.max() > 1:
            raise ValueError("extinction scales must lie in [0,1]")
        object.__setattr__(self, "scalars", s)
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "scale", sc)

    def lipschitz_bound(self) -> float:
        """Largest per-component slope of the piecewise-linear lookup."""
        ds = np.diff(self.scalars)
        slopes = [np.abs(np.diff(self.rgb, axis=0)) / ds[:, None],
                  np.abs(np.diff(self.scale))[:, None] * self.sigma_max / ds[:, None]]
        return float(max(s.max() for s in slopes))


def classify(tf: TransferFunction, s):
    """Lookup albedo rgb and extinction sigma_t at scalar(s) ``s`` (clamped)."""
    s = np.asarray(s, dtype=np.float64)
    scalar_in = s.ndim == 0
    s = np.clip(np.atleast_1d(s), 0.0, 1.0)
    idx = np.clip(np.searchsorted(tf.scalars, s, side="right") - 1, 0, len(tf.scalars) - 2)
    s0 = tf.scalars[idx]
    s1 = tf.scalars[idx + 1]
    t = (s - s0) / (s1 - s0)
    rgb = tf.rgb[idx] * (1 - t[..., None]) + tf.rgb[idx + 1] * t[..., None]
    sigma = (tf.scale[idx] * (1 - t) + tf.scale[idx + 1] * t) * tf.sigma_max
    if scalar_in:
        return rgb[0], float(sigma[0])
    return rgb, sigma


# ---------------------------------------------------------------------------
# File format

def save_volume(header_path, grid: VolumeGrid, data_file=None) -> None:
    header_path = os.fspath(header_path)
    if data_file is None:
        data_file = os.path.splitext(os.path.basename(header_path))[0] + ".raw"
    peak = 255 if grid.bits == 8 else 65535
    dtype = "<u1" if grid.bits == 8 else "<u2"
    quantized = np.rint(grid.values * peak).astype(dtype)
    raw_path = os.path.join(os.path.dirname(header_path), data_file)
    # x-fastest storage: write as (z, y, x) C-order
    np.ascontiguousarray(quantized.transpose(2, 1, 0)).tofile(raw_path)
    header = {
        "dims": [int(d) for d in grid.dims],
        "spacing": [float(v) for v in grid.spacing],
        "origin": [float(v) for v in grid.origin],
        "bits": int(grid.bits),
        "data_file": data_file,
    }
    with open(header_path, "w") as f:
        yaml.safe_dump(header, f, sort_keys=False)


def load_volume(header_path) -> VolumeGrid:
    header_path = os.fspath(header_path)
    with open(header_path) as f:
        header = yaml.safe_load(f)
    for key in ("dims", "spacing", "bits", "origin", "data_file"):
        if key not in header:
            raise ValueError(f"volume header missing key {key!r}")
    dims = tuple(int(d) for d in header["dims"])
    bits = int(header["bits"])
    dtype, peak = ("<u1", 255.0) if bits == 8 else ("<u2", 65535.0)
    raw_path = os.path.join(os.path.dirname(header_path), header["data_file"])
    data = np.fromfile(raw_path, dtype=dtype)
    expected = dims[0] * dims[1] * dims[2]
    if data.size != expected:
        raise ValueError(f"raw file holds {data.size} samples, header implies {expected}")
    values = (data.astype(np.float32) / peak).reshape(dims[2], dims[1], dims[0]).transpose(2, 1, 0)
    return VolumeGrid(
        dims=dims,
        spacing=tuple(float(v) for v in header["spacing"]),
        origin=tuple(float(v) for v in header["origin"]),
        values=np.ascontiguousarray(values),
        bits=bits,
    )


def save_transfer_function(path, tf: TransferFunction) -> None:
    doc = {
        "sigma_max": float(tf.sigma_max),
        "nodes": [
            {"scalar": float(s), "rgb": [float(c) for c in rgb], "scale": float(sc)}
            for s, rgb, sc in tf.nodes
        ],
    }
    with open(path, "w") as f:
        yaml.safe_dump(doc, f, sort_keys=False)


def load_transfer_function(path) -> TransferFunction:
    with open(path) as f:
        doc = yaml.safe_load(f)
    nodes = tuple(
        (float(n["scalar"]), tuple(float(c) for c in n["rgb"]), float(n["scale"]))
        for n in doc["nodes"]
    )
    return TransferFunction(nodes=nodes, sigma_max=float(doc["sigma_max"]))
