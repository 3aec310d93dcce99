"""Image I/O and the linear-light export path.

Conventions used across the project:
  * images are numpy arrays, row 0 at the top, shape (H, W, 3) or (H, W)
  * PFM files carry 32-bit little-endian floats, rows bottom-to-top,
    scale header -1.0 ("PF" = rgb, "Pf" = grayscale)
  * PNG files are 8-bit RGB; loading maps to [0, 1] floats
  * rendering is linear; Reinhard + gamma 2.2 is applied only on export
"""

from __future__ import annotations

import numpy as np
from PIL import Image

LUMA = np.array([0.2126, 0.7152, 0.0722], dtype=np.float64)


def luminance(rgb):
    """Rec.709 luminance of an (..., 3) array."""
    return np.asarray(rgb, dtype=np.float64) @ LUMA


# ---------------------------------------------------------------------------
# PFM

def write_pfm(path, image) -> None:
    image = np.asarray(image, dtype=np.float32)
    if image.ndim == 2:
        header = b"Pf"
    elif image.ndim == 3 and image.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError(f"PFM supports (H,W) or (H,W,3) arrays, got {image.shape}")
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(image[::-1]).astype("<f4").tobytes())


def read_pfm(path):
    with open(path, "rb") as f:
        ident = f.readline().strip()
        if ident == b"PF":
            channels = 3
        elif ident == b"Pf":
            channels = 1
        else:
            raise ValueError(f"not a PFM file: identifier {ident!r}")
        w, h = (int(tok) for tok in f.readline().split())
        scale = float(f.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(4 * w * h * channels), dtype=dtype)
    image = data.reshape(h, w, channels)[::-1]
    if channels == 1:
        image = image[..., 0]
    return np.ascontiguousarray(image.astype(np.float32))


# ---------------------------------------------------------------------------
# PNG

def write_png(path, image_u8) -> None:
    arr = np.asarray(image_u8)
    if arr.dtype != np.uint8:
        raise ValueError("write_png expects uint8 data; tone map first")
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def read_png(path):
    """Load an 8-bit RGB PNG as float32 in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return arr / 255.0


# ---------------------------------------------------------------------------
# Export path

def tonemap(linear_rgb):
    """Per-channel Reinhard then gamma 2.2, to uint8."""
    x = np.maximum(np.asarray(linear_rgb, dtype=np.float32), 0.0)
    y = (x / (1.0 + x)) ** (1.0 / 2.2)
    return np.clip(np.floor(y * 255.0 + 0.5), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Resampling

def bilinear_gather(image, py, px):
    """Sample ``image`` (H,W) or (H,W,C) at subpixel rows ``py``, cols ``px``.

    Coordinates are clamped to the valid range (no wrap); callers mask out
    samples they consider invalid.
    """
    from . import kernels  # local import: keep imageio importable standalone

    image = np.asarray(image)
    py = np.asarray(py, dtype=np.float64)
    px = np.asarray(px, dtype=np.float64)
    squeeze = image.ndim == 2
    img3 = image[..., None] if squeeze else image
    img3 = np.ascontiguousarray(img3, dtype=np.float32 if image.dtype == np.float32
                                else np.float64)
    out = np.empty((py.size, img3.shape[2]), dtype=img3.dtype)
    kernels.gather_bilinear(img3, py.ravel(), px.ravel(), out)
    out = out.reshape(py.shape + (img3.shape[2],))
    return out[..., 0] if squeeze else out


def nearest_gather(image, py, px):
    h, w = image.shape[:2]
    iy = np.clip(np.rint(np.asarray(py)), 0, h - 1).astype(np.int64)
    ix = np.clip(np.rint(np.asarray(px)), 0, w - 1).astype(np.int64)
    return image[iy, ix]


# ---------------------------------------------------------------------------
# Unit-vector packing for G-buffer dumps

def octa_encode(n):
    """Octahedral encoding of unit vectors (..., 3) -> (..., 2) in [-1, 1]."""
    n = np.asarray(n, dtype=np.float64)
    denom = np.abs(n).sum(axis=-1, keepdims=True)
    denom = np.where(denom == 0.0, 1.0, denom)
    p = n[..., :2] / denom
    neg = n[..., 2] < 0.0
    flipped = (1.0 - np.abs(p[..., ::-1])) * np.where(p >= 0.0, 1.0, -1.0)
    return np.where(neg[..., None], flipped, p)


def octa_decode(p):
    p = np.asarray(p, dtype=np.float64)
    z = 1.0 - np.abs(p[..., 0]) - np.abs(p[..., 1])
    xy = p.copy()
    neg = z < 0.0
    flipped = (1.0 - np.abs(p[..., ::-1])) * np.where(p >= 0.0, 1.0, -1.0)
    xy = np.where(neg[..., None], flipped, xy)
    n = np.concatenate([xy, z[..., None]], axis=-1)
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    norm = np.where(norm == 0.0, 1.0, norm)
    return n / norm
