"""Panoramic environment lighting: dual-fisheye stitching, pose calibration,
volume-centered warping, LDR->HDR estimation, importance sampling, and the
patch-wise inter-frame illumination difference.

Equirectangular convention (shared with the renderer): column maps to azimuth
phi in [-pi, pi) measured from +x toward +y, row maps to polar theta in
[0, pi] from the +z axis; ``direction = (sin t cos p, sin t sin p, cos t)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import quat
from .imageio import luminance

LDR, HDR = "LDR", "HDR"
CAMERA, WORLD, WARPED = "CAMERA", "WORLD", "WARPED"

DEFAULT_PANO_WIDTH = 512
DEFAULT_PANO_HEIGHT = 256
DEFAULT_FOV_DEG = 200.0
DEFAULT_SPHERE_RADIUS = 3.0
DEFAULT_GRID_N = 8

T_EPSILON = 1e-6


@dataclass(frozen=True)
class RadianceMap:
    pixels: np.ndarray      # float32 (H, W, 3)
    kind: str               # LDR or HDR
    frame: str              # CAMERA, WORLD or WARPED

    def __post_init__(self):
        h, w = self.pixels.shape[:2]
        if w != 2 * h:
            raise ValueError(f"equirectangular maps need width == 2*height, got {w}x{h}")
        if self.kind not in (LDR, HDR):
            raise ValueError(f"kind must be LDR or HDR, got {self.kind!r}")
        if self.frame not in (CAMERA, WORLD, WARPED):
            raise ValueError(f"unknown frame {self.frame!r}")
        if not np.all(np.isfinite(self.pixels)):
            raise ValueError("radiance map contains non-finite pixels")
        if self.pixels.min() < 0.0:
            raise ValueError("radiance map contains negative pixels")
        if self.kind == LDR and self.pixels.max() > 1.0 + 1e-6:
            raise ValueError("LDR maps must lie in [0,1]")

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]


def make_map(pixels, kind=LDR, frame=CAMERA) -> RadianceMap:
    return RadianceMap(np.ascontiguousarray(pixels, dtype=np.float32), kind, frame)


# ---------------------------------------------------------------------------
# Equirectangular geometry

def texel_directions(height: int, width: int):
    """Unit direction of every texel center, shape (H, W, 3)."""
    rows = (np.arange(height) + 0.5) * (np.pi / height)
    cols = -np.pi + (np.arange(width) + 0.5) * (2.0 * np.pi / width)
    theta = rows[:, None]
    phi = cols[None, :]
    st = np.sin(theta)
    d = np.empty((height, width, 3))
    d[..., 0] = st * np.cos(phi)
    d[..., 1] = st * np.sin(phi)
    d[..., 2] = np.cos(theta) * np.ones_like(phi)
    return d


def direction_to_coords(d, height: int, width: int):
    """Map unit directions (..., 3) to fractional (row, col) texel coords."""
    d = np.asarray(d, dtype=np.float64)
    theta = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
    phi = np.arctan2(d[..., 1], d[..., 0])
    row = theta / np.pi * height - 0.5
    col = (phi + np.pi) / (2.0 * np.pi) * width - 0.5
    return row, col


def lookup_bilinear(pixels, d):
    """Bilinear lookup of directions (..., 3): wraps azimuth, clamps polar."""
    h, w = pixels.shape[:2]
    row, col = direction_to_coords(d, h, w)
    r0 = np.floor(row).astype(np.int64)
    c0 = np.floor(col).astype(np.int64)
    fr = (row - r0)[..., None]
    fc = (col - c0)[..., None]
    r0c = np.clip(r0, 0, h - 1)
    r1c = np.clip(r0 + 1, 0, h - 1)
    c0w = c0 % w
    c1w = (c0 + 1) % w
    top = pixels[r0c, c0w] * (1 - fc) + pixels[r0c, c1w] * fc
    bot = pixels[r1c, c0w] * (1 - fc) + pixels[r1c, c1w] * fc
    return top * (1 - fr) + bot * fr


def lookup_nearest(pixels, d):
    h, w = pixels.shape[:2]
    row, col = direction_to_coords(d, h, w)
    r = np.clip(np.rint(row).astype(np.int64), 0, h - 1)
    c = np.rint(col).astype(np.int64) % w
    return pixels[r, c]


# ---------------------------------------------------------------------------
# Dual-fisheye stitching (equidistant lens model, r = f * theta)

@dataclass(frozen=True)
class FisheyePair:
    front: np.ndarray       # float32 (S, S, 3), LDR
    back: np.ndarray
    fov_deg: float = DEFAULT_FOV_DEG
    # maps back-lens coordinates into the front-lens (camera) frame
    rotation: np.ndarray = field(default_factory=lambda: quat.from_axis_angle((0, 0, 1), np.pi))

    def __post_init__(self):
        if not (180.0 < self.fov_deg < 250.0):
            raise ValueError(f"fov_deg must lie in (180, 250), got {self.fov_deg}")
        if self.front.shape != self.back.shape:
            raise ValueError("front/back images must have equal shape")
        if self.front.ndim != 3 or self.front.shape[0] != self.front.shape[1]:
            raise ValueError("fisheye images must be square (S, S, 3)")


def _lens_pixel_coords(d_lens, size: int, fov_rad: float):
    """Equidistant projection of lens-frame directions onto fisheye pixels.

    Lens frame: optical axis +x, up +z (image up), left +y.
    """
    theta = np.arccos(np.clip(d_lens[..., 0], -1.0, 1.0))
    sin_t = np.sin(theta)
    safe = np.where(sin_t > 1e-12, sin_t, 1.0)
    u = -d_lens[..., 1] / safe
    v = -d_lens[..., 2] / safe
    f = (size / 2.0) / (fov_rad / 2.0)
    r = f * theta
    cx = (size - 1) / 2.0
    col = cx + r * u
    row = cx + r * v
    return row, col, theta


def _bilinear_clamped(img, row, col):
    h, w = img.shape[:2]
    row = np.clip(row, 0.0, h - 1.0)
    col = np.clip(col, 0.0, w - 1.0)
    r0 = np.floor(row).astype(np.int64)
    c0 = np.floor(col).astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (row - r0)[..., None]
    fc = (col - c0)[..., None]
    top = img[r0, c0] * (1 - fc) + img[r0, c1] * fc
    bot = img[r1, c0] * (1 - fc) + img[r1, c1] * fc
    return top * (1 - fr) + bot * fr


def stitch_weights(pair: FisheyePair, height: int, width: int):
    """Per-texel feathering weights (w_front, w_back) of the output panorama."""
    d = texel_directions(height, width)
    fov = np.radians(pair.fov_deg)
    half = fov / 2.0
    band = fov - np.pi  # angular width of the mutual-coverage ring
    axis_f = np.array([1.0, 0.0, 0.0])
    axis_b = quat.rotate(pair.rotation, axis_f)
    theta_f = np.arccos(np.clip(d @ axis_f, -1.0, 1.0))
    theta_b = np.arccos(np.clip(d @ axis_b, -1.0, 1.0))
    w_f = np.clip((half - theta_f) / band, 0.0, 1.0)
    w_b = np.clip((half - theta_b) / band, 0.0, 1.0)
    return w_f, w_b


def stitch(pair: FisheyePair, height: int = DEFAULT_PANO_HEIGHT,
           width: int = DEFAULT_PANO_WIDTH) -> RadianceMap:
    """Stitch a fisheye pair into an LDR camera-frame panorama.

    Each output texel picks the lens covering its direction; inside the
    mutual-coverage ring the two samples are feathered linearly.
    """
    d = texel_directions(height, width)
    fov = np.radians(pair.fov_deg)
    size = pair.front.shape[0]
    w_f, w_b = stitch_weights(pair, height, width)
    total = w_f + w_b
    if np.any(total <= 0.0):
        raise ValueError("some directions fall outside both lens fields of view")

    row_f, col_f, _ = _lens_pixel_coords(d, size, fov)
    s_f = _bilinear_clamped(pair.front, row_f, col_f)
    d_back = quat.rotate(quat.conjugate(pair.rotation), d.reshape(-1, 3)).reshape(d.shape)
    row_b, col_b, _ = _lens_pixel_coords(d_back, size, fov)
    s_b = _bilinear_clamped(pair.back, row_b, col_b)

    out = (w_f[..., None] * s_f + w_b[..., None] * s_b) / total[..., None]
    return make_map(np.clip(out, 0.0, 1.0), LDR, CAMERA)


def synthesize_fisheye(pano: RadianceMap, size: int, fov_deg: float = DEFAULT_FOV_DEG,
                       rotation=None) -> FisheyePair:
    """Inverse of the stitch mapping: render a fisheye pair from a panorama.

    Used to build round-trip fixtures and to emulate a capture device.
    """
    if rotation is None:
        rotation = quat.from_axis_angle((0, 0, 1), np.pi)
    fov = np.radians(fov_deg)
    f = (size / 2.0) / (fov / 2.0)
    cx = (size - 1) / 2.0
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    u = (cols - cx) / f
    v = (rows - cx) / f
    theta = np.hypot(u, v)
    inside = theta <= fov / 2.0
    safe = np.where(theta > 1e-12, theta, 1.0)
    d_lens = np.empty((size, size, 3))
    d_lens[..., 0] = np.cos(theta)
    d_lens[..., 1] = -np.sin(theta) * u / safe
    d_lens[..., 2] = -np.sin(theta) * v / safe

    front = lookup_bilinear(pano.pixels, d_lens)
    d_cam = quat.rotate(rotation, d_lens.reshape(-1, 3)).reshape(d_lens.shape)
    back = lookup_bilinear(pano.pixels, d_cam)
    front[~inside] = 0.0
    back[~inside] = 0.0
    return FisheyePair(front.astype(np.float32), back.astype(np.float32),
                       fov_deg=fov_deg, rotation=np.asarray(rotation, dtype=np.float64))


# ---------------------------------------------------------------------------
# Calibration and warping

def _checked_pose(pose):
    pose = np.asarray(pose, dtype=np.float64)
    n = np.linalg.norm(pose)
    if abs(n - 1.0) > 1e-3:
        raise ValueError(f"pose quaternion norm {n:.6f} too far from 1")
    if abs(n - 1.0) > 1e-9:
        warnings.warn("normalizing slightly non-unit pose quaternion", stacklevel=3)
    if n != 1.0:
        pose = pose / n
    return pose


def calibrate(pano: RadianceMap, pose, method: str = "bilinear") -> RadianceMap:
    """Rotate a camera-frame panorama into the world frame.

    ``pose`` maps camera coordinates to world coordinates; each world
    direction d samples the input at pose^-1 * d. Pure rotation.
    """
    if pano.frame != CAMERA:
        raise ValueError(f"calibrate expects a CAMERA-frame map, got {pano.frame}")
    pose = _checked_pose(pose)
    h, w = pano.height, pano.width
    d_world = texel_directions(h, w).reshape(-1, 3)
    d_cam = quat.rotate(quat.conjugate(pose), d_world).reshape(h, w, 3)
    lookup = lookup_bilinear if method == "bilinear" else lookup_nearest
    out = lookup(pano.pixels, d_cam)
    return make_map(np.clip(out, 0.0, None), pano.kind, WORLD)


def capture_in_camera_frame(world: RadianceMap, pose, method: str = "bilinear") -> RadianceMap:
    """Emulate what a panorama camera at ``pose`` captures of a world-anchored
    environment: each camera direction d samples the world map at pose * d.

    This is the inverse of :func:`calibrate`; feeding its output through
    calibrate with the same pose reproduces the world map up to resampling.
    """
    pose = _checked_pose(pose)
    h, w = world.height, world.width
    d_cam = texel_directions(h, w).reshape(-1, 3)
    d_world = quat.rotate(pose, d_cam).reshape(h, w, 3)
    lookup = lookup_bilinear if method == "bilinear" else lookup_nearest
    out = lookup(world.pixels, d_world)
    return make_map(np.clip(out, 0.0, None), world.kind, CAMERA)


def warp_to_center(pano: RadianceMap, offset, sphere_radius: float = DEFAULT_SPHERE_RADIUS,
                   method: str = "bilinear") -> RadianceMap:
    """Re-center a world panorama at ``offset`` from the original viewpoint.

    The environment is modeled as a sphere of ``sphere_radius`` around the
    original viewpoint; every direction from the new center intersects that
    sphere and samples the panorama toward the intersection point.
    """
    if pano.frame != WORLD:
        raise ValueError(f"warp_to_center expects a WORLD-frame map, got {pano.frame}")
    offset = np.asarray(offset, dtype=np.float64)
    if np.linalg.norm(offset) >= sphere_radius:
        raise ValueError("offset must lie strictly inside the environment sphere")
    h, w = pano.height, pano.width
    d = texel_directions(h, w)
    od = d @ offset
    t = -od + np.sqrt(od * od + sphere_radius ** 2 - float(offset @ offset))
    p = offset[None, None, :] + t[..., None] * d
    p /= np.linalg.norm(p, axis=-1, keepdims=True)
    lookup = lookup_bilinear if method == "bilinear" else lookup_nearest
    out = lookup(pano.pixels, p)
    return make_map(np.clip(out, 0.0, None), pano.kind, WARPED)


# ---------------------------------------------------------------------------
# LDR -> HDR estimation

def detect_lights(pixels, percentile: float = 95.0, floor: float = 0.9):
    """Light-source mask and connected-component labels of an LDR panorama."""
    lum = luminance(pixels)
    thresh = max(np.percentile(lum, percentile), floor)
    mask = lum >= thresh
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    return mask, labels, count


def estimate_hdr(pano: RadianceMap, percentile: float = 95.0, floor: float = 0.9,
                 boost: float = 50.0) -> RadianceMap:
    """Deterministic LDR -> HDR expansion.

    Linearizes with gamma 2.2, detects light sources (luminance above both the
    given percentile and the absolute floor, grouped by connected components),
    and scales each light pixel by a factor interpolating from 1 at the floor
    up to ``boost`` at full saturation. Non-light pixels keep their linear
    value, so raising an input pixel never lowers its output.
    """
    if pano.kind != LDR:
        raise ValueError("estimate_hdr expects an LDR map")
    ldr = pano.pixels.astype(np.float64)
    linear = np.power(ldr, 2.2)
    mask, _, _ = detect_lights(ldr, percentile, floor)
    lum = luminance(ldr)
    t = np.clip((lum - floor) / max(1.0 - floor, 1e-9), 0.0, 1.0)
    gain = np.where(mask, 1.0 + (boost - 1.0) * t, 1.0)
    return make_map(linear * gain[..., None], HDR, pano.frame)


# ---------------------------------------------------------------------------
# Pre-filtered environment levels (baseline IBL mode)

def _gaussian_kernel(sigma: float):
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _blur_equirect(img, sigma: float):
    """Separable Gaussian: wraps horizontally, clamps vertically."""
    k = _gaussian_kernel(sigma)
    radius = len(k) // 2
    h, w = img.shape[:2]
    cols = (np.arange(-radius, w + radius)) % w
    padded = img[:, cols]
    out = np.zeros_like(img, dtype=np.float64)
    for i, kv in enumerate(k):
        out += kv * padded[:, i:i + w]
    rows = np.clip(np.arange(-radius, h + radius), 0, h - 1)
    padded = out[rows, :]
    out2 = np.zeros_like(out)
    for i, kv in enumerate(k):
        out2 += kv * padded[i:i + h, :]
    return out2


def prefilter(pano: RadianceMap, levels: int):
    """Blur/decimate pyramid: level 0 is the input, each further level blurs
    with a sigma that doubles and halves the resolution."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if levels > int(np.log2(pano.height)):
        raise ValueError(f"levels={levels} exceeds log2(height)={np.log2(pano.height):.1f}")
    out = [pano]
    current = pano.pixels.astype(np.float64)
    sigma = 1.0
    for _ in range(levels - 1):
        blurred = _blur_equirect(current, sigma)
        current = blurred[::2, ::2]
        out.append(make_map(np.clip(current, 0.0, None), pano.kind, pano.frame))
        sigma *= 2.0
    return out


def mean_radiance(pano: RadianceMap):
    """Solid-angle-weighted average color of a map (ambient fallback)."""
    h = pano.height
    theta_edges = np.linspace(0.0, np.pi, h + 1)
    band = np.cos(theta_edges[:-1]) - np.cos(theta_edges[1:])
    w = np.repeat(band[:, None], pano.width, axis=1)
    w = w / w.sum()
    return (pano.pixels.astype(np.float64) * w[..., None]).sum(axis=(0, 1))


# ---------------------------------------------------------------------------
# Importance sampling

@dataclass(frozen=True)
class EnvSampler:
    """Luminance-weighted texel sampler over an HDR map.

    Texels are weighted by luminance times exact texel solid angle, so a
    uniform map yields the uniform sphere density 1/(4 pi). Zero-luminance
    maps fall back to uniform sphere sampling.
    """
    pixels: np.ndarray        # float32 (H, W, 3)
    row_cdf: np.ndarray       # float64 (H,)
    col_cdf: np.ndarray       # float64 (H, W)
    pdf_texel: np.ndarray     # float64 (H, W), solid-angle density
    cos_edges: np.ndarray     # float64 (H+1,)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


def build_sampler(env: RadianceMap) -> EnvSampler:
    if env.kind != HDR:
        raise ValueError("EnvSampler requires an HDR map")
    h, w = env.height, env.width
    lum = luminance(env.pixels)
    theta_edges = np.linspace(0.0, np.pi, h + 1)
    cos_edges = np.cos(theta_edges)
    band = (cos_edges[:-1] - cos_edges[1:])        # per-row cos extent
    omega = (2.0 * np.pi / w) * band[:, None]      # exact texel solid angle
    weights = lum * omega
    total = weights.sum()
    if total <= 0.0:
        weights = np.broadcast_to(omega, (h, w)).copy()
        total = weights.sum()
    p = weights / total
    pdf_texel = p / omega
    row_p = p.sum(axis=1)
    row_cdf = np.cumsum(row_p)
    row_cdf[-1] = 1.0
    col_cdf = np.cumsum(p, axis=1)
    # normalize each row's conditional to end at 1 (guard empty rows)
    tail = col_cdf[:, -1:].copy()
    tail[tail == 0.0] = 1.0
    col_cdf = col_cdf / tail
    col_cdf[:, -1] = 1.0
    return EnvSampler(env.pixels, row_cdf, col_cdf, pdf_texel, cos_edges)


def sample_direction(sampler: EnvSampler, u):
    """Draw direction(s) from the sampler for uniforms ``u`` (..., 2).

    Returns (direction (...,3), pdf (...,), radiance (...,3)); pdf is in
    solid-angle measure and the radiance is a bilinear map lookup.
    """
    u = np.asarray(u, dtype=np.float64)
    scalar_in = u.ndim == 1
    u = np.atleast_2d(u)
    h, w = sampler.height, sampler.width
    u1, u2 = u[..., 0], u[..., 1]

    r = np.searchsorted(sampler.row_cdf, u1, side="right")
    r = np.clip(r, 0, h - 1)
    lo = np.where(r > 0, sampler.row_cdf[r - 1], 0.0)
    span = sampler.row_cdf[r] - lo
    fr = np.where(span > 0, (u1 - lo) / np.where(span > 0, span, 1.0), 0.5)

    # vectorized per-row searchsorted: shift row r's cdf into [2r, 2r+1]
    flat = (sampler.col_cdf + 2.0 * np.arange(h)[:, None]).ravel()
    c = np.searchsorted(flat, u2 + 2.0 * r, side="right") - r * w
    c = np.clip(c, 0, w - 1)
    cdf_rows = sampler.col_cdf[r]
    lo_c = np.where(c > 0, np.take_along_axis(cdf_rows, np.maximum(c - 1, 0)[..., None], -1)[..., 0], 0.0)
    hi_c = np.take_along_axis(cdf_rows, c[..., None], -1)[..., 0]
    span_c = hi_c - lo_c
    fc = np.where(span_c > 0, (u2 - lo_c) / np.where(span_c > 0, span_c, 1.0), 0.5)

    cos_t = sampler.cos_edges[r] + fr * (sampler.cos_edges[r + 1] - sampler.cos_edges[r])
    cos_t = np.clip(cos_t, -1.0, 1.0)
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
    phi = -np.pi + (c + fc) * (2.0 * np.pi / w)
    d = np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=-1)
    pdf = sampler.pdf_texel[r, c]
    radiance = lookup_bilinear(sampler.pixels, d)
    if scalar_in:
        return d[0], float(pdf[0]), radiance[0]
    return d, pdf, radiance


# ---------------------------------------------------------------------------
# Inter-frame illumination difference

@dataclass(frozen=True)
class IlluminationDiff:
    grid_n: int
    value: float             # T in [0, 1)
    per_patch: np.ndarray    # (N, N) similarities in [-1, 1]
    extremal: str            # "min" or "max"


def _patch_edges(n_pixels: int, grid_n: int):
    return np.linspace(0, n_pixels, grid_n + 1).astype(int)


def _ssim_global(a, b, c1: float, c2: float) -> float:
    """Single-window SSIM over two equally sized patches."""
    mu_a = a.mean()
    mu_b = b.mean()
    var_a = a.var()
    var_b = b.var()
    cov = ((a - mu_a) * (b - mu_b)).mean()
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(num / den)


def illumination_difference(prev: RadianceMap, curr: RadianceMap,
                            grid_n: int = DEFAULT_GRID_N,
                            extremal: str = "min") -> IlluminationDiff:
    """Patch-wise log-luminance SSIM difference between adjacent HDR frames.

    Both maps are split into a grid_n x grid_n grid; per patch the SSIM of
    log(1 + luminance) is computed with standard constants on the jointly
    observed dynamic range. The scalar difference is 1 minus the extremal
    patch similarity, clamped into [0, 1).

    The worst (minimum) patch drives the default: a large change anywhere is
    treated as a large change of the whole scene. ``extremal="max"`` selects
    the most-similar patch instead.
    """
    if (prev.height, prev.width) != (curr.height, curr.width):
        raise ValueError("maps must have identical dimensions")
    if not (1 <= grid_n <= min(prev.width, prev.height)):
        raise ValueError(f"grid_n must lie in [1, {min(prev.width, prev.height)}]")
    if extremal not in ("min", "max"):
        raise ValueError("extremal must be 'min' or 'max'")

    a = np.log1p(luminance(prev.pixels))
    b = np.log1p(luminance(curr.pixels))
    rng = max(max(a.max(), b.max()) - min(a.min(), b.min()), 1e-12)
    c1 = (0.01 * rng) ** 2
    c2 = (0.03 * rng) ** 2

    rows = _patch_edges(prev.height, grid_n)
    cols = _patch_edges(prev.width, grid_n)
    tau = np.empty((grid_n, grid_n))
    for i in range(grid_n):
        for j in range(grid_n):
            pa = a[rows[i]:rows[i + 1], cols[j]:cols[j + 1]]
            pb = b[rows[i]:rows[i + 1], cols[j]:cols[j + 1]]
            tau[i, j] = _ssim_global(pa, pb, c1, c2)

    ext = tau.min() if extremal == "min" else tau.max()
    t_val = float(np.clip(1.0 - ext, 0.0, 1.0 - T_EPSILON))
    return IlluminationDiff(grid_n=grid_n, value=t_val, per_patch=tau, extremal=extremal)
