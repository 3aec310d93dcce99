"""Two-step stereo spatio-temporal denoiser.

Step one filters each eye with a feature-guided spatial pass, blends in the
resampled partner-eye sample, then folds in the previous frame's final result
with a weight gated by the inter-frame illumination difference:

    w_v = sigmoid(1 / (T - 1)) * zeta

where zeta is the same bilateral weight evaluated across frames and the
current sample keeps weight 1. Step two blends the two eyes:

    v2_L = lam * v1_L + (1 - lam) * v1_R,   lam = alpha * (beta - e^(-|d_gamma|))

Every blend is convex, so outputs stay inside the range of their inputs.
Background (uncovered) pixels bypass the filter entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envlight import T_EPSILON
from .imageio import bilinear_gather
from .render import GBuffer, StereoFrame

DEPTH_GUARD = 1.0e30


@dataclass(frozen=True)
class BilateralParams:
    spatial_radius: int = 2
    sigma_albedo: float = 0.1
    sigma_gradient: float = 0.5
    sigma_depth: float = 0.05
    alpha: float = 0.5
    beta: float = 2.0
    # scales w_v for experimentation; 1.0 reproduces the formula as printed
    temporal_gain: float = 1.0

    def __post_init__(self):
        if min(self.sigma_albedo, self.sigma_gradient, self.sigma_depth) <= 0:
            raise ValueError("feature bandwidths must be positive")
        if self.spatial_radius < 0:
            raise ValueError("spatial_radius must be >= 0")


@dataclass(frozen=True)
class GBufferSample:
    gamma: np.ndarray       # (3,) albedo
    grad: np.ndarray        # (3,) unit gradient
    z: float
    covered: bool = True


@dataclass
class FrameHistory:
    """Previous frame's record consumed at frame t."""
    index: int
    denoised: dict          # {"L": (H,W,3), "R": (H,W,3)} after step two
    gbuffers: dict          # {"L": GBuffer, "R": GBuffer}
    cameras: dict           # {"L": Camera, "R": Camera}
    hdr_map: object = None  # previous HDR environment (for T of frame t+1)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def bilateral_weight(a: GBufferSample, b: GBufferSample,
                     params: BilateralParams = BilateralParams()) -> float:
    """Feature kernel over albedo, gradient and relative depth; 0 when either
    sample is uncovered. Depth differences are relative to sample a."""
    if not (a.covered and b.covered):
        return 0.0
    dg = np.asarray(a.gamma, dtype=np.float64) - np.asarray(b.gamma, dtype=np.float64)
    dn = np.asarray(a.grad, dtype=np.float64) - np.asarray(b.grad, dtype=np.float64)
    z_ref = max(abs(float(a.z)), 1e-6)
    dz = (float(a.z) - float(b.z)) / z_ref
    w = np.exp(-float(dg @ dg) / (2.0 * params.sigma_albedo ** 2))
    w *= np.exp(-float(dn @ dn) / (2.0 * params.sigma_gradient ** 2))
    w *= np.exp(-dz * dz / (2.0 * params.sigma_depth ** 2))
    return float(w)


def d2_lambda(delta_gamma_norm, params: BilateralParams = BilateralParams()):
    """Inter-screen blend factor alpha * (beta - e^(-|d_gamma|)), clamped to
    [0, 1] to keep the blend convex."""
    d = np.asarray(delta_gamma_norm, dtype=np.float64)
    return np.clip(params.alpha * (params.beta - np.exp(-d)), 0.0, 1.0)


def temporal_weight(t_illum: float, zeta: float) -> float:
    """Weight of the previous frame's denoised sample (current sample is 1)."""
    if not (0.0 <= t_illum <= 1.0 - T_EPSILON):
        raise ValueError(f"illumination difference {t_illum} outside [0, 1)")
    if not (0.0 <= zeta <= 1.0):
        raise ValueError("zeta must lie in [0, 1]")
    return float(sigmoid(1.0 / (t_illum - 1.0)) * zeta)


# ---------------------------------------------------------------------------
# Vectorized feature weights

def _weight_arrays(g_a, n_a, z_a, g_b, n_b, z_b, params: BilateralParams):
    dg = g_a - g_b
    dn = n_a - n_b
    z_ref = np.maximum(np.abs(z_a), 1e-6)
    dz = np.clip((z_a - z_b) / z_ref, -1e15, 1e15)
    # one fused exponential of the three feature terms
    arg = ((dg * dg).sum(axis=-1) * (0.5 / params.sigma_albedo ** 2)
           + (dn * dn).sum(axis=-1) * (0.5 / params.sigma_gradient ** 2)
           + dz * dz * (0.5 / params.sigma_depth ** 2))
    return np.exp(-np.minimum(arg, 80.0))


def _features(gbuf: GBuffer):
    z = gbuf.depth.astype(np.float32)
    z = np.where(np.isfinite(z), z, np.float32(DEPTH_GUARD))
    return gbuf.albedo, gbuf.unit_gradient, z


def _shift(arr, dy: int, dx: int, fill=0.0):
    out = np.full_like(arr, fill)
    h, w = arr.shape[:2]
    ys = slice(max(dy, 0), h + min(dy, 0))
    yd = slice(max(-dy, 0), h + min(-dy, 0))
    xs = slice(max(dx, 0), w + min(dx, 0))
    xd = slice(max(-dx, 0), w + min(-dx, 0))
    out[yd, xd] = arr[ys, xs]
    return out


def _spatial_pass(raw, gamma, grad, z, covered, params: BilateralParams):
    num = raw.astype(np.float32).copy()
    den = np.ones(raw.shape[:2], dtype=np.float32)
    cov32 = covered.astype(np.float32)
    r = params.spatial_radius
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dy == 0 and dx == 0:
                continue
            w = _weight_arrays(gamma, grad, z,
                               _shift(gamma, dy, dx), _shift(grad, dy, dx),
                               _shift(z, dy, dx, DEPTH_GUARD), params)
            w = w * _shift(cov32, dy, dx)
            num += w[..., None] * _shift(raw, dy, dx)
            den += w
    return num / den[..., None]


def denoise_d1(frame: StereoFrame, history, reproj, params: BilateralParams,
               t_illum: float):
    """First step: spatial + cross-eye + temporal filtering, per eye.

    ``history`` may be None (frame 0): the temporal term drops out. Returns
    {"L": image, "R": image} float32.
    """
    out = {}
    w_hist = float(sigmoid(1.0 / (min(max(t_illum, 0.0), 1.0 - T_EPSILON) - 1.0)))
    for eye, partner in (("L", "R"), ("R", "L")):
        src = frame.eyes[eye]
        raw = src.radiance
        gamma, grad, z = _features(src.gbuffer)
        covered = src.gbuffer.covered

        spatial = _spatial_pass(raw, gamma, grad, z, covered, params)

        rp = reproj[eye]
        w_s = _weight_arrays(gamma, grad, z, rp.stereo.gamma, rp.stereo.grad,
                             rp.stereo.z, params)
        w_s = np.where(rp.stereo.valid, w_s, 0.0).astype(np.float32)
        partner_raw = bilinear_gather(frame.eyes[partner].radiance,
                                      rp.stereo.py, rp.stereo.px)
        tilde = (spatial + partner_raw * w_s[..., None]) / (1.0 + w_s[..., None])

        if history is not None:
            zeta = _weight_arrays(gamma, grad, z, rp.prev.gamma, rp.prev.grad,
                                  rp.prev.z, params)
            w_v = w_hist * zeta * params.temporal_gain
            w_v = np.where(rp.prev.valid, w_v, 0.0).astype(np.float32)
            prev_val = bilinear_gather(history.denoised[eye], rp.prev.py,
                                       rp.prev.px)
            v1 = (tilde + prev_val * w_v[..., None]) / (1.0 + w_v[..., None])
        else:
            v1 = tilde

        out[eye] = np.where(covered[..., None], v1, raw).astype(np.float32)
    return out


def denoise_d2(v1: dict, frame: StereoFrame, reproj, params: BilateralParams):
    """Second step: albedo-weighted convex blend between the two eyes."""
    out = {}
    for eye, partner in (("L", "R"), ("R", "L")):
        src = frame.eyes[eye]
        gamma = src.gbuffer.albedo
        rp = reproj[eye]
        diff = np.linalg.norm(gamma - rp.stereo.gamma, axis=-1)
        lam = d2_lambda(diff, params).astype(np.float32)
        lam = np.where(rp.stereo.valid & src.gbuffer.covered, lam,
                       np.float32(1.0))
        own = v1[eye]
        other = bilinear_gather(v1[partner], rp.stereo.py, rp.stereo.px)
        blended = lam[..., None] * own + (1.0 - lam[..., None]) * other
        out[eye] = blended.astype(np.float32)
    return out


def inter_eye_inconsistency(images: dict, frame: StereoFrame, reproj) -> float:
    """Mean absolute difference between one eye and the partner resampled at
    its stereo targets, over valid stereo pixels (a stereo-noise metric)."""
    total = 0.0
    count = 0
    for eye, partner in (("L", "R"), ("R", "L")):
        rp = reproj[eye]
        if not rp.stereo.valid.any():
            continue
        other = bilinear_gather(images[partner].astype(np.float64),
                                rp.stereo.py, rp.stereo.px)
        diff = np.abs(images[eye].astype(np.float64) - other).mean(axis=-1)
        total += diff[rp.stereo.valid].sum()
        count += int(rp.stereo.valid.sum())
    return total / max(count, 1)
