"""Cross-eye and cross-frame pixel reprojection.

For every covered pixel of one eye, the first-scatter position is projected
into the partner eye of the same frame, the same eye of the previous frame,
and (chained through the previous-frame position buffer) the partner eye of
the previous frame. Each target carries subpixel coordinates, a disocclusion
validity flag, and bilinearly resampled G-buffer features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imageio import bilinear_gather, nearest_gather
from .render import Camera, GBuffer, StereoFrame, project_points

DEPTH_GUARD = 1.0e30


@dataclass(frozen=True)
class ReprojectionParams:
    depth_tolerance: float = 0.05    # relative z mismatch that invalidates
    albedo_tolerance: float = 0.2    # max-norm albedo mismatch that invalidates


@dataclass
class ReprojectionTarget:
    px: np.ndarray           # (H, W) subpixel column of the target
    py: np.ndarray           # (H, W) subpixel row
    valid: np.ndarray        # (H, W) bool
    gamma: np.ndarray        # (H, W, 3) resampled target albedo
    grad: np.ndarray         # (H, W, 3) resampled target unit gradient
    z: np.ndarray            # (H, W) resampled target depth

    def resample(self, image):
        """Bilinearly resample an image of the target eye/frame at the
        reprojected coordinates (invalid pixels yield zeros)."""
        out = bilinear_gather(image, self.py, self.px)
        mask = self.valid if image.ndim == 2 else self.valid[..., None]
        return np.where(mask, out, 0.0)


def _invalid_target(h, w):
    zero = np.zeros((h, w), dtype=np.float64)
    return ReprojectionTarget(px=zero.copy(), py=zero.copy(),
                              valid=np.zeros((h, w), dtype=bool),
                              gamma=np.zeros((h, w, 3)), grad=np.zeros((h, w, 3)),
                              z=zero.copy())


@dataclass
class EyeReprojection:
    stereo: ReprojectionTarget        # partner eye, same frame
    prev: ReprojectionTarget          # same eye, previous frame
    prev_stereo: ReprojectionTarget   # partner eye, previous frame (chained)


def _guarded_depth(gbuf: GBuffer):
    z = gbuf.depth
    return np.where(np.isfinite(z), z, np.float32(DEPTH_GUARD)).astype(np.float32)


def _project_target(cam: Camera, x, src_covered, src_gamma,
                    target_gbuf: GBuffer, params: ReprojectionParams):
    px, py, z_exp, in_frustum = project_points(cam, x)
    z_tgt_near = nearest_gather(_guarded_depth(target_gbuf), py, px)
    cov_tgt = nearest_gather(target_gbuf.coverage, py, px) >= 0.5
    gam_tgt_near = nearest_gather(target_gbuf.albedo, py, px)
    z_safe = np.where(z_exp > 0, z_exp, 1.0)
    depth_ok = np.abs(z_tgt_near - z_exp) / z_safe < params.depth_tolerance
    albedo_ok = (np.abs(gam_tgt_near - src_gamma).max(axis=-1)
                 < params.albedo_tolerance)
    valid = src_covered & in_frustum & cov_tgt & depth_ok & albedo_ok
    gamma = bilinear_gather(target_gbuf.albedo, py, px)
    grad = bilinear_gather(target_gbuf.unit_gradient, py, px)
    z = bilinear_gather(_guarded_depth(target_gbuf), py, px)
    return ReprojectionTarget(px=px, py=py, valid=valid, gamma=gamma,
                              grad=grad, z=z)


def build_reprojection(frame: StereoFrame, history=None,
                       params: ReprojectionParams = ReprojectionParams()):
    """Per-eye reprojection sets for a stereo frame.

    ``history`` is the previous frame's record (cameras + G-buffers) or None
    at frame 0, in which case temporal targets are invalid but the stereo
    target is still computed.
    """
    out = {}
    for eye, partner in (("L", "R"), ("R", "L")):
        src = frame.eyes[eye]
        gb = src.gbuffer
        h, w = gb.coverage.shape
        x = gb.x.astype(np.float64)
        covered = gb.covered
        gamma_src = gb.albedo.astype(np.float64)

        stereo = _project_target(frame.eyes[partner].camera, x, covered,
                                 gamma_src, frame.eyes[partner].gbuffer, params)
        if history is None:
            prev = _invalid_target(h, w)
            prev_stereo = _invalid_target(h, w)
        else:
            prev = _project_target(history.cameras[eye], x, covered,
                                   gamma_src, history.gbuffers[eye], params)
            # chain: previous-frame partner target goes through the previous
            # frame's position buffer at the temporal target pixel
            hist_gb = history.gbuffers[eye]
            x_prev = nearest_gather(hist_gb.x.astype(np.float64), prev.py, prev.px)
            chain_base = covered & (nearest_gather(hist_gb.coverage, prev.py, prev.px) >= 0.5)
            _, _, _, in_frus_prev = project_points(history.cameras[eye], x)
            prev_stereo = _project_target(history.cameras[partner], x_prev,
                                          covered & in_frus_prev & chain_base,
                                          gamma_src, history.gbuffers[partner],
                                          params)
        out[eye] = EyeReprojection(stereo=stereo, prev=prev,
                                   prev_stereo=prev_stereo)
    return out
