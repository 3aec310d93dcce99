import numpy as np
import pytest

from voxbeam import quat
from voxbeam.envlight import (CAMERA, HDR, LDR, WORLD, FisheyePair, RadianceMap,
                              calibrate, estimate_hdr, make_map, prefilter,
                              stitch, stitch_weights, synthesize_fisheye,
                              texel_directions, warp_to_center)
from voxbeam.fixtures import make_smooth_panorama


def _psnr(a, b, peak=1.0):
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - b) ** 2))
    return 10.0 * np.log10(peak * peak / max(mse, 1e-20))


# ---------------------------------------------------------------------------
# Stitching

def test_stitch_constant_gray():
    img = np.full((128, 128, 3), 0.5, dtype=np.float32)
    pano = stitch(FisheyePair(img, img.copy()))
    assert pano.kind == LDR and pano.frame == CAMERA
    assert np.allclose(pano.pixels, 0.5, atol=1e-6)


def test_stitch_default_dims():
    img = np.full((64, 64, 3), 0.25, dtype=np.float32)
    pano = stitch(FisheyePair(img, img.copy()))
    assert (pano.width, pano.height) == (512, 256)


def test_stitch_roundtrip_psnr():
    # synthesize the pair from a reference panorama via the inverse mapping,
    # stitch, compare outside the feathering band
    for seed in range(10):
        ref = make_smooth_panorama(seed, height=128)
        pair = synthesize_fisheye(ref, size=512)
        pano = stitch(pair, height=128, width=256)
        w_f, w_b = stitch_weights(pair, 128, 256)
        exclusive = (w_f >= 1.0) | (w_b >= 1.0)
        assert exclusive.mean() > 0.5
        psnr = _psnr(pano.pixels[exclusive], ref.pixels[exclusive])
        assert psnr > 35.0, f"seed {seed}: PSNR {psnr:.2f} dB"


def test_stitch_rejects_insufficient_fov():
    with pytest.raises(ValueError):
        FisheyePair(np.zeros((16, 16, 3), dtype=np.float32),
                    np.zeros((16, 16, 3), dtype=np.float32), fov_deg=170.0)


# ---------------------------------------------------------------------------
# Calibration

def test_calibrate_identity_nearest_is_identity():
    pano = make_smooth_panorama(1, height=32)
    out = calibrate(pano, quat.IDENTITY, method="nearest")
    assert out.frame == WORLD
    assert np.array_equal(out.pixels, pano.pixels)


def test_calibrate_yaw_shifts_columns():
    pano = make_smooth_panorama(2, height=32)
    yaw = quat.from_axis_angle((0, 0, 1), np.pi / 2)
    out = calibrate(pano, yaw, method="nearest")
    # direct pixel-mapping oracle: world texel direction rotated back into
    # camera frame, then nearest lookup
    d = texel_directions(32, 64).reshape(-1, 3)
    d_cam = quat.rotate(quat.conjugate(yaw), d)
    theta = np.arccos(np.clip(d_cam[:, 2], -1, 1))
    phi = np.arctan2(d_cam[:, 1], d_cam[:, 0])
    rows = np.clip(np.rint(theta / np.pi * 32 - 0.5).astype(int), 0, 31)
    cols = np.rint((phi + np.pi) / (2 * np.pi) * 64 - 0.5).astype(int) % 64
    expected = pano.pixels[rows, cols].reshape(32, 64, 3)
    assert np.array_equal(out.pixels, expected)
    # a pure yaw is a circular column shift by a quarter width
    assert np.array_equal(out.pixels, np.roll(pano.pixels, 16, axis=1))


def test_calibrate_composition():
    pano = make_smooth_panorama(3, height=64)
    q1 = quat.from_axis_angle((0, 0, 1), 0.7)
    q2 = quat.from_axis_angle((0, 1, 0), -0.4)
    once = calibrate(make_map(calibrate(pano, q1).pixels, LDR, CAMERA), q2)
    combined = calibrate(pano, quat.multiply(q2, q1))
    assert np.allclose(once.pixels, combined.pixels, atol=0.02)


def test_calibrate_pose_normalization():
    pano = make_smooth_panorama(4, height=16)
    with pytest.raises(ValueError):
        calibrate(pano, np.array([1.1, 0.0, 0.0, 0.0]))
    with pytest.warns(UserWarning):
        out = calibrate(pano, np.array([1.0 + 2e-4, 0.0, 0.0, 0.0]), method="nearest")
    assert np.array_equal(out.pixels, pano.pixels)


def test_calibrate_requires_camera_frame():
    pano = make_smooth_panorama(5, height=16)
    world = calibrate(pano, quat.IDENTITY)
    with pytest.raises(ValueError):
        calibrate(world, quat.IDENTITY)


# ---------------------------------------------------------------------------
# Volume-centered warp

def test_warp_zero_offset_identity():
    pano = calibrate(make_smooth_panorama(6, height=32), quat.IDENTITY)
    out = warp_to_center(pano, (0, 0, 0), 3.0, method="nearest")
    assert out.frame == "WARPED"
    assert np.array_equal(out.pixels, pano.pixels)


def test_warp_constant_map_stays_constant():
    px = np.full((32, 64, 3), 0.3, dtype=np.float32)
    pano = RadianceMap(px, LDR, WORLD)
    out = warp_to_center(pano, (0.7, -0.2, 0.4), 3.0)
    assert np.allclose(out.pixels, 0.3, atol=1e-6)


def test_warp_offset_half_radius_hand_geometry():
    radius = 3.0
    offset = np.array([radius / 2, 0.0, 0.0])
    h, w = 64, 128
    pano = calibrate(make_smooth_panorama(7, height=h), quat.IDENTITY)
    out = warp_to_center(pano, offset, radius, method="nearest")

    def expected_at(direction):
        # analytic ray-sphere intersection from the shifted center
        od = float(offset @ direction)
        t = -od + np.sqrt(od * od + radius ** 2 - float(offset @ offset))
        p = offset + t * np.asarray(direction, dtype=np.float64)
        p = p / np.linalg.norm(p)
        theta = np.arccos(np.clip(p[2], -1, 1))
        phi = np.arctan2(p[1], p[0])
        r = int(np.clip(np.rint(theta / np.pi * h - 0.5), 0, h - 1))
        c = int(np.rint((phi + np.pi) / (2 * np.pi) * w - 0.5)) % w
        return pano.pixels[r, c]

    # +x is a fixed point of the warp
    row_eq = h // 2
    col_px = int(np.rint((0 + np.pi) / (2 * np.pi) * w - 0.5))
    d = texel_directions(h, w)[row_eq, col_px]
    assert np.allclose(out.pixels[row_eq, col_px], expected_at(d))
    assert np.allclose(expected_at((1, 0, 0)),
                       pano.pixels[row_eq, col_px], atol=1e-6)
    # +y maps to azimuth 60 degrees (hand-derived intersection (R/2, R sqrt3/2, 0))
    col_py = int(np.rint((np.pi / 2 + np.pi) / (2 * np.pi) * w - 0.5))
    d = texel_directions(h, w)[row_eq, col_py]
    assert np.allclose(out.pixels[row_eq, col_py], expected_at(d))
    p_hand = np.array([radius / 2, radius * np.sqrt(3) / 2, 0.0])
    phi_hand = np.arctan2(p_hand[1], p_hand[0])
    assert phi_hand == pytest.approx(np.pi / 3)


def test_warp_rejects_offset_outside_sphere():
    pano = calibrate(make_smooth_panorama(8, height=16), quat.IDENTITY)
    with pytest.raises(ValueError):
        warp_to_center(pano, (3.0, 0, 0), 3.0)


# ---------------------------------------------------------------------------
# LDR -> HDR

def test_estimate_hdr_black_stays_black():
    pano = make_map(np.zeros((32, 64, 3), dtype=np.float32), LDR, CAMERA)
    out = estimate_hdr(pano)
    assert out.kind == HDR
    assert np.all(out.pixels == 0.0)


def test_estimate_hdr_constant_half_no_boost():
    pano = make_map(np.full((32, 64, 3), 0.5, dtype=np.float32), LDR, CAMERA)
    out = estimate_hdr(pano)
    assert np.allclose(out.pixels, 0.5 ** 2.2, atol=1e-6)


def test_estimate_hdr_saturated_block_boosted():
    px = np.full((64, 128, 3), 0.5, dtype=np.float32)
    px[10:14, 20:24] = 1.0
    out = estimate_hdr(make_map(px, LDR, CAMERA))
    # hand-applied formula: linear = v^2.2; light pixels scaled by
    # 1 + (boost-1) * (lum - floor) / (1 - floor)
    assert np.allclose(out.pixels[10:14, 20:24], 1.0 ** 2.2 * 50.0)
    ground = np.delete(out.pixels.reshape(-1, 3),
                       np.ravel_multi_index(np.mgrid[10:14, 20:24],
                                            (64, 128)).ravel(), axis=0)
    assert np.allclose(ground, 0.5 ** 2.2, atol=1e-6)


def test_estimate_hdr_monotone_per_pixel():
    rng = np.random.default_rng(9)
    base = rng.random((16, 32, 3)).astype(np.float32)
    raised = np.clip(base + 0.05 * rng.random((16, 32, 3)).astype(np.float32), 0, 1)
    lo = estimate_hdr(make_map(base, LDR, CAMERA)).pixels
    hi = estimate_hdr(make_map(raised, LDR, CAMERA)).pixels
    assert np.all(hi >= lo - 1e-6)


# ---------------------------------------------------------------------------
# Pre-filtered levels

def test_prefilter_constant():
    pano = make_map(np.full((32, 64, 3), 0.4, dtype=np.float32), LDR, CAMERA)
    levels = prefilter(pano, 4)
    assert len(levels) == 4
    for i, lvl in enumerate(levels):
        assert lvl.height == 32 // (2 ** i)
        assert np.allclose(lvl.pixels, 0.4, atol=1e-6)


def test_prefilter_single_level_is_input():
    pano = make_smooth_panorama(10, height=16)
    levels = prefilter(pano, 1)
    assert len(levels) == 1
    assert np.array_equal(levels[0].pixels, pano.pixels)


def test_prefilter_impulse_matches_direct_convolution():
    h, w = 32, 64
    px = np.zeros((h, w, 3), dtype=np.float32)
    px[8, 16] = 1.0
    levels = prefilter(make_map(px, LDR, CAMERA), 2)
    # direct convolution oracle at sigma = 1
    sigma = 1.0
    radius = int(np.ceil(3 * sigma))
    k = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma) ** 2)
    k = k / k.sum()
    blurred = np.zeros((h, w))
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            r, c = 8 + dy, (16 + dx) % w
            if 0 <= r < h:
                blurred[r, c] += k[dy + radius] * k[dx + radius]
    assert np.allclose(levels[1].pixels[..., 0], blurred[::2, ::2], atol=1e-9)


def test_prefilter_rejects_too_many_levels():
    pano = make_map(np.zeros((16, 32, 3), dtype=np.float32), LDR, CAMERA)
    with pytest.raises(ValueError):
        prefilter(pano, 5)
