import numpy as np
import pytest

from voxbeam.envlight import (HDR, WARPED, RadianceMap, build_sampler,
                              sample_direction)
from voxbeam.fixtures import make_hot_texel_env, make_smooth_panorama, make_uniform_env


def _texel_solid_angles(h, w):
    edges = np.linspace(0, np.pi, h + 1)
    band = np.cos(edges[:-1]) - np.cos(edges[1:])
    return (2 * np.pi / w) * np.repeat(band[:, None], w, axis=1)


def test_uniform_map_pdf_is_uniform_sphere():
    sampler = build_sampler(make_uniform_env(2.5, height=16))
    rng = np.random.default_rng(0)
    d, pdf, rad = sample_direction(sampler, rng.random((1000, 2)))
    assert np.allclose(pdf, 1.0 / (4 * np.pi), rtol=1e-9)
    assert np.allclose(np.linalg.norm(d, axis=-1), 1.0, atol=1e-12)
    assert np.allclose(rad, 2.5, atol=1e-5)


def test_hot_texel_receives_nearly_all_samples():
    env = make_hot_texel_env(height=32, hot=1.0e6, base=1.0)
    sampler = build_sampler(env)
    rng = np.random.default_rng(1)
    d, pdf, _ = sample_direction(sampler, rng.random((10_000, 2)))
    h, w = 32, 64
    theta = np.arccos(np.clip(d[:, 2], -1, 1))
    phi = np.arctan2(d[:, 1], d[:, 0])
    rows = np.minimum((theta / np.pi * h).astype(int), h - 1)
    cols = np.minimum(((phi + np.pi) / (2 * np.pi) * w).astype(int), w - 1)
    hot_frac = np.mean((rows == 16) & (cols == 32))
    assert hot_frac >= 0.99


def test_mc_irradiance_matches_quadrature():
    px = (make_smooth_panorama(7, height=64).pixels.astype(np.float64) * 3.0)
    env = RadianceMap(px.astype(np.float32), HDR, WARPED)
    sampler = build_sampler(env)
    rng = np.random.default_rng(2)
    d, pdf, rad = sample_direction(sampler, rng.random((100_000, 2)))
    mc = (rad / pdf[:, None]).mean(axis=0)
    omega = _texel_solid_angles(64, 128)
    riemann = (px * omega[..., None]).sum(axis=(0, 1))
    assert np.allclose(mc, riemann, rtol=0.02)


def test_pdf_integrates_to_one():
    env = RadianceMap((make_smooth_panorama(8, height=32).pixels + 0.01), HDR, WARPED)
    sampler = build_sampler(env)
    omega = _texel_solid_angles(32, 64)
    total = (sampler.pdf_texel * omega).sum()
    assert 0.99 <= total <= 1.01


def test_zero_luminance_falls_back_to_uniform():
    env = RadianceMap(np.zeros((16, 32, 3), dtype=np.float32), HDR, WARPED)
    sampler = build_sampler(env)
    rng = np.random.default_rng(3)
    d, pdf, rad = sample_direction(sampler, rng.random((500, 2)))
    assert np.allclose(pdf, 1.0 / (4 * np.pi), rtol=1e-9)
    assert np.all(rad == 0.0)
    assert abs(d[:, 2].mean()) < 0.1  # roughly balanced over the sphere


def test_sampler_requires_hdr():
    with pytest.raises(ValueError):
        build_sampler(make_smooth_panorama(0, height=16))


def test_scalar_interface():
    sampler = build_sampler(make_uniform_env(1.0, height=8))
    d, pdf, rad = sample_direction(sampler, np.array([0.3, 0.7]))
    assert d.shape == (3,)
    assert isinstance(pdf, float) and pdf > 0
    assert rad.shape == (3,)
