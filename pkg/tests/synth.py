"""Hand-built planar-wall stereo frames and on-disk fixture inputs."""

import os

import numpy as np

from voxbeam import quat
from voxbeam.config import SessionConfig
from voxbeam.fixtures import make_blob_volume, make_default_tf, make_sky_panorama
from voxbeam.imageio import write_png
from voxbeam.render import EyeFrame, GBuffer, StereoFrame, StereoRig
from voxbeam.volume import save_transfer_function, save_volume


def write_fixture_inputs(root, volume_n=24, env_height=64):
    """Write a small blob volume, transfer function and sky panorama; returns
    their paths."""
    root = os.fspath(root)
    os.makedirs(root, exist_ok=True)
    vol_path = os.path.join(root, "blob.yaml")
    save_volume(vol_path, make_blob_volume(volume_n))
    tf_path = os.path.join(root, "tf.yaml")
    save_transfer_function(tf_path, make_default_tf())
    env_path = os.path.join(root, "sky.png")
    pano = make_sky_panorama(env_height)
    write_png(env_path, np.clip(np.rint(pano.pixels * 255), 0, 255).astype(np.uint8))
    return vol_path, tf_path, env_path


def small_session(root, frames=2, width=32, height=32, spp=2, seed=5,
                  output=None, **overrides):
    vol, tf, env = write_fixture_inputs(root)
    cfg = SessionConfig(
        volume=vol, transfer_function=tf,
        environment={"kind": "static", "path": env},
        width=width, height=height, spp=spp, seed=seed,
        # gentle arc: per-frame motion in the regime of real head movement
        camera={"kind": "orbit", "frames": frames, "radius": 1.4,
                "elevation_deg": 15.0, "azimuth_start_deg": 0.0,
                "azimuth_end_deg": 1.5 * frames},
        output=os.fspath(output) if output else None,
        **overrides)
    return cfg


def ray_grid(cam):
    ys, xs = np.mgrid[0:cam.height, 0:cam.width].astype(np.float64)
    xn = ((xs + 0.5) / cam.width * 2.0 - 1.0) * cam.tan_half * cam.aspect
    yn = (1.0 - (ys + 0.5) / cam.height * 2.0) * cam.tan_half
    d = (cam.forward[None, None, :]
         + xn[..., None] * cam.right[None, None, :]
         + yn[..., None] * cam.up_ortho[None, None, :])
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def default_rig(width=16, height=16, position=(0.0, 0.0, 0.0), ipd=0.1):
    return StereoRig(position=np.asarray(position, dtype=np.float64),
                     orientation=quat.IDENTITY, ipd=ipd, width=width,
                     height=height)


def wall_frame(rig, wall_x=2.0, albedo=(0.5, 0.5, 0.5), index=0,
               radiance=None, coverage=1.0, seed=None):
    """Stereo frame of an x = wall_x plane: exact hit points and depths."""
    eyes = {}
    rng = np.random.default_rng(seed)
    for eye in ("L", "R"):
        cam = rig.camera(eye)
        h, w = cam.height, cam.width
        dirs = ray_grid(cam)
        t = (wall_x - cam.position[0]) / dirs[..., 0]
        x = cam.position[None, None, :] + t[..., None] * dirs
        depth = ((x - cam.position) @ cam.forward).astype(np.float32)
        gb = GBuffer(
            albedo=np.broadcast_to(np.asarray(albedo, dtype=np.float32),
                                   (h, w, 3)).copy(),
            gradient=np.broadcast_to(np.array([-1.0, 0, 0], dtype=np.float32),
                                     (h, w, 3)).copy(),
            depth=depth,
            x=x.astype(np.float32),
            coverage=np.full((h, w), coverage, dtype=np.float32),
        )
        if radiance is None:
            rad = np.full((h, w, 3), 0.5, dtype=np.float32)
        elif callable(radiance):
            rad = radiance(eye, rng).astype(np.float32)
        else:
            rad = np.asarray(radiance, dtype=np.float32).copy()
        eyes[eye] = EyeFrame(radiance=rad, gbuffer=gb, camera=cam)
    return StereoFrame(index=index, eyes=eyes)
