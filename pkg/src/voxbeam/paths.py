"""Camera rig paths: orbit parameterization and keyframe interpolation.

The orbit convention is shared with the browser viewer: azimuth rotates
about world +z starting at +x, elevation tilts the camera above the target,
and the pose quaternion is yaw(azimuth) * pitch(elevation) applied to the
local frame (forward +x, up +z).
"""

from __future__ import annotations

import numpy as np

from . import quat


def orbit_pose(azimuth: float, elevation: float, radius: float, target=(0, 0, 0)):
    """Rig pose (position, orientation) looking at ``target`` from an orbit."""
    target = np.asarray(target, dtype=np.float64)
    q = quat.multiply(quat.from_axis_angle((0, 0, 1), azimuth),
                      quat.from_axis_angle((0, 1, 0), elevation))
    forward = quat.rotate(q, np.array([1.0, 0.0, 0.0]))
    position = target - radius * forward
    return position, q


def orbit_path(frames: int, radius: float, target=(0, 0, 0),
               elevation_deg: float = 0.0, azimuth_start_deg: float = 0.0,
               azimuth_end_deg: float = 360.0):
    """One pose per frame along a constant-elevation orbit."""
    if frames < 1:
        raise ValueError("orbit needs at least one frame")
    az = np.radians(np.linspace(azimuth_start_deg, azimuth_end_deg, frames,
                                endpoint=False if frames > 1 else True))
    el = np.radians(elevation_deg)
    return [orbit_pose(a, el, radius, target) for a in az]


def keyframe_path(keyframes, frames: int):
    """Linear position + slerp orientation interpolation over ``frames``.

    ``keyframes`` is a list of (position, quaternion); a single keyframe
    yields a static path.
    """
    if len(keyframes) == 0:
        raise ValueError("need at least one keyframe")
    if len(keyframes) == 1 or frames == 1:
        p, q = keyframes[0]
        return [(np.asarray(p, dtype=np.float64), quat.normalize(q))] * frames
    out = []
    segs = len(keyframes) - 1
    for i in range(frames):
        s = i / (frames - 1) * segs
        k = min(int(s), segs - 1)
        t = s - k
        p0, q0 = keyframes[k]
        p1, q1 = keyframes[k + 1]
        p = (1 - t) * np.asarray(p0, dtype=np.float64) + t * np.asarray(p1, dtype=np.float64)
        out.append((p, quat.slerp(quat.normalize(q0), quat.normalize(q1), t)))
    return out


def path_from_config(cfg: dict):
    """Build a pose list from a camera-path config mapping."""
    kind = cfg.get("kind", "orbit")
    if kind == "orbit":
        return orbit_path(int(cfg.get("frames", 1)),
                          float(cfg.get("radius", 2.0)),
                          tuple(cfg.get("target", (0.0, 0.0, 0.0))),
                          float(cfg.get("elevation_deg", 0.0)),
                          float(cfg.get("azimuth_start_deg", 0.0)),
                          float(cfg.get("azimuth_end_deg", 360.0)))
    if kind == "keyframes":
        keys = [(np.asarray(k["position"], dtype=np.float64),
                 np.asarray(k["orientation"], dtype=np.float64))
                for k in cfg["poses"]]
        return keyframe_path(keys, int(cfg.get("frames", len(keys))))
    raise ValueError(f"unknown camera path kind {kind!r}")
