"""Stereo volume renderer: cameras, G-buffers, and the four illumination
modes (absorption-emission, gradient Phong, pre-filtered environment, and
Monte Carlo single-scattering path tracing against the environment map).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels, quat
from .envlight import EnvSampler, RadianceMap, build_sampler, mean_radiance
from .volume import TransferFunction, VolumeGrid

LOCAL_FORWARD = np.array([1.0, 0.0, 0.0])
LOCAL_UP = np.array([0.0, 0.0, 1.0])
LOCAL_RIGHT = np.array([0.0, -1.0, 0.0])  # cross(forward, up)

EYES = ("L", "R")


class RenderMode(str, enum.Enum):
    ABSORPTION_EMISSION = "absorption-emission"
    GRADIENT_PHONG = "gradient-phong"
    PREFILTERED_ENV = "prefiltered-env"
    VPT_ENV = "vpt-env"

    @classmethod
    def parse(cls, name) -> "RenderMode":
        if isinstance(name, cls):
            return name
        return cls(str(name).strip().lower().replace("_", "-"))


@dataclass(frozen=True)
class Scene:
    grid: VolumeGrid
    tf: TransferFunction

    def kernel_args(self):
        g = self.grid
        lo = g.bbox_min
        hi = g.bbox_max
        return (g.values,
                float(g.origin[0]), float(g.origin[1]), float(g.origin[2]),
                float(g.spacing[0]), float(g.spacing[1]), float(g.spacing[2]),
                float(lo[0]), float(lo[1]), float(lo[2]),
                float(hi[0]), float(hi[1]), float(hi[2]),
                self.tf.scalars, self.tf.rgb, self.tf.scale, float(self.tf.sigma_max))

    def default_step(self) -> float:
        return 0.5 * float(min(self.grid.spacing))


@dataclass(frozen=True)
class Camera:
    position: np.ndarray
    forward: np.ndarray
    up: np.ndarray
    vfov: float                 # radians
    width: int
    height: int
    near: float = 0.01
    right: np.ndarray = field(init=False, repr=False)
    up_ortho: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (0.0 < self.vfov < np.pi):
            raise ValueError("vfov must lie in (0, pi)")
        if self.near <= 0.0:
            raise ValueError("near must be > 0")
        f = np.asarray(self.forward, dtype=np.float64)
        f = f / np.linalg.norm(f)
        r = np.cross(f, np.asarray(self.up, dtype=np.float64))
        r = r / np.linalg.norm(r)
        u = np.cross(r, f)
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "forward", f)
        object.__setattr__(self, "up", np.asarray(self.up, dtype=np.float64))
        object.__setattr__(self, "right", r)
        object.__setattr__(self, "up_ortho", u)

    @property
    def tan_half(self) -> float:
        return float(np.tan(self.vfov / 2.0))

    @property
    def aspect(self) -> float:
        return self.width / self.height

    def kernel_args(self):
        p, r, u, f = self.position, self.right, self.up_ortho, self.forward
        return (float(p[0]), float(p[1]), float(p[2]),
                float(r[0]), float(r[1]), float(r[2]),
                float(u[0]), float(u[1]), float(u[2]),
                float(f[0]), float(f[1]), float(f[2]),
                self.tan_half, self.aspect)

    def ray_direction(self, px: float, py: float):
        """World direction through subpixel (px, py); (0, 0) is the top-left
        pixel center."""
        xn = ((px + 0.5) / self.width * 2.0 - 1.0) * self.tan_half * self.aspect
        yn = (1.0 - (py + 0.5) / self.height * 2.0) * self.tan_half
        d = self.forward + xn * self.right + yn * self.up_ortho
        return d / np.linalg.norm(d)


def project(cam: Camera, x):
    """Pinhole projection to subpixel (px, py) and forward depth z.

    Returns None when x is behind the near plane or outside the viewport.
    """
    v = np.asarray(x, dtype=np.float64) - cam.position
    z = float(v @ cam.forward)
    if z <= cam.near:
        return None
    xn = (v @ cam.right) / (z * cam.tan_half * cam.aspect)
    yn = (v @ cam.up_ortho) / (z * cam.tan_half)
    px = (xn + 1.0) / 2.0 * cam.width - 0.5
    py = (1.0 - yn) / 2.0 * cam.height - 0.5
    # the image area extends half a texel beyond the outermost pixel centers
    if not (-0.5 <= px <= cam.width - 0.5 and -0.5 <= py <= cam.height - 0.5):
        return None
    return px, py, z


def project_points(cam: Camera, pts):
    """Vectorized projection of (..., 3) points -> (px, py, z, valid)."""
    v = np.asarray(pts, dtype=np.float64) - cam.position
    z = v @ cam.forward
    safe_z = np.where(z > cam.near, z, 1.0)
    xn = (v @ cam.right) / (safe_z * cam.tan_half * cam.aspect)
    yn = (v @ cam.up_ortho) / (safe_z * cam.tan_half)
    px = (xn + 1.0) / 2.0 * cam.width - 0.5
    py = (1.0 - yn) / 2.0 * cam.height - 0.5
    valid = ((z > cam.near)
             & (px >= -0.5) & (px <= cam.width - 0.5)
             & (py >= -0.5) & (py <= cam.height - 0.5))
    return px, py, z, valid


def unproject(cam: Camera, px: float, py: float, z: float):
    """Inverse of :func:`project` at forward depth z."""
    xn = (px + 0.5) / cam.width * 2.0 - 1.0
    yn = 1.0 - (py + 0.5) / cam.height * 2.0
    d = (cam.forward
         + xn * cam.tan_half * cam.aspect * cam.right
         + yn * cam.tan_half * cam.up_ortho)
    return cam.position + z * d


@dataclass(frozen=True)
class StereoRig:
    position: np.ndarray
    orientation: np.ndarray     # unit quaternion, local -> world
    ipd: float = 0.065
    vfov: float = np.radians(60.0)
    width: int = 256
    height: int = 256
    near: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "orientation", quat.normalize(self.orientation))

    def camera(self, eye: str) -> Camera:
        if eye not in EYES:
            raise ValueError(f"eye must be 'L' or 'R', got {eye!r}")
        fwd = quat.rotate(self.orientation, LOCAL_FORWARD)
        up = quat.rotate(self.orientation, LOCAL_UP)
        right = quat.rotate(self.orientation, LOCAL_RIGHT)
        sign = -0.5 if eye == "L" else 0.5
        pos = self.position + sign * self.ipd * right
        return Camera(pos, fwd, up, self.vfov, self.width, self.height, self.near)


@dataclass
class GBuffer:
    albedo: np.ndarray      # (H, W, 3) float32
    gradient: np.ndarray    # (H, W, 3) float32, raw central differences
    depth: np.ndarray       # (H, W) float32, +inf for miss
    x: np.ndarray           # (H, W, 3) float32, first-scatter proxy
    coverage: np.ndarray    # (H, W) float32

    @property
    def covered(self):
        return self.coverage >= 0.5

    @property
    def unit_gradient(self):
        n = np.linalg.norm(self.gradient, axis=-1, keepdims=True)
        return np.where(n > 1e-9, self.gradient / np.where(n > 0, n, 1.0), 0.0).astype(np.float32)


@dataclass
class EyeFrame:
    radiance: np.ndarray    # (H, W, 3) float32, linear
    gbuffer: GBuffer
    camera: Camera


@dataclass
class StereoFrame:
    index: int
    eyes: dict               # {"L": EyeFrame, "R": EyeFrame}
    illum_diff: float = 0.0  # T of this frame
    seed: int = 0

    @property
    def left(self) -> EyeFrame:
        return self.eyes["L"]

    @property
    def right(self) -> EyeFrame:
        return self.eyes["R"]


@dataclass(frozen=True)
class RenderSettings:
    march_step: float | None = None   # world units; defaults to half min spacing
    hg_g: float = 0.0                 # Henyey-Greenstein anisotropy, 0 = isotropic
    phong_ambient: float = 0.1
    phong_diffuse: float = 0.7
    phong_specular: float = 0.2
    phong_shininess: float = 32.0


def _sanitize_seed(seed: int) -> int:
    return int(seed) & 0x7FFFFFFFFFFFFFFF


def phase_pdf(cos_theta, g: float = 0.0):
    """Henyey-Greenstein phase density (solid-angle measure)."""
    cos_theta = np.asarray(cos_theta, dtype=np.float64)
    if g == 0.0:
        return np.full_like(cos_theta, 1.0 / (4.0 * np.pi))
    denom = 1.0 + g * g - 2.0 * g * cos_theta
    return (1.0 - g * g) / (4.0 * np.pi * denom * np.sqrt(denom))


def render_gbuffer(scene: Scene, cam: Camera, step: float | None = None) -> GBuffer:
    """Deterministic first-scatter proxy: march until accumulated opacity 0.5."""
    h, w = cam.height, cam.width
    out_x = np.zeros((h, w, 3), dtype=np.float32)
    out_z = np.zeros((h, w), dtype=np.float32)
    out_alb = np.zeros((h, w, 3), dtype=np.float32)
    out_grad = np.zeros((h, w, 3), dtype=np.float32)
    out_cov = np.zeros((h, w), dtype=np.float32)
    step = scene.default_step() if step is None else float(step)
    kernels.gbuffer_march(out_x, out_z, out_alb, out_grad, out_cov, w, h,
                          *cam.kernel_args(), *scene.kernel_args(), step)
    depth = out_z.astype(np.float32)
    depth[out_cov < 0.5] = np.inf
    return GBuffer(albedo=out_alb, gradient=out_grad, depth=depth, x=out_x,
                   coverage=out_cov)


def _require_hdr(env: RadianceMap):
    if env.kind != "HDR":
        raise ValueError("rendering expects an HDR environment map")


def render(scene: Scene, env: RadianceMap, rig: StereoRig, mode: RenderMode,
           spp: int = 2, seed: int = 0, frame_index: int = 0,
           prefiltered=None, sampler: EnvSampler | None = None,
           settings: RenderSettings = RenderSettings()) -> StereoFrame:
    """Render both eyes plus G-buffers; deterministic for a given seed.

    Background pixels always show the environment looked up along the primary
    ray, in every mode.
    """
    _require_hdr(env)
    mode = RenderMode(mode)
    if mode == RenderMode.PREFILTERED_ENV and not prefiltered:
        raise ValueError("PREFILTERED_ENV requires prefiltered environment levels")
    if mode == RenderMode.VPT_ENV and sampler is None:
        sampler = build_sampler(env)
    seed = _sanitize_seed(seed)
    step = scene.default_step() if settings.march_step is None else settings.march_step
    scene_args = scene.kernel_args()
    env_px = np.ascontiguousarray(env.pixels, dtype=np.float32)

    eyes = {}
    for eye_idx, eye in enumerate(EYES):
        cam = rig.camera(eye)
        h, w = cam.height, cam.width
        out = np.zeros((h, w, 3), dtype=np.float32)
        if mode == RenderMode.VPT_ENV:
            kernels.render_vpt(out, w, h, *cam.kernel_args(), *scene_args,
                               env_px, sampler.row_cdf, sampler.col_cdf,
                               sampler.pdf_texel, sampler.cos_edges,
                               int(spp), seed, int(frame_index), eye_idx,
                               settings.hg_g)
        elif mode == RenderMode.ABSORPTION_EMISSION:
            kernels.render_absorption_emission(out, w, h, *cam.kernel_args(),
                                               *scene_args, env_px, step)
        elif mode == RenderMode.GRADIENT_PHONG:
            kernels.render_gradient_phong(out, w, h, *cam.kernel_args(),
                                          *scene_args, env_px, step,
                                          settings.phong_ambient,
                                          settings.phong_diffuse,
                                          settings.phong_specular,
                                          settings.phong_shininess)
        else:
            blur = np.ascontiguousarray(prefiltered[-1].pixels, dtype=np.float32)
            amb = mean_radiance(prefiltered[-1])
            kernels.render_prefiltered_env(out, w, h, *cam.kernel_args(),
                                           *scene_args, env_px, blur,
                                           float(amb[0]), float(amb[1]), float(amb[2]),
                                           step)
        gbuf = render_gbuffer(scene, cam, step)
        eyes[eye] = EyeFrame(radiance=out, gbuffer=gbuf, camera=cam)
    return StereoFrame(index=int(frame_index), eyes=eyes, seed=seed)


# ---------------------------------------------------------------------------
# Direct access to the transport estimators (tests, oracles, CLI probes)

def trace_vpt(scene: Scene, env: RadianceMap, origin, direction,
              n_samples: int = 1, seed: int = 0, hg_g: float = 0.0,
              sampler: EnvSampler | None = None):
    """n independent single-scattering estimates along one ray, (n, 3)."""
    _require_hdr(env)
    if sampler is None:
        sampler = build_sampler(env)
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    o = np.asarray(origin, dtype=np.float64)
    out = np.zeros((int(n_samples), 3), dtype=np.float64)
    kernels.trace_vpt_samples(out, int(n_samples), *scene.kernel_args(),
                              np.ascontiguousarray(env.pixels, dtype=np.float32),
                              sampler.row_cdf, sampler.col_cdf,
                              sampler.pdf_texel, sampler.cos_edges,
                              float(o[0]), float(o[1]), float(o[2]),
                              float(d[0]), float(d[1]), float(d[2]),
                              float(hg_g), _sanitize_seed(seed))
    return out


def transmittance_estimates(scene: Scene, a, b, n: int = 1, seed: int = 0):
    """n independent ratio-tracking transmittance estimates for segment a->b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    seg = b - a
    dist = float(np.linalg.norm(seg))
    if dist == 0.0:
        raise ValueError("transmittance endpoints must differ")
    d = seg / dist
    out = np.zeros(int(n), dtype=np.float64)
    kernels.transmittance_batch(out, int(n), *scene.kernel_args(),
                                float(a[0]), float(a[1]), float(a[2]),
                                float(d[0]), float(d[1]), float(d[2]),
                                dist, _sanitize_seed(seed))
    return out


def transmittance(scene: Scene, a, b, seed: int = 0) -> float:
    """One unbiased transmittance estimate (expectation exp(-integral))."""
    return float(transmittance_estimates(scene, a, b, 1, seed)[0])


def transmittance_deterministic(scene: Scene, a, b, step: float | None = None) -> float:
    """Fine-step quadrature variant, for oracles and debugging."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    seg = b - a
    dist = float(np.linalg.norm(seg))
    if dist == 0.0:
        raise ValueError("transmittance endpoints must differ")
    d = seg / dist
    step = scene.default_step() if step is None else float(step)
    return float(kernels.fine_transmittance(*scene.kernel_args(),
                                            float(a[0]), float(a[1]), float(a[2]),
                                            float(d[0]), float(d[1]), float(d[2]),
                                            dist, step))


def reference_render(scene: Scene, env: RadianceMap, rig: StereoRig,
                     spp: int, seed: int, frame_index: int = 0,
                     sampler: EnvSampler | None = None) -> StereoFrame:
    """High-spp self-oracle used to build denoiser references."""
    return render(scene, env, rig, RenderMode.VPT_ENV, spp=spp, seed=seed,
                  frame_index=frame_index, sampler=sampler)
