"""Numba kernels behind the renderer.

All stochastic kernels draw from counter-based streams keyed by
(seed, frame, eye, pixel, sample), so results are independent of thread
count and scheduling order. Scalars are float64 inside kernels; bulk
arrays (volume, images) are float32.
"""

from __future__ import annotations

import math
import os

import numpy as np
from numba import njit, prange, set_num_threads

U64 = np.uint64
BIG = 1.0e30
_MAX_TRACK_STEPS = 100_000

_threads = os.environ.get("VOXBEAM_THREADS")
if _threads:
    set_num_threads(max(1, int(_threads)))

_F = {"cache": True, "fastmath": True}


# ---------------------------------------------------------------------------
# Counter-based RNG (splitmix64 finalizer)

@njit(inline="always", **_F)
def _mix(z):
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(inline="always", **_F)
def ray_key(seed, frame, eye, pixel, sample):
    k = _mix(U64(seed) * U64(0x9E3779B97F4A7C15) + U64(0x632BE59BD9B4E019))
    k = _mix(k ^ (U64(frame) * U64(0xFF51AFD7ED558CCD) + U64(1)))
    k = _mix(k ^ (U64(eye) * U64(0xC4CEB9FE1A85EC53) + U64(2)))
    k = _mix(k ^ (U64(pixel) * U64(0xD6E8FEB86659FD93) + U64(3)))
    k = _mix(k ^ (U64(sample) * U64(0xA0761D6478BD642F) + U64(5)))
    return k


@njit(inline="always", **_F)
def u01(key, ctr):
    h = _mix(key ^ _mix(U64(ctr) + U64(0x9E3779B97F4A7C15)))
    return (h >> U64(11)) * (1.0 / 9007199254740992.0)


# ---------------------------------------------------------------------------
# Resampling

@njit(parallel=True, **_F)
def gather_bilinear(img, py, px, out):
    """img (H, W, C) -> out (N, C) at clamped subpixel (py, px) (N,)."""
    h, w, c = img.shape
    n = py.shape[0]
    for i in prange(n):
        y = py[i]
        x = px[i]
        if y < 0.0:
            y = 0.0
        elif y > h - 1.0:
            y = h - 1.0
        if x < 0.0:
            x = 0.0
        elif x > w - 1.0:
            x = w - 1.0
        y0 = int(y)
        x0 = int(x)
        y1 = min(y0 + 1, h - 1)
        x1 = min(x0 + 1, w - 1)
        fy = y - y0
        fx = x - x0
        for k in range(c):
            top = img[y0, x0, k] * (1 - fx) + img[y0, x1, k] * fx
            bot = img[y1, x0, k] * (1 - fx) + img[y1, x1, k] * fx
            out[i, k] = top * (1 - fy) + bot * fy


# ---------------------------------------------------------------------------
# Field queries

@njit(inline="always", **_F)
def _trilinear(values, ox, oy, oz, sx, sy, sz, px, py, pz):
    gx = (px - ox) / sx
    gy = (py - oy) / sy
    gz = (pz - oz) / sz
    nx, ny, nz = values.shape
    if gx < 0.0 or gy < 0.0 or gz < 0.0 or gx > nx - 1.0 or gy > ny - 1.0 or gz > nz - 1.0:
        return 0.0
    ix = min(int(gx), nx - 2)
    iy = min(int(gy), ny - 2)
    iz = min(int(gz), nz - 2)
    fx = gx - ix
    fy = gy - iy
    fz = gz - iz
    c00 = values[ix, iy, iz] * (1 - fx) + values[ix + 1, iy, iz] * fx
    c10 = values[ix, iy + 1, iz] * (1 - fx) + values[ix + 1, iy + 1, iz] * fx
    c01 = values[ix, iy, iz + 1] * (1 - fx) + values[ix + 1, iy, iz + 1] * fx
    c11 = values[ix, iy + 1, iz + 1] * (1 - fx) + values[ix + 1, iy + 1, iz + 1] * fx
    return (c00 * (1 - fy) + c10 * fy) * (1 - fz) + (c01 * (1 - fy) + c11 * fy) * fz


@njit(inline="always", **_F)
def _field_gradient(values, ox, oy, oz, sx, sy, sz, px, py, pz):
    gx = (_trilinear(values, ox, oy, oz, sx, sy, sz, px + sx, py, pz)
          - _trilinear(values, ox, oy, oz, sx, sy, sz, px - sx, py, pz)) / (2.0 * sx)
    gy = (_trilinear(values, ox, oy, oz, sx, sy, sz, px, py + sy, pz)
          - _trilinear(values, ox, oy, oz, sx, sy, sz, px, py - sy, pz)) / (2.0 * sy)
    gz = (_trilinear(values, ox, oy, oz, sx, sy, sz, px, py, pz + sz)
          - _trilinear(values, ox, oy, oz, sx, sy, sz, px, py, pz - sz)) / (2.0 * sz)
    return gx, gy, gz


@njit(inline="always", **_F)
def _classify(tf_s, tf_rgb, tf_scale, sigma_max, s):
    if s <= 0.0:
        return tf_rgb[0, 0], tf_rgb[0, 1], tf_rgb[0, 2], tf_scale[0] * sigma_max
    n = tf_s.shape[0]
    if s >= 1.0:
        return tf_rgb[n - 1, 0], tf_rgb[n - 1, 1], tf_rgb[n - 1, 2], tf_scale[n - 1] * sigma_max
    i = 0
    while i < n - 2 and tf_s[i + 1] <= s:
        i += 1
    t = (s - tf_s[i]) / (tf_s[i + 1] - tf_s[i])
    r = tf_rgb[i, 0] * (1 - t) + tf_rgb[i + 1, 0] * t
    g = tf_rgb[i, 1] * (1 - t) + tf_rgb[i + 1, 1] * t
    b = tf_rgb[i, 2] * (1 - t) + tf_rgb[i + 1, 2] * t
    sig = (tf_scale[i] * (1 - t) + tf_scale[i + 1] * t) * sigma_max
    return r, g, b, sig


@njit(inline="always", **_F)
def _ray_box(ox, oy, oz, dx, dy, dz, lx, ly, lz, hx, hy, hz):
    t0 = -BIG
    t1 = BIG
    for axis in range(3):
        if axis == 0:
            o, d, lo, hi = ox, dx, lx, hx
        elif axis == 1:
            o, d, lo, hi = oy, dy, ly, hy
        else:
            o, d, lo, hi = oz, dz, lz, hz
        if abs(d) < 1e-15:
            if o < lo or o > hi:
                return 1.0, -1.0
        else:
            tn = (lo - o) / d
            tf = (hi - o) / d
            if tn > tf:
                tn, tf = tf, tn
            if tn > t0:
                t0 = tn
            if tf < t1:
                t1 = tf
    return t0, t1


# ---------------------------------------------------------------------------
# Environment lookups and sampling

@njit(inline="always", **_F)
def _env_lookup(pixels, dx, dy, dz):
    h, w = pixels.shape[0], pixels.shape[1]
    cz = dz
    if cz > 1.0:
        cz = 1.0
    elif cz < -1.0:
        cz = -1.0
    theta = math.acos(cz)
    phi = math.atan2(dy, dx)
    row = theta / math.pi * h - 0.5
    col = (phi + math.pi) / (2.0 * math.pi) * w - 0.5
    r0 = int(math.floor(row))
    c0 = int(math.floor(col))
    fr = row - r0
    fc = col - c0
    r0c = min(max(r0, 0), h - 1)
    r1c = min(max(r0 + 1, 0), h - 1)
    c0w = c0 % w
    c1w = (c0 + 1) % w
    outr = ((pixels[r0c, c0w, 0] * (1 - fc) + pixels[r0c, c1w, 0] * fc) * (1 - fr)
            + (pixels[r1c, c0w, 0] * (1 - fc) + pixels[r1c, c1w, 0] * fc) * fr)
    outg = ((pixels[r0c, c0w, 1] * (1 - fc) + pixels[r0c, c1w, 1] * fc) * (1 - fr)
            + (pixels[r1c, c0w, 1] * (1 - fc) + pixels[r1c, c1w, 1] * fc) * fr)
    outb = ((pixels[r0c, c0w, 2] * (1 - fc) + pixels[r0c, c1w, 2] * fc) * (1 - fr)
            + (pixels[r1c, c0w, 2] * (1 - fc) + pixels[r1c, c1w, 2] * fc) * fr)
    return outr, outg, outb


@njit(inline="always", **_F)
def _bisect_right(arr, v, lo, hi):
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(inline="always", **_F)
def _env_sample(pixels, row_cdf, col_cdf, pdf_texel, cos_edges, u1, u2):
    h, w = pixels.shape[0], pixels.shape[1]
    r = _bisect_right(row_cdf, u1, 0, h)
    if r > h - 1:
        r = h - 1
    lo = row_cdf[r - 1] if r > 0 else 0.0
    span = row_cdf[r] - lo
    fr = (u1 - lo) / span if span > 0.0 else 0.5
    row = col_cdf[r]
    c = _bisect_right(row, u2, 0, w)
    if c > w - 1:
        c = w - 1
    lo_c = row[c - 1] if c > 0 else 0.0
    span_c = row[c] - lo_c
    fc = (u2 - lo_c) / span_c if span_c > 0.0 else 0.5
    cos_t = cos_edges[r] + fr * (cos_edges[r + 1] - cos_edges[r])
    if cos_t > 1.0:
        cos_t = 1.0
    elif cos_t < -1.0:
        cos_t = -1.0
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    phi = -math.pi + (c + fc) * (2.0 * math.pi / w)
    dx = sin_t * math.cos(phi)
    dy = sin_t * math.sin(phi)
    dz = cos_t
    lr, lg, lb = _env_lookup(pixels, dx, dy, dz)
    return dx, dy, dz, pdf_texel[r, c], lr, lg, lb


@njit(inline="always", **_F)
def _phase_hg(cos_theta, g):
    if g == 0.0:
        return 1.0 / (4.0 * math.pi)
    denom = 1.0 + g * g - 2.0 * g * cos_theta
    return (1.0 - g * g) / (4.0 * math.pi * denom * math.sqrt(denom))


# ---------------------------------------------------------------------------
# Transport estimators

@njit(inline="always", **_F)
def _delta_track(values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
                 tf_s, tf_rgb, tf_scale, sigma_max,
                 rx, ry, rz, dx, dy, dz, key, ctr):
    """Woodcock tracking: (hit, x, y, z, albedo rgb, ctr)."""
    t0, t1 = _ray_box(rx, ry, rz, dx, dy, dz, lx, ly, lz, hx, hy, hz)
    if t0 < 0.0:
        t0 = 0.0
    if t1 <= t0:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, ctr
    t = t0
    inv = 1.0 / sigma_max
    for _ in range(_MAX_TRACK_STEPS):
        u = u01(key, ctr)
        ctr += 1
        t -= math.log(1.0 - u) * inv
        if t >= t1:
            return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, ctr
        px = rx + t * dx
        py = ry + t * dy
        pz = rz + t * dz
        s = _trilinear(values, ox, oy, oz, sx, sy, sz, px, py, pz)
        ar, ag, ab, sig = _classify(tf_s, tf_rgb, tf_scale, sigma_max, s)
        u2 = u01(key, ctr)
        ctr += 1
        if u2 * sigma_max < sig:
            return True, px, py, pz, ar, ag, ab, ctr
    return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, ctr


@njit(inline="always", **_F)
def _ratio_track(values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
                 tf_s, tf_rgb, tf_scale, sigma_max,
                 rx, ry, rz, dx, dy, dz, dist, key, ctr):
    """Ratio-tracking transmittance estimate along [0, dist]."""
    t0, t1 = _ray_box(rx, ry, rz, dx, dy, dz, lx, ly, lz, hx, hy, hz)
    if t0 < 0.0:
        t0 = 0.0
    if t1 > dist:
        t1 = dist
    if t1 <= t0:
        return 1.0, ctr
    tr = 1.0
    t = t0
    inv = 1.0 / sigma_max
    for _ in range(_MAX_TRACK_STEPS):
        u = u01(key, ctr)
        ctr += 1
        t -= math.log(1.0 - u) * inv
        if t >= t1:
            break
        px = rx + t * dx
        py = ry + t * dy
        pz = rz + t * dz
        s = _trilinear(values, ox, oy, oz, sx, sy, sz, px, py, pz)
        _, _, _, sig = _classify(tf_s, tf_rgb, tf_scale, sigma_max, s)
        tr *= 1.0 - sig / sigma_max
        if tr <= 0.0:
            return 0.0, ctr
    return tr, ctr


@njit(**_F)
def fine_transmittance(values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
                       tf_s, tf_rgb, tf_scale, sigma_max,
                       rx, ry, rz, dx, dy, dz, dist, step):
    """Deterministic midpoint-rule transmittance along [0, dist]."""
    t0, t1 = _ray_box(rx, ry, rz, dx, dy, dz, lx, ly, lz, hx, hy, hz)
    if t0 < 0.0:
        t0 = 0.0
    if t1 > dist:
        t1 = dist
    if t1 <= t0:
        return 1.0
    n = max(1, int(math.ceil((t1 - t0) / step)))
    dt = (t1 - t0) / n
    tau = 0.0
    for i in range(n):
        t = t0 + (i + 0.5) * dt
        s = _trilinear(values, ox, oy, oz, sx, sy, sz,
                       rx + t * dx, ry + t * dy, rz + t * dz)
        _, _, _, sig = _classify(tf_s, tf_rgb, tf_scale, sigma_max, s)
        tau += sig * dt
    return math.exp(-tau)


@njit(inline="always", **_F)
def _trace_vpt_one(values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
                   tf_s, tf_rgb, tf_scale, sigma_max,
                   env, row_cdf, col_cdf, pdf_texel, cos_edges,
                   rx, ry, rz, dx, dy, dz, hg_g, key):
    """Single-scattering estimate: delta tracking + one NEE light sample."""
    ctr = 0
    hit, px, py, pz, ar, ag, ab, ctr = _delta_track(
        values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
        tf_s, tf_rgb, tf_scale, sigma_max, rx, ry, rz, dx, dy, dz, key, ctr)
    if not hit:
        er, eg, eb = _env_lookup(env, dx, dy, dz)
        return er, eg, eb
    u1 = u01(key, ctr)
    ctr += 1
    u2 = u01(key, ctr)
    ctr += 1
    wx, wy, wz, pdf, lr, lg, lb = _env_sample(env, row_cdf, col_cdf, pdf_texel,
                                              cos_edges, u1, u2)
    tr, ctr = _ratio_track(values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
                           tf_s, tf_rgb, tf_scale, sigma_max,
                           px, py, pz, wx, wy, wz, BIG, key, ctr)
    ph = _phase_hg(dx * wx + dy * wy + dz * wz, hg_g)
    scale = ph * tr / pdf
    return ar * lr * scale, ag * lg * scale, ab * lb * scale


@njit(parallel=True, **_F)
def render_vpt(out, width, height,
               cpx, cpy, cpz, rxv, ryv, rzv, uxv, uyv, uzv, fxv, fyv, fzv,
               tan_half, aspect,
               values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
               tf_s, tf_rgb, tf_scale, sigma_max,
               env, row_cdf, col_cdf, pdf_texel, cos_edges,
               spp, seed, frame, eye, hg_g):
    n = width * height
    for p in prange(n):
        iy = p // width
        ix = p % width
        xn = ((ix + 0.5) / width * 2.0 - 1.0) * tan_half * aspect
        yn = (1.0 - (iy + 0.5) / height * 2.0) * tan_half
        dx = fxv + xn * rxv + yn * uxv
        dy = fyv + xn * ryv + yn * uyv
        dz = fzv + xn * rzv + yn * uzv
        inv = 1.0 / math.sqrt(dx * dx + dy * dy + dz * dz)
        dx *= inv
        dy *= inv
        dz *= inv
        ar = 0.0
        ag = 0.0
        ab = 0.0
        for s in range(spp):
            key = ray_key(seed, frame, eye, p, s)
            r, g, b = _trace_vpt_one(
                values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
                tf_s, tf_rgb, tf_scale, sigma_max,
                env, row_cdf, col_cdf, pdf_texel, cos_edges,
                cpx, cpy, cpz, dx, dy, dz, hg_g, key)
            ar += r
            ag += g
            ab += b
        out[iy, ix, 0] = ar / spp
        out[iy, ix, 1] = ag / spp
        out[iy, ix, 2] = ab / spp


@njit(parallel=True, **_F)
def trace_vpt_samples(out, n,
                      values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
                      tf_s, tf_rgb, tf_scale, sigma_max,
                      env, row_cdf, col_cdf, pdf_texel, cos_edges,
                      rx, ry, rz, dx, dy, dz, hg_g, seed):
    for i in prange(n):
        key = ray_key(seed, 0, 0, i, 0)
        r, g, b = _trace_vpt_one(
            values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
            tf_s, tf_rgb, tf_scale, sigma_max,
            env, row_cdf, col_cdf, pdf_texel, cos_edges,
            rx, ry, rz, dx, dy, dz, hg_g, key)
        out[i, 0] = r
        out[i, 1] = g
        out[i, 2] = b


@njit(parallel=True, **_F)
def transmittance_batch(out, n,
                        values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
                        tf_s, tf_rgb, tf_scale, sigma_max,
                        ax, ay, az, dx, dy, dz, dist, seed):
    for i in prange(n):
        key = ray_key(seed, 0, 1, i, 0)
        tr, _ = _ratio_track(values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
                             tf_s, tf_rgb, tf_scale, sigma_max,
                             ax, ay, az, dx, dy, dz, dist, key, 0)
        out[i] = tr


# ---------------------------------------------------------------------------
# Deterministic G-buffer proxy

@njit(parallel=True, **_F)
def gbuffer_march(out_x, out_z, out_alb, out_grad, out_cov, width, height,
                  cpx, cpy, cpz, rxv, ryv, rzv, uxv, uyv, uzv, fxv, fyv, fzv,
                  tan_half, aspect,
                  values, ox, oy, oz, sx, sy, sz, lx, ly, lz, hx, hy, hz,
                  tf_s, tf_rgb, tf_scale, sigma_max, step):
    n = width * height
    for p in prange(n):
        iy = p // width
        ix = p % width
        xn = ((ix + 0.5) / width * 2.0 - 1.0) * tan_half * aspect
        yn = (1.0 - (iy + 0.5) / height * 2.0) * tan_half
        dx = fxv + xn * rxv + yn * uxv
        dy = fyv + xn * ryv + yn * uyv
        dz = fzv + xn * rzv + yn * uzv
        inv = 1.0 / math.sqrt(dx * dx + dy * dy + dz * dz)
        dx *= inv
        dy *= inv
        dz *= inv
        t0, t1 = _ray_box(cpx, cpy, cpz, dx, dy, dz, lx, ly, lz, hx, hy, hz)
        if t0 < 0.0:
            t0 = 0.0
        found = False
        trans = 1.0
        fx = 0.0
        fy = 0.0
        fz = 0.0
        if t1 > t0:
            nsteps = int(math.ceil((t1 - t0) / step))
            for i in range(nsteps):
                seg = t0 + i * step
                w2 = min(step, t1 - seg)
                t = seg + 0.5 * w2
                px = cpx + t * dx
                py = cpy + t * dy
                pz = cpz + t * dz
                s = _trilinear(values, ox, oy, oz, sx, sy, sz, px, py, pz)
                _, _, _, sig = _classify(tf_s, tf_rgb, tf_scale, sigma_max, s)
                trans *= math.exp(-sig * w2)
                if not found and 1.0 - trans >= 0.5:
                    found = True
                    fx = px
                    fy = py
                    fz = pz
                if trans < 1e-4:
                    break
        out_cov[iy, ix] = 1.0 - trans
        if found:
            out_x[iy, ix, 0] = fx
            out_x[iy, ix, 1] = fy
            out_x[iy, ix, 2] = fz
            out_z[iy, ix] = ((fx - cpx) * fxv + (fy - cpy) * fyv + (fz - cpz) * fzv)
            s = _trilinear(values, ox, oy, oz, sx, sy, sz, fx, fy, fz)
            ar, ag, ab, _ = _classify(tf_s, tf_rgb, tf_scale, sigma_max, s)
            out_alb[iy, ix, 0] = ar
            out_alb[iy, ix, 1] = ag
            out_alb[iy, ix, 2] = ab
            gx, gy, gz = _field_gradient(values, ox, oy, oz, sx, sy, sz, fx, fy, fz)
            out_grad[iy, ix, 0] = gx
            out_grad[iy, ix, 1] = gy
            out_grad[iy, ix, 2] = gz
        else:
            out_x[iy, ix, 0] = 0.0
            out_x[iy, ix, 1] = 0.0
            out_x[iy, ix, 2] = 0.0
            out_z[iy, ix] = BIG
            out_alb[iy, ix, 0] = 0.0
            out_alb[iy, ix, 1] = 0.0
            out_alb[iy, ix, 2] = 0.0
            out_grad[iy, ix, 0] = 0.0
            out_grad[iy, ix, 1] = 0.0
            out_grad[iy, ix, 2] = 0.0


# ---------------------------------------------------------------------------
# Baseline illumination modes (deterministic ray marches)

@njit(parallel=True, **_F)
def render_absorption_emission(out, width, height,
                               cpx, cpy, cpz, rxv, ryv, rzv, uxv, uyv, uzv,
                               fxv, fyv, fzv, tan_half, aspect,
                               values, ox, oy, oz, sx, sy, sz,
                               lx, ly, lz, hx, hy, hz,
                               tf_s, tf_rgb, tf_scale, sigma_max,
                               env, step):
    n = width * height
    for p in prange(n):
        iy = p // width
        ix = p % width
        xn = ((ix + 0.5) / width * 2.0 - 1.0) * tan_half * aspect
        yn = (1.0 - (iy + 0.5) / height * 2.0) * tan_half
        dx = fxv + xn * rxv + yn * uxv
        dy = fyv + xn * ryv + yn * uyv
        dz = fzv + xn * rzv + yn * uzv
        inv = 1.0 / math.sqrt(dx * dx + dy * dy + dz * dz)
        dx *= inv
        dy *= inv
        dz *= inv
        t0, t1 = _ray_box(cpx, cpy, cpz, dx, dy, dz, lx, ly, lz, hx, hy, hz)
        if t0 < 0.0:
            t0 = 0.0
        cr = 0.0
        cg = 0.0
        cb = 0.0
        trans = 1.0
        if t1 > t0:
            nsteps = int(math.ceil((t1 - t0) / step))
            for i in range(nsteps):
                seg = t0 + i * step
                w2 = min(step, t1 - seg)
                t = seg + 0.5 * w2
                px = cpx + t * dx
                py = cpy + t * dy
                pz = cpz + t * dz
                s = _trilinear(values, ox, oy, oz, sx, sy, sz, px, py, pz)
                ar, ag, ab, sig = _classify(tf_s, tf_rgb, tf_scale, sigma_max, s)
                a = 1.0 - math.exp(-sig * w2)
                cr += trans * a * ar
                cg += trans * a * ag
                cb += trans * a * ab
                trans *= 1.0 - a
                if trans < 1e-4:
                    break
        er, eg, eb = _env_lookup(env, dx, dy, dz)
        out[iy, ix, 0] = cr + trans * er
        out[iy, ix, 1] = cg + trans * eg
        out[iy, ix, 2] = cb + trans * eb


@njit(parallel=True, **_F)
def render_gradient_phong(out, width, height,
                          cpx, cpy, cpz, rxv, ryv, rzv, uxv, uyv, uzv,
                          fxv, fyv, fzv, tan_half, aspect,
                          values, ox, oy, oz, sx, sy, sz,
                          lx, ly, lz, hx, hy, hz,
                          tf_s, tf_rgb, tf_scale, sigma_max,
                          env, step, k_ambient, k_diffuse, k_specular, shininess):
    n = width * height
    for p in prange(n):
        iy = p // width
        ix = p % width
        xn = ((ix + 0.5) / width * 2.0 - 1.0) * tan_half * aspect
        yn = (1.0 - (iy + 0.5) / height * 2.0) * tan_half
        dx = fxv + xn * rxv + yn * uxv
        dy = fyv + xn * ryv + yn * uyv
        dz = fzv + xn * rzv + yn * uzv
        inv = 1.0 / math.sqrt(dx * dx + dy * dy + dz * dz)
        dx *= inv
        dy *= inv
        dz *= inv
        t0, t1 = _ray_box(cpx, cpy, cpz, dx, dy, dz, lx, ly, lz, hx, hy, hz)
        if t0 < 0.0:
            t0 = 0.0
        cr = 0.0
        cg = 0.0
        cb = 0.0
        trans = 1.0
        if t1 > t0:
            nsteps = int(math.ceil((t1 - t0) / step))
            for i in range(nsteps):
                seg = t0 + i * step
                w2 = min(step, t1 - seg)
                t = seg + 0.5 * w2
                px = cpx + t * dx
                py = cpy + t * dy
                pz = cpz + t * dz
                s = _trilinear(values, ox, oy, oz, sx, sy, sz, px, py, pz)
                ar, ag, ab, sig = _classify(tf_s, tf_rgb, tf_scale, sigma_max, s)
                gx, gy, gz = _field_gradient(values, ox, oy, oz, sx, sy, sz, px, py, pz)
                gn = math.sqrt(gx * gx + gy * gy + gz * gz)
                # headlight at the camera: L = V
                if gn > 1e-9:
                    nx2 = gx / gn
                    ny2 = gy / gn
                    nz2 = gz / gn
                    lxv = cpx - px
                    lyv = cpy - py
                    lzv = cpz - pz
                    ln = math.sqrt(lxv * lxv + lyv * lyv + lzv * lzv)
                    if ln > 1e-12:
                        lxv /= ln
                        lyv /= ln
                        lzv /= ln
                    ndl = nx2 * lxv + ny2 * lyv + nz2 * lzv
                    if ndl < 0.0:
                        # treat gradients as unoriented surface normals
                        ndl = -ndl
                        nx2 = -nx2
                        ny2 = -ny2
                        nz2 = -nz2
                    rrx = 2.0 * ndl * nx2 - lxv
                    rry = 2.0 * ndl * ny2 - lyv
                    rrz = 2.0 * ndl * nz2 - lzv
                    rdv = rrx * lxv + rry * lyv + rrz * lzv
                    if rdv < 0.0:
                        rdv = 0.0
                    spec = k_specular * rdv ** shininess
                    shr = ar * (k_ambient + k_diffuse * ndl) + spec
                    shg = ag * (k_ambient + k_diffuse * ndl) + spec
                    shb = ab * (k_ambient + k_diffuse * ndl) + spec
                else:
                    shr = ar * k_ambient
                    shg = ag * k_ambient
                    shb = ab * k_ambient
                a = 1.0 - math.exp(-sig * w2)
                cr += trans * a * shr
                cg += trans * a * shg
                cb += trans * a * shb
                trans *= 1.0 - a
                if trans < 1e-4:
                    break
        er, eg, eb = _env_lookup(env, dx, dy, dz)
        out[iy, ix, 0] = cr + trans * er
        out[iy, ix, 1] = cg + trans * eg
        out[iy, ix, 2] = cb + trans * eb


@njit(parallel=True, **_F)
def render_prefiltered_env(out, width, height,
                           cpx, cpy, cpz, rxv, ryv, rzv, uxv, uyv, uzv,
                           fxv, fyv, fzv, tan_half, aspect,
                           values, ox, oy, oz, sx, sy, sz,
                           lx, ly, lz, hx, hy, hz,
                           tf_s, tf_rgb, tf_scale, sigma_max,
                           env, blur, amb_r, amb_g, amb_b, step):
    n = width * height
    for p in prange(n):
        iy = p // width
        ix = p % width
        xn = ((ix + 0.5) / width * 2.0 - 1.0) * tan_half * aspect
        yn = (1.0 - (iy + 0.5) / height * 2.0) * tan_half
        dx = fxv + xn * rxv + yn * uxv
        dy = fyv + xn * ryv + yn * uyv
        dz = fzv + xn * rzv + yn * uzv
        inv = 1.0 / math.sqrt(dx * dx + dy * dy + dz * dz)
        dx *= inv
        dy *= inv
        dz *= inv
        t0, t1 = _ray_box(cpx, cpy, cpz, dx, dy, dz, lx, ly, lz, hx, hy, hz)
        if t0 < 0.0:
            t0 = 0.0
        cr = 0.0
        cg = 0.0
        cb = 0.0
        trans = 1.0
        if t1 > t0:
            nsteps = int(math.ceil((t1 - t0) / step))
            for i in range(nsteps):
                seg = t0 + i * step
                w2 = min(step, t1 - seg)
                t = seg + 0.5 * w2
                px = cpx + t * dx
                py = cpy + t * dy
                pz = cpz + t * dz
                s = _trilinear(values, ox, oy, oz, sx, sy, sz, px, py, pz)
                ar, ag, ab, sig = _classify(tf_s, tf_rgb, tf_scale, sigma_max, s)
                gx, gy, gz = _field_gradient(values, ox, oy, oz, sx, sy, sz, px, py, pz)
                gn = math.sqrt(gx * gx + gy * gy + gz * gz)
                if gn > 1e-9:
                    ir, ig, ib = _env_lookup(blur, gx / gn, gy / gn, gz / gn)
                else:
                    ir = amb_r
                    ig = amb_g
                    ib = amb_b
                a = 1.0 - math.exp(-sig * w2)
                cr += trans * a * ar * ir
                cg += trans * a * ag * ig
                cb += trans * a * ab * ib
                trans *= 1.0 - a
                if trans < 1e-4:
                    break
        er, eg, eb = _env_lookup(env, dx, dy, dz)
        out[iy, ix, 0] = cr + trans * er
        out[iy, ix, 1] = cg + trans * eg
        out[iy, ix, 2] = cb + trans * eb
