import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { describe, expect, it } from 'vitest';

import {
  applyDrag, applyWheel, orbitPose, OrbitState, Quat, rotate, Vec3,
} from '../src/orbit.js';

const goldenPath = join(dirname(fileURLToPath(import.meta.url)),
  '..', '..', 'tests', 'golden', 'framepackets.json');
const golden = JSON.parse(readFileSync(goldenPath, 'utf-8'));

/** Independent oracle: build the roll-free look rotation as a matrix from
 * basis vectors and convert it to a quaternion (Shepperd's method). */
function oracleOrbit(az: number, el: number, radius: number, target: Vec3) {
  const f: Vec3 = [
    Math.cos(el) * Math.cos(az),
    Math.cos(el) * Math.sin(az),
    -Math.sin(el),
  ];
  // roll-free: world right = normalize(f x world-up); local right is -y
  const rw: Vec3 = [Math.sin(az), -Math.cos(az), 0];
  const up: Vec3 = [
    rw[1] * f[2] - rw[2] * f[1],
    rw[2] * f[0] - rw[0] * f[2],
    rw[0] * f[1] - rw[1] * f[0],
  ];
  // column-major basis: local x -> f, local y -> -rw, local z -> up
  const m = [
    [f[0], -rw[0], up[0]],
    [f[1], -rw[1], up[1]],
    [f[2], -rw[2], up[2]],
  ];
  const trace = m[0][0] + m[1][1] + m[2][2];
  let q: Quat;
  if (trace > 0) {
    const s = Math.sqrt(trace + 1) * 2;
    q = [s / 4, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s,
         (m[1][0] - m[0][1]) / s];
  } else if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
    const s = Math.sqrt(1 + m[0][0] - m[1][1] - m[2][2]) * 2;
    q = [(m[2][1] - m[1][2]) / s, s / 4, (m[0][1] + m[1][0]) / s,
         (m[0][2] + m[2][0]) / s];
  } else if (m[1][1] > m[2][2]) {
    const s = Math.sqrt(1 + m[1][1] - m[0][0] - m[2][2]) * 2;
    q = [(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, s / 4,
         (m[1][2] + m[2][1]) / s];
  } else {
    const s = Math.sqrt(1 + m[2][2] - m[0][0] - m[1][1]) * 2;
    q = [(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s,
         (m[1][2] + m[2][1]) / s, s / 4];
  }
  const position: Vec3 = [
    target[0] - radius * f[0],
    target[1] - radius * f[1],
    target[2] - radius * f[2],
  ];
  return { position, orientation: q };
}

function quatClose(a: Quat, b: Quat, tol = 1e-6): boolean {
  const dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
  return Math.abs(Math.abs(dot) - 1) < tol;
}

describe('orbit pose', () => {
  it('matches the matrix-construction oracle across the parameter space', () => {
    for (const az of [-2.5, -0.7, 0, 0.4, 1.9, 3.0]) {
      for (const el of [-1.2, -0.3, 0, 0.5, 1.1]) {
        const state: OrbitState = {
          azimuth: az, elevation: el, radius: 2.2, target: [0.1, -0.3, 0.2],
        };
        const got = orbitPose(state);
        const want = oracleOrbit(az, el, 2.2, [0.1, -0.3, 0.2]);
        expect(quatClose(got.orientation, want.orientation)).toBe(true);
        for (let i = 0; i < 3; i++) {
          expect(got.position[i]).toBeCloseTo(want.position[i], 9);
        }
      }
    }
  });

  it('matches the frozen cross-language orbit cases within 1e-6', () => {
    for (const g of golden.orbits) {
      const got = orbitPose({
        azimuth: g.azimuth, elevation: g.elevation,
        radius: g.radius, target: g.target as Vec3,
      });
      for (let i = 0; i < 3; i++) {
        expect(Math.abs(got.position[i] - g.position[i])).toBeLessThan(1e-6);
      }
      expect(quatClose(got.orientation, g.orientation as Quat, 1e-6)).toBe(true);
    }
  });

  it('always looks at the target from the configured radius', () => {
    const state: OrbitState = {
      azimuth: 0.9, elevation: -0.4, radius: 3, target: [1, 2, 3],
    };
    const { position, orientation } = orbitPose(state);
    const f = rotate(orientation, [1, 0, 0]);
    const toTarget: Vec3 = [
      state.target[0] - position[0],
      state.target[1] - position[1],
      state.target[2] - position[2],
    ];
    const dist = Math.hypot(...toTarget);
    expect(dist).toBeCloseTo(3, 9);
    for (let i = 0; i < 3; i++) {
      expect(toTarget[i] / dist).toBeCloseTo(f[i], 9);
    }
  });

  it('drag orbits, clamps elevation, wraps azimuth', () => {
    let s: OrbitState = { azimuth: 0, elevation: 0, radius: 2, target: [0, 0, 0] };
    s = applyDrag(s, 100, 40);
    expect(s.azimuth).toBeCloseTo(-0.5);
    expect(s.elevation).toBeCloseTo(0.2);
    s = applyDrag(s, 0, 1e6);
    expect(s.elevation).toBeLessThan(Math.PI / 2);
    for (let i = 0; i < 5000; i++) {
      s = applyDrag(s, 97, 0); // keep spinning; azimuth must stay wrapped
      expect(Math.abs(s.azimuth)).toBeLessThanOrEqual(Math.PI + 1e-9);
    }
  });

  it('wheel zoom stays within limits and is multiplicative', () => {
    let s: OrbitState = { azimuth: 0, elevation: 0, radius: 2, target: [0, 0, 0] };
    const nearer = applyWheel(s, -300);
    expect(nearer.radius).toBeLessThan(2);
    for (let i = 0; i < 100; i++) s = applyWheel(s, 1e4);
    expect(s.radius).toBeLessThanOrEqual(10);
  });
});
