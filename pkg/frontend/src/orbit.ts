// Orbit camera shared-convention math.
//
// The rig pose quaternion is yaw(azimuth about +z) * pitch(elevation about
// +y) applied to the local frame (forward +x, up +z); the rig sits at
// target - radius * forward. Quaternions are [w, x, y, z].

export type Quat = [number, number, number, number];
export type Vec3 = [number, number, number];

export interface OrbitState {
  azimuth: number;    // radians
  elevation: number;  // radians, positive looks down from above
  radius: number;
  target: Vec3;
}

export const DEFAULT_ORBIT: OrbitState = {
  azimuth: 0,
  elevation: 0.26,
  radius: 1.4,
  target: [0, 0, 0],
};

const MIN_RADIUS = 0.2;
const MAX_RADIUS = 10;
const MAX_ELEVATION = Math.PI / 2 - 0.02;

export function quatMultiply(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatFromAxisAngle(axis: Vec3, angle: number): Quat {
  const n = Math.hypot(axis[0], axis[1], axis[2]);
  const s = Math.sin(angle / 2) / n;
  return [Math.cos(angle / 2), axis[0] * s, axis[1] * s, axis[2] * s];
}

export function rotate(q: Quat, v: Vec3): Vec3 {
  const [w, x, y, z] = q;
  // q v q* via the expanded rotation matrix
  return [
    (1 - 2 * (y * y + z * z)) * v[0] + 2 * (x * y - w * z) * v[1] + 2 * (x * z + w * y) * v[2],
    2 * (x * y + w * z) * v[0] + (1 - 2 * (x * x + z * z)) * v[1] + 2 * (y * z - w * x) * v[2],
    2 * (x * z - w * y) * v[0] + 2 * (y * z + w * x) * v[1] + (1 - 2 * (x * x + y * y)) * v[2],
  ];
}

export function orbitPose(state: OrbitState): { position: Vec3; orientation: Quat } {
  const q = quatMultiply(
    quatFromAxisAngle([0, 0, 1], state.azimuth),
    quatFromAxisAngle([0, 1, 0], state.elevation),
  );
  const forward = rotate(q, [1, 0, 0]);
  const position: Vec3 = [
    state.target[0] - state.radius * forward[0],
    state.target[1] - state.radius * forward[1],
    state.target[2] - state.radius * forward[2],
  ];
  return { position, orientation: q };
}

/** One drag gesture: horizontal pixels orbit in azimuth, vertical in elevation. */
export function applyDrag(state: OrbitState, dxPixels: number, dyPixels: number,
                          radiansPerPixel = 0.005): OrbitState {
  let elevation = state.elevation + dyPixels * radiansPerPixel;
  elevation = Math.min(MAX_ELEVATION, Math.max(-MAX_ELEVATION, elevation));
  let azimuth = state.azimuth - dxPixels * radiansPerPixel;
  if (azimuth > Math.PI) azimuth -= 2 * Math.PI;
  if (azimuth < -Math.PI) azimuth += 2 * Math.PI;
  return { ...state, azimuth, elevation };
}

/** Wheel zoom: positive delta moves away from the target. */
export function applyWheel(state: OrbitState, delta: number): OrbitState {
  const radius = Math.min(MAX_RADIUS,
    Math.max(MIN_RADIUS, state.radius * Math.exp(delta * 0.001)));
  return { ...state, radius };
}

/** Pan the orbit target in the camera's right/up plane. */
export function applyPan(state: OrbitState, dxPixels: number, dyPixels: number,
                         unitsPerPixel = 0.002): OrbitState {
  const { orientation } = orbitPose(state);
  const right = rotate(orientation, [0, -1, 0]);
  const up = rotate(orientation, [0, 0, 1]);
  const target: Vec3 = [
    state.target[0] + (-dxPixels * right[0] + dyPixels * up[0]) * unitsPerPixel,
    state.target[1] + (-dxPixels * right[1] + dyPixels * up[1]) * unitsPerPixel,
    state.target[2] + (-dxPixels * right[2] + dyPixels * up[2]) * unitsPerPixel,
  ];
  return { ...state, target };
}
