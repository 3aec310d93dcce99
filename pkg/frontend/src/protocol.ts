// Frame packets and control messages of the voxbeam streaming service.
//
// Packet layout (little-endian), 13-byte header:
//   0  2  magic "VB"
//   2  1  version (1)
//   3  4  frame id (u32)
//   7  1  eye (0 = L, 1 = R)
//   8  2  width (u16)
//  10  2  height (u16)
//  12  1  encoding (0 = raw tone-mapped RGB8, 1 = PNG)
//  13     payload

export const HEADER_LEN = 13;
export const VERSION = 1;
export const ENCODING_RAW = 0;
export const ENCODING_PNG = 1;

export type Eye = 'L' | 'R';

export interface FramePacket {
  frameId: number;
  eye: Eye;
  width: number;
  height: number;
  encoding: number;
  payload: Uint8Array;
}

export function decodeFramePacket(data: ArrayBuffer): FramePacket {
  if (data.byteLength < HEADER_LEN) {
    throw new Error(`packet too short: ${data.byteLength} < ${HEADER_LEN}`);
  }
  const view = new DataView(data);
  if (view.getUint8(0) !== 0x56 || view.getUint8(1) !== 0x42) {
    throw new Error('bad magic');
  }
  const version = view.getUint8(2);
  if (version !== VERSION) {
    throw new Error(`unsupported version ${version}`);
  }
  const frameId = view.getUint32(3, true);
  const eyeIdx = view.getUint8(7);
  if (eyeIdx !== 0 && eyeIdx !== 1) {
    throw new Error(`bad eye ${eyeIdx}`);
  }
  const width = view.getUint16(8, true);
  const height = view.getUint16(10, true);
  const encoding = view.getUint8(12);
  const payload = new Uint8Array(data, HEADER_LEN);
  if (encoding === ENCODING_RAW) {
    const expected = width * height * 3;
    if (payload.length !== expected) {
      throw new Error(`raw payload length ${payload.length}, expected ${expected}`);
    }
  } else if (encoding !== ENCODING_PNG) {
    throw new Error(`unknown encoding ${encoding}`);
  }
  return { frameId, eye: eyeIdx === 0 ? 'L' : 'R', width, height, encoding, payload };
}

/** Expand a raw RGB8 payload into RGBA pixels for a canvas ImageData. */
export function rawToRgba(packet: FramePacket) {
  const n = packet.width * packet.height;
  // explicit ArrayBuffer backing keeps ImageData happy under strict DOM types
  const out = new Uint8ClampedArray(new ArrayBuffer(n * 4));
  const src = packet.payload;
  for (let i = 0; i < n; i++) {
    out[i * 4] = src[i * 3];
    out[i * 4 + 1] = src[i * 3 + 1];
    out[i * 4 + 2] = src[i * 3 + 2];
    out[i * 4 + 3] = 255;
  }
  return out;
}

// -- control messages -------------------------------------------------------

export interface Pose {
  position: [number, number, number];
  orientation: [number, number, number, number]; // [w, x, y, z]
}

export function poseMessage(pose: Pose): string {
  return JSON.stringify({
    type: 'pose',
    position: pose.position,
    orientation: pose.orientation,
  });
}

export function modeMessage(mode: string): string {
  return JSON.stringify({ type: 'mode', mode });
}

export function envMessage(name: string): string {
  return JSON.stringify({ type: 'env', name });
}

export function tfMessage(name: string): string {
  return JSON.stringify({ type: 'tf', name });
}

export function paramsMessage(params: Record<string, number>): string {
  return JSON.stringify({ type: 'params', params });
}

export function volumeOffsetMessage(offset: [number, number, number]): string {
  return JSON.stringify({ type: 'volume_offset', offset });
}

export interface StatsMessage {
  type: 'stats';
  frame: number;
  T: number;
  render_ms: number;
  denoise_ms: number;
  mode: string;
}

export type ServerText =
  | StatsMessage
  | { type: 'error'; message: string };

export function parseServerText(text: string): ServerText {
  const msg = JSON.parse(text);
  if (msg.type !== 'stats' && msg.type !== 'error') {
    throw new Error(`unexpected server message type ${msg.type}`);
  }
  return msg as ServerText;
}
