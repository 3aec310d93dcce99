import { describe, expect, it } from 'vitest';

import { PairBuffer } from '../src/pairing.js';
import type { FramePacket } from '../src/protocol.js';

function packet(frameId: number, eye: 'L' | 'R'): FramePacket {
  return {
    frameId, eye, width: 1, height: 1, encoding: 0,
    payload: new Uint8Array([0, 0, 0]),
  };
}

describe('frame pairing', () => {
  it('emits a pair only when both eyes share a frame id', () => {
    const buf = new PairBuffer();
    expect(buf.push(packet(0, 'L'))).toBeNull();
    const pair = buf.push(packet(0, 'R'));
    expect(pair?.frameId).toBe(0);
  });

  it('holds back mismatched ids until a matching partner arrives', () => {
    const buf = new PairBuffer();
    expect(buf.push(packet(3, 'L'))).toBeNull();
    expect(buf.push(packet(4, 'R'))).toBeNull(); // 3/4 would tear
    const pair = buf.push(packet(4, 'L'));
    expect(pair?.frameId).toBe(4);
    expect(pair?.left.eye).toBe('L');
    expect(pair?.right.eye).toBe('R');
  });

  it('never re-emits or regresses to an older frame', () => {
    const buf = new PairBuffer();
    buf.push(packet(5, 'L'));
    expect(buf.push(packet(5, 'R'))?.frameId).toBe(5);
    expect(buf.push(packet(5, 'R'))).toBeNull();
    buf.push(packet(4, 'L'));
    expect(buf.push(packet(4, 'R'))).toBeNull();
  });

  it('reset clears state after a reconnect', () => {
    const buf = new PairBuffer();
    buf.push(packet(9, 'L'));
    buf.push(packet(9, 'R'));
    buf.reset();
    expect(buf.push(packet(0, 'L'))).toBeNull();
    expect(buf.push(packet(0, 'R'))?.frameId).toBe(0);
  });
});
