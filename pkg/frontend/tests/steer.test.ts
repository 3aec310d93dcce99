import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { DEFAULT_ORBIT, applyDrag, orbitPose } from '../src/orbit.js';
import { POSE_INTERVAL_MS, PoseCoalescer } from '../src/steer.js';

describe('pose steering', () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it('one drag gesture emits exactly one pose message matching the orbit math', () => {
    const sent: string[] = [];
    let t = 0;
    const poser = new PoseCoalescer((m) => sent.push(m), () => t);
    const dragged = applyDrag({ ...DEFAULT_ORBIT }, 120, -48);
    poser.update(dragged);
    expect(sent).toHaveLength(1);
    const msg = JSON.parse(sent[0]);
    expect(msg.type).toBe('pose');
    const expected = orbitPose(dragged);
    for (let i = 0; i < 3; i++) {
      expect(Math.abs(msg.position[i] - expected.position[i])).toBeLessThan(1e-12);
    }
    for (let i = 0; i < 4; i++) {
      expect(Math.abs(msg.orientation[i] - expected.orientation[i])).toBeLessThan(1e-12);
    }
  });

  it('coalesces a burst of updates to the cap and keeps the newest', () => {
    const sent: string[] = [];
    let t = 0;
    const poser = new PoseCoalescer((m) => sent.push(m), () => t);
    let state = { ...DEFAULT_ORBIT };
    for (let i = 0; i < 10; i++) {
      state = applyDrag(state, 5, 0);
      poser.update(state);        // all within one interval
    }
    expect(sent).toHaveLength(1);
    t += POSE_INTERVAL_MS + 1;
    vi.advanceTimersByTime(POSE_INTERVAL_MS + 1);
    expect(sent).toHaveLength(2); // trailing flush carries the newest state
    const last = JSON.parse(sent[1]);
    const expected = orbitPose(state);
    expect(last.orientation[0]).toBeCloseTo(expected.orientation[0], 12);
  });

  it('no input, no traffic', () => {
    const sent: string[] = [];
    new PoseCoalescer((m) => sent.push(m), () => 0);
    vi.advanceTimersByTime(1000);
    expect(sent).toHaveLength(0);
  });
});
