// Input-to-control-message plumbing: every accepted gesture or panel change
// produces exactly one message; pose messages are coalesced to at most one
// per interval so a drag cannot flood the single-session service.

import { OrbitState, orbitPose } from './orbit.js';
import { poseMessage } from './protocol.js';

export const POSE_INTERVAL_MS = 1000 / 30;

export class PoseCoalescer {
  private lastSent = -Infinity;
  private pending: OrbitState | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(private send: (text: string) => void,
              private now: () => number = () => performance.now()) {}

  /** Called on every orbit change; sends immediately when the window allows,
   * otherwise keeps only the newest state and flushes it when it reopens. */
  update(state: OrbitState): void {
    const t = this.now();
    if (t - this.lastSent >= POSE_INTERVAL_MS) {
      this.emit(state, t);
      return;
    }
    this.pending = state;
    if (this.timer === null) {
      const wait = Math.max(0, POSE_INTERVAL_MS - (t - this.lastSent));
      this.timer = setTimeout(() => {
        this.timer = null;
        if (this.pending) {
          this.emit(this.pending, this.now());
        }
      }, wait);
    }
  }

  private emit(state: OrbitState, t: number): void {
    const { position, orientation } = orbitPose(state);
    this.send(poseMessage({ position, orientation }));
    this.lastSent = t;
    this.pending = null;
  }

  dispose(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.pending = null;
  }
}
