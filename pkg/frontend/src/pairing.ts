// Frame-pair assembly: an eye's image is shown only once its partner with
// the same frame id has arrived, so the display never tears.

import type { FramePacket } from './protocol.js';

export interface FramePair {
  frameId: number;
  left: FramePacket;
  right: FramePacket;
}

export class PairBuffer {
  private latest: { L?: FramePacket; R?: FramePacket } = {};
  private displayedId = -1;

  /** Returns a complete pair when this packet finishes one, else null. */
  push(packet: FramePacket): FramePair | null {
    this.latest[packet.eye] = packet;
    const l = this.latest.L;
    const r = this.latest.R;
    if (l && r && l.frameId === r.frameId && l.frameId > this.displayedId) {
      this.displayedId = l.frameId;
      return { frameId: l.frameId, left: l, right: r };
    }
    return null;
  }

  reset(): void {
    this.latest = {};
    this.displayedId = -1;
  }
}
