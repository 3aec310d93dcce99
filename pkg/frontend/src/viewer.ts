// Browser viewer: connects to the streaming service, shows paired stereo
// frames side by side (or fused as an anaglyph), and steers the renderer.

import {
  decodeFramePacket, ENCODING_RAW, envMessage, FramePacket, modeMessage,
  paramsMessage, parseServerText, rawToRgba, StatsMessage, tfMessage,
  volumeOffsetMessage,
} from './protocol.js';
import { applyDrag, applyPan, applyWheel, DEFAULT_ORBIT, OrbitState } from './orbit.js';
import { PairBuffer, FramePair } from './pairing.js';
import { PoseCoalescer } from './steer.js';

interface Elements {
  canvas: HTMLCanvasElement;
  status: HTMLElement;
  stats: HTMLElement;
  mode: HTMLSelectElement;
  env: HTMLSelectElement;
  tf: HTMLSelectElement;
  anaglyph: HTMLInputElement;
  sliders: Record<string, HTMLInputElement>;
}

export class Viewer {
  private ws: WebSocket | null = null;
  private pairs = new PairBuffer();
  private orbit: OrbitState = { ...DEFAULT_ORBIT };
  private poser: PoseCoalescer;
  private volumeOffset: [number, number, number] = [0, 0, 0];
  private retryMs = 500;
  private frameTimes: number[] = [];
  private dragging = false;
  private panning = false;
  private lastXY: [number, number] = [0, 0];

  constructor(private url: string, private el: Elements) {
    this.poser = new PoseCoalescer((text) => this.sendText(text));
    this.bindInputs();
  }

  connect(): void {
    this.el.status.textContent = `connecting to ${this.url} ...`;
    const ws = new WebSocket(this.url);
    ws.binaryType = 'arraybuffer';
    ws.onopen = () => {
      this.retryMs = 500;
      this.el.status.textContent = 'connected';
      this.pairs.reset();
      this.poser.update(this.orbit); // announce the initial viewpoint
    };
    ws.onmessage = (ev) => {
      if (ev.data instanceof ArrayBuffer) {
        this.onPacket(decodeFramePacket(ev.data));
      } else {
        this.onText(String(ev.data));
      }
    };
    ws.onclose = () => {
      this.ws = null;
      this.el.status.textContent = `disconnected; retrying in ${this.retryMs} ms`;
      setTimeout(() => this.connect(), this.retryMs);
      this.retryMs = Math.min(this.retryMs * 2, 10_000);
    };
    ws.onerror = () => ws.close();
    this.ws = ws;
  }

  private sendText(text: string): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(text);
    }
  }

  private onPacket(packet: FramePacket): void {
    const pair = this.pairs.push(packet);
    if (pair) {
      void this.draw(pair);
      const now = performance.now();
      this.frameTimes.push(now);
      while (this.frameTimes.length > 0 && this.frameTimes[0] < now - 2000) {
        this.frameTimes.shift();
      }
    }
  }

  private onText(text: string): void {
    const msg = parseServerText(text);
    if (msg.type === 'error') {
      this.el.status.textContent = `service error: ${msg.message}`;
      return;
    }
    this.showStats(msg);
  }

  private showStats(s: StatsMessage): void {
    const fps = this.frameTimes.length / 2;
    this.el.stats.textContent =
      `frame ${s.frame} | ${fps.toFixed(1)} fps | T=${s.T.toFixed(3)} | ` +
      `render ${s.render_ms.toFixed(1)} ms | denoise ${s.denoise_ms.toFixed(1)} ms | ` +
      `${s.mode}`;
    if (this.el.mode.value !== s.mode) {
      this.el.mode.value = s.mode; // reflect acknowledged state
    }
  }

  private async packetBitmap(p: FramePacket): Promise<ImageBitmap> {
    if (p.encoding === ENCODING_RAW) {
      const img = new ImageData(rawToRgba(p), p.width, p.height);
      return createImageBitmap(img);
    }
    const blob = new Blob([p.payload as BlobPart], { type: 'image/png' });
    return createImageBitmap(blob);
  }

  private async draw(pair: FramePair): Promise<void> {
    const { width, height } = pair.left;
    const ctx = this.el.canvas.getContext('2d')!;
    if (this.el.anaglyph.checked && pair.left.encoding === ENCODING_RAW) {
      // red from the left eye, green/blue from the right
      this.el.canvas.width = width;
      this.el.canvas.height = height;
      const l = rawToRgba(pair.left);
      const r = rawToRgba(pair.right);
      const fused = new Uint8ClampedArray(new ArrayBuffer(l.length));
      for (let i = 0; i < l.length; i += 4) {
        fused[i] = l[i];
        fused[i + 1] = r[i + 1];
        fused[i + 2] = r[i + 2];
        fused[i + 3] = 255;
      }
      ctx.putImageData(new ImageData(fused, width, height), 0, 0);
      return;
    }
    this.el.canvas.width = width * 2;
    this.el.canvas.height = height;
    const [bl, br] = await Promise.all(
      [pair.left, pair.right].map((p) => this.packetBitmap(p)));
    ctx.drawImage(bl, 0, 0);
    ctx.drawImage(br, width, 0);
  }

  private bindInputs(): void {
    const c = this.el.canvas;
    c.addEventListener('pointerdown', (e) => {
      this.dragging = true;
      this.panning = e.button === 2 || e.shiftKey;
      this.lastXY = [e.clientX, e.clientY];
      c.setPointerCapture(e.pointerId);
    });
    c.addEventListener('pointerup', () => {
      this.dragging = false;
    });
    c.addEventListener('contextmenu', (e) => e.preventDefault());
    c.addEventListener('pointermove', (e) => {
      if (!this.dragging) return;
      const dx = e.clientX - this.lastXY[0];
      const dy = e.clientY - this.lastXY[1];
      this.lastXY = [e.clientX, e.clientY];
      this.orbit = this.panning
        ? applyPan(this.orbit, dx, dy)
        : applyDrag(this.orbit, dx, dy);
      this.poser.update(this.orbit);
    });
    c.addEventListener('wheel', (e) => {
      e.preventDefault();
      this.orbit = applyWheel(this.orbit, e.deltaY);
      this.poser.update(this.orbit);
    }, { passive: false });

    window.addEventListener('keydown', (e) => {
      const step = 0.05;
      const moves: Record<string, [number, number, number]> = {
        a: [0, step, 0], d: [0, -step, 0],
        w: [step, 0, 0], s: [-step, 0, 0],
        q: [0, 0, step], e: [0, 0, -step],
      };
      const mv = moves[e.key];
      if (mv) {
        this.volumeOffset = [
          this.volumeOffset[0] + mv[0],
          this.volumeOffset[1] + mv[1],
          this.volumeOffset[2] + mv[2],
        ];
        this.sendText(volumeOffsetMessage(this.volumeOffset));
      }
    });

    this.el.mode.addEventListener('change', () =>
      this.sendText(modeMessage(this.el.mode.value)));
    this.el.env.addEventListener('change', () =>
      this.sendText(envMessage(this.el.env.value)));
    this.el.tf.addEventListener('change', () =>
      this.sendText(tfMessage(this.el.tf.value)));
    for (const [name, input] of Object.entries(this.el.sliders)) {
      input.addEventListener('change', () =>
        this.sendText(paramsMessage({ [name]: Number(input.value) })));
    }
  }
}
