import { Viewer } from './viewer.js';

function slider(id: string): HTMLInputElement {
  return document.getElementById(id) as HTMLInputElement;
}

const params = new URLSearchParams(window.location.search);
const url = params.get('ws') ?? 'ws://127.0.0.1:9742';

const viewer = new Viewer(url, {
  canvas: document.getElementById('view') as HTMLCanvasElement,
  status: document.getElementById('status')!,
  stats: document.getElementById('stats')!,
  mode: document.getElementById('mode') as HTMLSelectElement,
  env: document.getElementById('env') as HTMLSelectElement,
  tf: document.getElementById('tf') as HTMLSelectElement,
  anaglyph: document.getElementById('anaglyph') as HTMLInputElement,
  sliders: {
    sigma_albedo: slider('sigma_albedo'),
    sigma_gradient: slider('sigma_gradient'),
    sigma_depth: slider('sigma_depth'),
    temporal_gain: slider('temporal_gain'),
  },
});
viewer.connect();
