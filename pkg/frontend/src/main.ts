/**
 * Sandbox shell: one canvas, one render loop, one socket. Pointer input maps
 * through the camera to model poses; the server evaluates and replies; the
 * loop draws whatever the newest reply says. All network callbacks only
 * enqueue — every state change happens on the animation frame.
 */

import { Camera, type Vec2 } from './camera.js';
import {
  decodeSlice, hello, loadScene, PROTOCOL_VERSION,
  type EvalReply, type SceneDescriptor, type ServerMsg,
} from './protocol.js';
import { renderSlice, type HeatmapImage } from './heatmap.js';
import { SandboxSocket } from './net.js';
import { ViewState } from './state.js';
import {
  drawForceArrow, drawLatencyStrip, drawPart, drawTorqueArc, drawUnderlay,
} from './glyphs.js';

const MODE_BUDGETS = [16, 64, 256, 1024, 4096, 16384, 65536];
const SLICE_DEBOUNCE_MS = 300;
const STALL_MS = 700;

function el<T extends HTMLElement>(id: string): T {
  const e = document.getElementById(id);
  if (!e) throw new Error(`missing #${id}`);
  return e as T;
}

const canvas = el<HTMLCanvasElement>('view');
const ctx = canvas.getContext('2d')!;
const banner = el<HTMLDivElement>('banner');
const sceneSel = el<HTMLSelectElement>('scene');
const modesSel = el<HTMLInputElement>('modes');
const modesLabel = el<HTMLSpanElement>('modes-label');
const modeBtn = el<HTMLButtonElement>('mode');
const dampingInp = el<HTMLInputElement>('damping');
const dampingLabel = el<HTMLSpanElement>('damping-label');
const ovHeatmap = el<HTMLInputElement>('ov-heatmap');
const ovForce = el<HTMLInputElement>('ov-force');
const ovUnderlay = el<HTMLInputElement>('ov-underlay');
const readout = el<HTMLDivElement>('readout');

const cam = new Camera();
const view = new ViewState();

let scene: SceneDescriptor | null = null;
let lastEval: EvalReply | null = null;
let paramMode: 'direct' | 'damped' = 'direct';
let heat: HeatmapImage | null = null;
let heatCanvas: HTMLCanvasElement | null = null;
let heatBox: { x0: number; y0: number; w: number; h: number } | null = null;
let slicePending = false;
let sliceTimer: number | undefined;
let sliceTheta = 0;
let awaitingSince = 0;
let panning: Vec2 | null = null;

function setBanner(text: string, cls: string): void {
  banner.textContent = text;
  banner.className = cls;
}

// ---------------------------------------------------------------- network

const sock = new SandboxSocket(
  `${location.protocol === 'https:' ? 'wss' : 'ws'}://${location.host}/ws`,
  (m) => inbox.push(m),
  (s, detail) => {
    if (s === 'connected') {
      setBanner('connected', 'ok');
      sock.send(hello());
    } else if (s === 'closed') {
      setBanner(`disconnected — ${detail ?? ''}`, 'bad');
    } else {
      setBanner('connecting…', 'warn');
    }
  },
);
const inbox: ServerMsg[] = [];

function requestSlice(): void {
  if (!scene) return;
  window.clearTimeout(sliceTimer);
  sliceTimer = window.setTimeout(() => {
    if (!sock.ready || !scene) return;
    slicePending = true;
    sliceTheta = view.commandedTheta;
    sock.send({
      t: 'field_slice', theta: sliceTheta, w: 256, h: 256,
      modes: MODE_BUDGETS[Number(modesSel.value)],
    });
  }, SLICE_DEBOUNCE_MS);
}

function applyMessage(m: ServerMsg): void {
  switch (m.t) {
    case 'hello':
      if (m.v !== PROTOCOL_VERSION) {
        setBanner(`protocol mismatch: server v${m.v}, client v${PROTOCOL_VERSION}`, 'bad');
        sock.stop();
        return;
      }
      sock.send(loadScene(sceneSel.value || 'peg2d'));
      return;
    case 'eval':
      if (m.scene) {
        scene = m.scene;
        view.commandedTheta = m.scene.initial.theta;
        cam.fitBox(m.scene.box[0], m.scene.box[1]);
        heat = null;
        heatCanvas = null;
        requestSlice();
      }
      view.evals.offer(m);
      awaitingSince = 0;
      return;
    case 'set_params': {
      paramMode = m.mode;
      modeBtn.textContent = m.mode;
      modesLabel.textContent = `${m.modes}`;
      const idx = MODE_BUDGETS.indexOf(m.modes);
      if (idx >= 0) modesSel.value = `${idx}`;
      requestSlice();
      return;
    }
    case 'field_slice': {
      slicePending = false;
      const slice = decodeSlice(m);
      heat = renderSlice(slice);
      heatBox = {
        x0: slice.x0, y0: slice.y0,
        w: slice.w * slice.dx, h: slice.h * slice.dy,
      };
      // repack to screen orientation: image row 0 is the top (largest y)
      const img = new ImageData(slice.w, slice.h);
      for (let py = 0; py < slice.h; py++) {
        for (let px = 0; px < slice.w; px++) {
          const src = 4 * (px * slice.h + (slice.h - 1 - py));
          const dst = 4 * (py * slice.w + px);
          for (let c = 0; c < 4; c++) img.data[dst + c] = heat.rgba[src + c];
        }
      }
      heatCanvas = document.createElement('canvas');
      heatCanvas.width = slice.w;
      heatCanvas.height = slice.h;
      heatCanvas.getContext('2d')!.putImageData(img, 0, 0);
      if (slice.fullMask) setBanner('slice fully wrap-masked at this pose', 'warn');
      return;
    }
    case 'stats':
      return;
    case 'error':
      setBanner(m.error, 'bad');
      return;
  }
}

// ---------------------------------------------------------------- input

function pointInLoops(loops: number[][][], p: Vec2): boolean {
  let inside = false;
  for (const loop of loops) {
    for (let i = 0, j = loop.length - 1; i < loop.length; j = i++) {
      const [xi, yi] = loop[i];
      const [xj, yj] = loop[j];
      if ((yi > p.y) !== (yj > p.y)
          && p.x < ((xj - xi) * (p.y - yi)) / (yj - yi) + xi) {
        inside = !inside;
      }
    }
  }
  return inside;
}

function pointerWorld(e: PointerEvent): Vec2 {
  const r = canvas.getBoundingClientRect();
  return cam.screenToWorld({ x: e.clientX - r.left, y: e.clientY - r.top });
}

function hitMoving(p: Vec2): boolean {
  if (!scene || !view.displayed) return false;
  const d = view.displayed;
  const c = Math.cos(-d.theta);
  const s = Math.sin(-d.theta);
  const lx = p.x - d.x;
  const ly = p.y - d.y;
  return pointInLoops(scene.outlines.moving, { x: c * lx - s * ly, y: s * lx + c * ly });
}

canvas.addEventListener('pointerdown', (e) => {
  canvas.setPointerCapture(e.pointerId);
  const p = pointerWorld(e);
  if (hitMoving(p)) view.beginDrag(p);
  else panning = { x: e.clientX, y: e.clientY };
});

canvas.addEventListener('pointermove', (e) => {
  if (view.drag) {
    view.moveDrag(pointerWorld(e));
  } else if (panning) {
    cam.panByScreen(e.clientX - panning.x, e.clientY - panning.y);
    panning = { x: e.clientX, y: e.clientY };
  }
});

const release = () => { view.endDrag(); panning = null; };
canvas.addEventListener('pointerup', release);
canvas.addEventListener('pointercancel', release);

canvas.addEventListener('wheel', (e) => {
  e.preventDefault();
  if (view.drag || e.shiftKey) {
    // rotate the grabbed part instead of zooming
    view.commandedTheta += (e.deltaY > 0 ? -1 : 1) * (Math.PI / 90);
    requestSlice();
    if (!view.drag && view.displayed) {
      sock.send({ t: 'pose', theta: view.commandedTheta });
    }
  } else {
    const r = canvas.getBoundingClientRect();
    cam.zoomAt({ x: e.clientX - r.left, y: e.clientY - r.top },
               e.deltaY > 0 ? 1 / 1.15 : 1.15);
  }
}, { passive: false });

window.addEventListener('keydown', (e) => {
  if (e.key !== 'q' && e.key !== 'e') return;
  view.commandedTheta += (e.key === 'q' ? 1 : -1) * (Math.PI / 90);
  requestSlice();
  if (!view.drag) sock.send({ t: 'pose', theta: view.commandedTheta });
});

// ---------------------------------------------------------------- controls

sceneSel.addEventListener('change', () => {
  if (sock.ready) sock.send(loadScene(sceneSel.value));
});

modesSel.addEventListener('input', () => {
  modesLabel.textContent = `${MODE_BUDGETS[Number(modesSel.value)]}`;
});
modesSel.addEventListener('change', () => {
  sock.send({ t: 'set_params', modes: MODE_BUDGETS[Number(modesSel.value)] });
});

modeBtn.addEventListener('click', () => {
  sock.send({ t: 'set_params', mode: paramMode === 'direct' ? 'damped' : 'direct' });
});

dampingInp.addEventListener('change', () => {
  const c = Number(dampingInp.value);
  dampingLabel.textContent = c.toFixed(1);
  sock.send({ t: 'set_params', damping: c });
});

ovHeatmap.addEventListener('change', () => { view.overlays.heatmap = ovHeatmap.checked; });
ovForce.addEventListener('change', () => { view.overlays.force = ovForce.checked; });
ovUnderlay.addEventListener('change', () => { view.overlays.underlay = ovUnderlay.checked; });

// ---------------------------------------------------------------- loop

function resize(): void {
  const r = canvas.parentElement!.getBoundingClientRect();
  canvas.width = r.width;
  canvas.height = r.height;
  cam.viewW = r.width;
  cam.viewH = r.height;
}
window.addEventListener('resize', resize);

function frame(): void {
  requestAnimationFrame(frame);
  for (const m of inbox.splice(0)) applyMessage(m);

  // outgoing pose for this frame, coalesced and idle-suppressed
  if (sock.ready && scene) {
    const out = view.coalescer.next(view.draggedPose(), paramMode);
    if (out && sock.send({ t: 'pose', ...out })) {
      if (awaitingSince === 0) awaitingSince = performance.now();
    }
  }

  const ev = view.evals.take(view.latency);
  if (ev) {
    lastEval = ev;
    view.displayed = { theta: ev.theta, x: ev.x, y: ev.y };
    if (!view.drag) view.commandedTheta = ev.theta;
  }

  const stalled = awaitingSince > 0 && performance.now() - awaitingSince > STALL_MS;

  ctx.fillStyle = '#14161a';
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  if (view.overlays.heatmap && heatCanvas && heatBox) {
    const tl = cam.worldToScreen({ x: heatBox.x0, y: heatBox.y0 + heatBox.h });
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(heatCanvas, tl.x, tl.y,
                  heatBox.w * cam.scale, heatBox.h * cam.scale);
  }

  if (scene) {
    if (view.overlays.underlay) drawUnderlay(ctx, cam, scene.outlines.fixed);
    drawPart(ctx, cam, scene.outlines.fixed, '#8fa3b8', 'rgba(90, 110, 140, 0.25)');
    const shown = view.drag ? view.draggedPose()! : view.displayed;
    if (shown) {
      drawPart(ctx, cam, scene.outlines.moving, '#e8c36a', 'rgba(220, 170, 80, 0.3)', shown);
      if (view.overlays.force && lastEval) {
        const at = { x: shown.x, y: shown.y };
        drawForceArrow(ctx, cam, at, lastEval.fx, lastEval.fy, cam.scale * 0.02);
        drawTorqueArc(ctx, cam, at, lastEval.torque, 0.05);
      }
    }
  }

  drawLatencyStrip(ctx, view.latency, 10, canvas.height - 64, 260, 54);

  if (lastEval) {
    readout.textContent = [
      `energy ${lastEval.energy.toFixed(4)}`,
      `score ${lastEval.score_re.toFixed(4)} ${lastEval.score_im >= 0 ? '+' : '-'} ${Math.abs(lastEval.score_im).toFixed(4)}i`,
      `eval ${lastEval.us.toFixed(0)} us @ ${lastEval.modes} modes`,
      `pose θ=${(view.displayed?.theta ?? 0).toFixed(3)} (${(view.displayed?.x ?? 0).toFixed(3)}, ${(view.displayed?.y ?? 0).toFixed(3)})`,
    ].join('\n');
  }
  if (slicePending) {
    ctx.fillStyle = '#9ab';
    ctx.font = '12px monospace';
    ctx.fillText('heatmap…', canvas.width - 80, 20);
  }
  if (stalled) {
    ctx.fillStyle = '#e06a6a';
    ctx.font = 'bold 13px monospace';
    ctx.fillText('transport stalled', canvas.width - 150, 40);
  }
}

async function boot(): Promise<void> {
  resize();
  try {
    const scenes = (await (await fetch('/scenes')).json()) as SceneDescriptor[];
    for (const s of scenes) {
      if (s.dimension !== 2) continue;
      const opt = document.createElement('option');
      opt.value = s.name;
      opt.textContent = s.name;
      sceneSel.appendChild(opt);
    }
  } catch {
    setBanner('scene list unavailable', 'warn');
  }
  sock.connect();
  requestAnimationFrame(frame);
}

void boot();
