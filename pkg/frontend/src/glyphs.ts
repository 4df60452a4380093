/**
 * Canvas drawing for everything except the heatmap blit: part outlines,
 * force arrow, torque arc, and the latency strip. All geometry goes through
 * the camera; styling is fixed here.
 */

import type { Camera, Vec2 } from './camera.js';
import type { LatencyStrip } from './state.js';

export interface PartPose { theta: number; x: number; y: number }

function tracePath(ctx: CanvasRenderingContext2D, cam: Camera,
                   loops: number[][][], pose?: PartPose): void {
  const c = pose ? Math.cos(pose.theta) : 1;
  const s = pose ? Math.sin(pose.theta) : 0;
  ctx.beginPath();
  for (const loop of loops) {
    loop.forEach((p, k) => {
      const wx = pose ? c * p[0] - s * p[1] + pose.x : p[0];
      const wy = pose ? s * p[0] + c * p[1] + pose.y : p[1];
      const q = cam.worldToScreen({ x: wx, y: wy });
      if (k === 0) ctx.moveTo(q.x, q.y); else ctx.lineTo(q.x, q.y);
    });
    ctx.closePath();
  }
}

export function drawPart(ctx: CanvasRenderingContext2D, cam: Camera,
                         loops: number[][][], stroke: string, fill: string,
                         pose?: PartPose): void {
  tracePath(ctx, cam, loops, pose);
  ctx.fillStyle = fill;
  ctx.fill('evenodd');
  ctx.strokeStyle = stroke;
  ctx.lineWidth = 2;
  ctx.stroke();
}

/**
 * Cheap boundary-glow underlay: radial fades along each outline segment.
 * Client-side decoration only; real densities never cross the wire.
 */
export function drawUnderlay(ctx: CanvasRenderingContext2D, cam: Camera,
                             loops: number[][][]): void {
  ctx.save();
  ctx.globalCompositeOperation = 'lighter';
  ctx.lineCap = 'round';
  for (let r = 5; r >= 1; r--) {
    ctx.strokeStyle = `rgba(90, 140, 190, ${0.05 * (6 - r)})`;
    ctx.lineWidth = 6 * r;
    tracePath(ctx, cam, loops);
    ctx.stroke();
  }
  ctx.restore();
}

export function drawForceArrow(ctx: CanvasRenderingContext2D, cam: Camera,
                               at: Vec2, fx: number, fy: number,
                               pixelsPerUnit: number): void {
  const a = cam.worldToScreen(at);
  const len = Math.hypot(fx, fy) * pixelsPerUnit;
  if (len < 2) return;
  const cap = Math.min(len, 160);
  const ux = fx / Math.hypot(fx, fy);
  const uy = -fy / Math.hypot(fx, fy); // screen y is down
  const tip = { x: a.x + ux * cap, y: a.y + uy * cap };
  ctx.strokeStyle = '#ffb347';
  ctx.fillStyle = '#ffb347';
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(a.x, a.y);
  ctx.lineTo(tip.x, tip.y);
  ctx.stroke();
  const ang = Math.atan2(uy, ux);
  ctx.beginPath();
  ctx.moveTo(tip.x, tip.y);
  ctx.lineTo(tip.x - 10 * Math.cos(ang - 0.4), tip.y - 10 * Math.sin(ang - 0.4));
  ctx.lineTo(tip.x - 10 * Math.cos(ang + 0.4), tip.y - 10 * Math.sin(ang + 0.4));
  ctx.closePath();
  ctx.fill();
}

export function drawTorqueArc(ctx: CanvasRenderingContext2D, cam: Camera,
                              at: Vec2, torque: number, scale: number): void {
  const a = cam.worldToScreen(at);
  const sweep = Math.max(-2.6, Math.min(2.6, torque * scale));
  if (Math.abs(sweep) < 0.05) return;
  const r = 34;
  // positive torque is counter-clockwise in the model, which is the canvas
  // anticlockwise=true direction once y is flipped
  ctx.strokeStyle = '#7fd4a0';
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.arc(a.x, a.y, r, -Math.PI / 2, -Math.PI / 2 - sweep, sweep > 0);
  ctx.stroke();
  const end = -Math.PI / 2 - sweep;
  const hx = a.x + r * Math.cos(end);
  const hy = a.y + r * Math.sin(end);
  ctx.fillStyle = '#7fd4a0';
  ctx.beginPath();
  ctx.arc(hx, hy, 4, 0, 2 * Math.PI);
  ctx.fill();
}

export function drawLatencyStrip(ctx: CanvasRenderingContext2D,
                                 strip: LatencyStrip,
                                 x: number, y: number, w: number, h: number): void {
  ctx.fillStyle = 'rgba(10, 12, 16, 0.85)';
  ctx.fillRect(x, y, w, h);
  const vals = strip.values;
  if (vals.length === 0) return;
  const top = Math.max(2000, strip.percentile(0.99) * 1.3);
  ctx.strokeStyle = '#5aa0e0';
  ctx.lineWidth = 1;
  ctx.beginPath();
  const n = strip.capacity;
  vals.forEach((v, k) => {
    const px = x + w * (k + n - vals.length) / n;
    const py = y + h - h * Math.min(1, v / top);
    if (k === 0) ctx.moveTo(px, py); else ctx.lineTo(px, py);
  });
  ctx.stroke();
  ctx.fillStyle = '#9ab';
  ctx.font = '11px monospace';
  const p99 = strip.percentile(0.99);
  const label = p99 >= 1000 ? `${(p99 / 1000).toFixed(2)} ms` : `${Math.round(p99)} us`;
  ctx.fillText(`eval p99 ${label}`, x + 6, y + 13);
}
