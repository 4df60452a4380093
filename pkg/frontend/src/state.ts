/**
 * Client-side session state. Nothing in here computes energies; the server
 * owns the model and this module only decides what to send, which reply to
 * display, and what the overlays/latency strip should show.
 */

import type { EvalReply } from './protocol.js';
import type { Vec2 } from './camera.js';

export interface DragState {
  /** Offset from pointer to the part origin, in model units, fixed at grab. */
  grab: Vec2;
  pointer: Vec2;
}

export interface Overlays {
  heatmap: boolean;
  force: boolean;
  underlay: boolean;
}

/** Pose the part should be displayed at (last acknowledged by the server). */
export interface DisplayPose { theta: number; x: number; y: number }

/**
 * Ring buffer for the per-frame evaluation latency strip. Percentiles are
 * over whatever the strip currently holds, which is what the plot shows.
 */
export class LatencyStrip {
  private buf: number[] = [];
  constructor(readonly capacity = 240) {}

  push(us: number): void {
    this.buf.push(us);
    if (this.buf.length > this.capacity) this.buf.shift();
  }

  get values(): readonly number[] {
    return this.buf;
  }

  percentile(p: number): number {
    if (this.buf.length === 0) return 0;
    const s = [...this.buf].sort((a, b) => a - b);
    return s[Math.min(s.length - 1, Math.floor(p * s.length))];
  }
}

/**
 * Latest-wins display: replies arrive in order on the socket, but several can
 * queue up between animation frames. Only the newest eval is ever rendered;
 * the rest are dropped after their latency sample is recorded.
 */
export class EvalQueue {
  private pending: EvalReply[] = [];

  offer(ev: EvalReply): void {
    this.pending.push(ev);
  }

  /** Drain the queue; returns the newest eval or null, records all latencies. */
  take(strip?: LatencyStrip): EvalReply | null {
    if (this.pending.length === 0) return null;
    if (strip) for (const ev of this.pending) strip.push(ev.us);
    const last = this.pending[this.pending.length - 1];
    this.pending = [];
    return last;
  }

  get depth(): number {
    return this.pending.length;
  }
}

export interface PoseSend { theta?: number; x?: number; y?: number }

/**
 * Decides, once per animation frame, whether a pose message goes out.
 *
 * - Dragging: send the pointer pose, but only if it moved since the last
 *   send (idle suppression — a still pointer produces no traffic).
 * - Damped mode, not dragging: send a bare tick every frame; the server
 *   integrates the descent step only for coordinate-free poses.
 * - Direct mode, not dragging: silence.
 *
 * `epsilon` is in model units; anything below it is considered no motion.
 */
export class PoseCoalescer {
  private lastSent: DisplayPose | null = null;
  constructor(readonly epsilon = 1e-9) {}

  next(desired: DisplayPose | null, mode: 'direct' | 'damped'): PoseSend | null {
    if (desired === null) {
      this.lastSent = null;
      return mode === 'damped' ? {} : null;
    }
    const p = this.lastSent;
    const moved = p === null
      || Math.abs(desired.x - p.x) > this.epsilon
      || Math.abs(desired.y - p.y) > this.epsilon
      || Math.abs(desired.theta - p.theta) > this.epsilon;
    if (!moved) return null;
    this.lastSent = { ...desired };
    return { theta: desired.theta, x: desired.x, y: desired.y };
  }
}

export class ViewState {
  overlays: Overlays = { heatmap: true, force: true, underlay: false };
  drag: DragState | null = null;
  latency = new LatencyStrip();
  evals = new EvalQueue();
  coalescer = new PoseCoalescer();
  /** Pose as last acknowledged; the moving part is drawn here. */
  displayed: DisplayPose | null = null;
  /** θ the user is commanding (wheel/keys); kept across drags. */
  commandedTheta = 0;

  beginDrag(pointerWorld: Vec2): void {
    const d = this.displayed;
    const at = d ? { x: d.x, y: d.y } : { x: pointerWorld.x, y: pointerWorld.y };
    this.drag = {
      grab: { x: pointerWorld.x - at.x, y: pointerWorld.y - at.y },
      pointer: pointerWorld,
    };
  }

  moveDrag(pointerWorld: Vec2): void {
    if (this.drag) this.drag.pointer = pointerWorld;
  }

  endDrag(): void {
    this.drag = null;
  }

  /** Pose the drag currently asks for, or null when the pointer is up. */
  draggedPose(): DisplayPose | null {
    if (!this.drag) return null;
    return {
      theta: this.commandedTheta,
      x: this.drag.pointer.x - this.drag.grab.x,
      y: this.drag.pointer.y - this.drag.grab.y,
    };
  }
}
