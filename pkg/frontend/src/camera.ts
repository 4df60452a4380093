/**
 * Pan/zoom camera between model coordinates (y up) and canvas pixels (y
 * down). The transform is scale + translation only, so it is invertible as
 * long as scale stays positive; zoom is clamped to keep it that way.
 */

export interface Vec2 { x: number; y: number }

const MIN_SCALE = 1e-3;
const MAX_SCALE = 1e6;

export class Camera {
  /** Pixels per model unit. */
  scale = 100;
  /** Model point rendered at the viewport center. */
  center: Vec2 = { x: 0, y: 0 };
  viewW = 800;
  viewH = 600;

  worldToScreen(p: Vec2): Vec2 {
    return {
      x: this.viewW / 2 + (p.x - this.center.x) * this.scale,
      y: this.viewH / 2 - (p.y - this.center.y) * this.scale,
    };
  }

  screenToWorld(s: Vec2): Vec2 {
    return {
      x: this.center.x + (s.x - this.viewW / 2) / this.scale,
      y: this.center.y - (s.y - this.viewH / 2) / this.scale,
    };
  }

  /** Zoom by `factor`, keeping the model point under `anchor` fixed. */
  zoomAt(anchor: Vec2, factor: number): void {
    const before = this.screenToWorld(anchor);
    this.scale = Math.min(MAX_SCALE, Math.max(MIN_SCALE, this.scale * factor));
    const after = this.screenToWorld(anchor);
    this.center.x += before.x - after.x;
    this.center.y += before.y - after.y;
  }

  panByScreen(dx: number, dy: number): void {
    this.center.x -= dx / this.scale;
    this.center.y += dy / this.scale;
  }

  /** Frame a model box with a small margin. */
  fitBox(lo: number[], hi: number[]): void {
    const w = hi[0] - lo[0];
    const h = hi[1] - lo[1];
    this.center = { x: (lo[0] + hi[0]) / 2, y: (lo[1] + hi[1]) / 2 };
    this.scale = 0.92 * Math.min(this.viewW / w, this.viewH / h);
  }
}
