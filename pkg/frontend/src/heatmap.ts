/**
 * Field-slice rendering: Re-score to RGBA with wrap-contaminated cells drawn
 * as a gray hatch. Pure byte work so it stays testable; the canvas blit
 * happens in the render loop.
 */

import type { DecodedSlice } from './protocol.js';

export interface HeatmapImage {
  w: number;
  h: number;
  /** RGBA, row-major over slice cells. */
  rgba: Uint8ClampedArray;
  /** Cell [i, j] of the finite maximum, or null when fully masked. */
  maxCell: [number, number] | null;
  lo: number;
  hi: number;
}

/**
 * Display range from percentile clipping, so one hot seat cell does not
 * flatten the rest of the landscape into a single color.
 */
export function displayRange(values: Float32Array): [number, number] {
  const finite: number[] = [];
  for (const v of values) if (Number.isFinite(v)) finite.push(v);
  if (finite.length === 0) return [0, 1];
  finite.sort((a, b) => a - b);
  const lo = finite[Math.floor(0.02 * (finite.length - 1))];
  const hi = finite[Math.ceil(0.98 * (finite.length - 1))];
  return lo === hi ? [lo - 1, hi + 1] : [lo, hi];
}

/** Cold blue for penalized, near-black at zero, bright amber at the well. */
export function colorOf(v: number, lo: number, hi: number): [number, number, number] {
  const u = Math.min(1, Math.max(0, (v - lo) / (hi - lo)));
  if (u < 0.5) {
    const s = 1 - 2 * u;
    return [Math.round(20 + 40 * s), Math.round(24 + 70 * s), Math.round(30 + 170 * s)];
  }
  const s = 2 * (u - 0.5);
  return [Math.round(20 + 235 * s), Math.round(24 + 180 * s), Math.round(30 + 40 * s)];
}

export function findMax(slice: DecodedSlice): [number, number] | null {
  let best = -Infinity;
  let at = -1;
  for (let k = 0; k < slice.values.length; k++) {
    const v = slice.values[k];
    if (Number.isFinite(v) && v > best) { best = v; at = k; }
  }
  if (at < 0) return null;
  return [Math.floor(at / slice.h), at % slice.h];
}

export function renderSlice(slice: DecodedSlice): HeatmapImage {
  const [lo, hi] = displayRange(slice.values);
  const rgba = new Uint8ClampedArray(slice.w * slice.h * 4);
  for (let i = 0; i < slice.w; i++) {
    for (let j = 0; j < slice.h; j++) {
      const v = slice.values[i * slice.h + j];
      const o = 4 * (i * slice.h + j);
      if (Number.isFinite(v)) {
        const [r, g, b] = colorOf(v, lo, hi);
        rgba[o] = r; rgba[o + 1] = g; rgba[o + 2] = b; rgba[o + 3] = 255;
      } else {
        // diagonal hatch on the masked fringe
        const on = (i + j) % 4 < 2;
        const c = on ? 70 : 40;
        rgba[o] = c; rgba[o + 1] = c; rgba[o + 2] = c; rgba[o + 3] = 170;
      }
    }
  }
  return { w: slice.w, h: slice.h, rgba, maxCell: findMax(slice), lo, hi };
}
