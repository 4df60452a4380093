import { describe, expect, it } from 'vitest';

import type { EvalReply } from '../src/protocol.js';
import { EvalQueue, LatencyStrip, PoseCoalescer, ViewState } from '../src/state.js';
import { nextBackoffMs } from '../src/net.js';

const ev = (x: number, us = 100): EvalReply => ({
  t: 'eval', score_re: 0, score_im: 0, energy: 0, fx: 0, fy: 0, torque: 0,
  us, modes: 4096, theta: 0, x, y: 0, mode: 'direct',
});

describe('latest-wins eval queue', () => {
  it('renders only the newest of several queued replies', () => {
    const q = new EvalQueue();
    q.offer(ev(1));
    q.offer(ev(2));
    q.offer(ev(3));
    const shown = q.take();
    expect(shown?.x).toBe(3);
    expect(q.depth).toBe(0);
    expect(q.take()).toBeNull();
  });

  it('still records every latency sample from dropped frames', () => {
    const q = new EvalQueue();
    const strip = new LatencyStrip();
    q.offer(ev(1, 100));
    q.offer(ev(2, 900));
    q.take(strip);
    expect(strip.values.length).toBe(2);
  });
});

describe('pose coalescing', () => {
  const at = (x: number, y = 0, theta = 0) => ({ theta, x, y });

  it('suppresses sends while the pointer is still', () => {
    const c = new PoseCoalescer();
    expect(c.next(at(1.0), 'direct')).not.toBeNull();
    expect(c.next(at(1.0), 'direct')).toBeNull();
    expect(c.next(at(1.0), 'direct')).toBeNull();
    expect(c.next(at(1.0002), 'direct')).not.toBeNull();
  });

  it('rotation alone counts as motion', () => {
    const c = new PoseCoalescer();
    c.next(at(1, 0, 0), 'direct');
    expect(c.next(at(1, 0, 0.01), 'direct')).toEqual({ theta: 0.01, x: 1, y: 0 });
  });

  it('direct mode without a drag sends nothing', () => {
    const c = new PoseCoalescer();
    expect(c.next(null, 'direct')).toBeNull();
  });

  it('damped mode without a drag emits a bare tick every frame', () => {
    const c = new PoseCoalescer();
    expect(c.next(null, 'damped')).toEqual({});
    expect(c.next(null, 'damped')).toEqual({});
  });

  it('a new grab always sends, even back at the released pose', () => {
    const c = new PoseCoalescer();
    c.next(at(2), 'direct');
    c.next(null, 'direct');
    expect(c.next(at(2), 'direct')).not.toBeNull();
  });
});

describe('drag state machine', () => {
  it('drag is null whenever the pointer is up', () => {
    const v = new ViewState();
    expect(v.drag).toBeNull();
    expect(v.draggedPose()).toBeNull();
    v.displayed = { theta: 0, x: 1.5, y: 1.2 };
    v.beginDrag({ x: 1.6, y: 1.3 });
    expect(v.drag).not.toBeNull();
    v.endDrag();
    expect(v.drag).toBeNull();
    expect(v.draggedPose()).toBeNull();
  });

  it('the part follows the pointer minus the grab offset', () => {
    const v = new ViewState();
    v.displayed = { theta: 0, x: 1.5, y: 1.2 };
    v.beginDrag({ x: 1.6, y: 1.3 });
    v.moveDrag({ x: 0.6, y: 0.3 });
    const p = v.draggedPose()!;
    expect(p.x).toBeCloseTo(0.5, 12);
    expect(p.y).toBeCloseTo(0.2, 12);
  });
});

describe('latency strip', () => {
  it('caps at its capacity and keeps the newest samples', () => {
    const s = new LatencyStrip(10);
    for (let k = 0; k < 25; k++) s.push(k);
    expect(s.values.length).toBe(10);
    expect(s.values[0]).toBe(15);
  });

  it('percentiles are order statistics over the window', () => {
    const s = new LatencyStrip(100);
    for (let k = 1; k <= 100; k++) s.push(k);
    expect(s.percentile(0.5)).toBe(51);
    expect(s.percentile(0.99)).toBe(100);
    expect(new LatencyStrip().percentile(0.99)).toBe(0);
  });
});

describe('reconnect backoff', () => {
  it('doubles and saturates', () => {
    expect(nextBackoffMs(250)).toBe(500);
    expect(nextBackoffMs(500)).toBe(1000);
    expect(nextBackoffMs(6000)).toBe(8000);
    expect(nextBackoffMs(8000)).toBe(8000);
  });
});
