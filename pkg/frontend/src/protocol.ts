/**
 * Wire protocol for the sandbox service: JSON text frames over one WebSocket.
 * The server is the sole authority on scores and poses; everything here is
 * typing, validation, and payload decoding. Shapes mirror the server exactly.
 */

export const PROTOCOL_VERSION = 1;

// ---------------------------------------------------------------- client

export interface HelloMsg { t: 'hello'; v: number }
export interface LoadSceneMsg { t: 'load_scene'; scene: string }
export interface PoseMsg { t: 'pose'; theta?: number; x?: number; y?: number }
export interface SetParamsMsg {
  t: 'set_params';
  modes?: number;
  mode?: 'direct' | 'damped';
  damping?: number;
}
export interface FieldSliceMsg {
  t: 'field_slice';
  theta: number;
  w: number;
  h: number;
  modes?: number;
}
export interface StatsMsg { t: 'stats' }

export type ClientMsg =
  | HelloMsg | LoadSceneMsg | PoseMsg | SetParamsMsg | FieldSliceMsg | StatsMsg;

export const hello = (): HelloMsg => ({ t: 'hello', v: PROTOCOL_VERSION });
export const loadScene = (scene: string): LoadSceneMsg => ({ t: 'load_scene', scene });

/** Bare pose (no coordinates) is the damped-mode autonomous tick. */
export function pose(theta?: number, x?: number, y?: number): PoseMsg {
  const m: PoseMsg = { t: 'pose' };
  if (theta !== undefined) m.theta = theta;
  if (x !== undefined) { m.x = x; m.y = y; }
  return m;
}

// ---------------------------------------------------------------- server

export interface SceneDescriptor {
  name: string;
  dimension: number;
  domain: number;
  grid_n: number;
  spacing: number;
  box: [number[], number[]];
  snap: number[];
  sigma: number;
  lambda_in: number;
  lambda_out: number;
  outlines: { fixed: number[][][]; moving: number[][][] };
  initial: { theta: number; x: number; y: number };
}

export interface HelloReply { t: 'hello'; v: number; scenes: string[] }

export interface EvalReply {
  t: 'eval';
  score_re: number;
  score_im: number;
  energy: number;
  fx: number;
  fy: number;
  torque: number;
  us: number;
  modes: number;
  theta: number;
  x: number;
  y: number;
  mode: 'direct' | 'damped';
  // present only on the load_scene acknowledgement
  session?: string;
  scene?: SceneDescriptor;
}

export interface SetParamsReply {
  t: 'set_params';
  modes: number;
  mode: 'direct' | 'damped';
  damping: number;
}

export interface StatsReply {
  t: 'stats';
  frames: number;
  p50_us: number;
  p95_us: number;
  p99_us: number;
  modes: number;
  mode: string;
  damping: number;
}

export interface FieldSliceReply {
  t: 'field_slice';
  theta: number;
  w: number;
  h: number;
  x0: number;
  y0: number;
  dx: number;
  dy: number;
  modes: number;
  full_mask: boolean;
  data_b64: string;
}

export interface ErrorReply { t: 'error'; error: string }

export type ServerMsg =
  | HelloReply | EvalReply | SetParamsReply | StatsReply | FieldSliceReply | ErrorReply;

const num = (v: unknown): v is number => typeof v === 'number' && Number.isFinite(v);

/**
 * Parse one incoming frame. Returns null for anything that does not match a
 * known reply shape, so a confused server can never corrupt client state.
 */
export function parseServer(raw: string): ServerMsg | null {
  let m: unknown;
  try {
    m = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof m !== 'object' || m === null || Array.isArray(m)) return null;
  const o = m as Record<string, unknown>;
  switch (o.t) {
    case 'hello':
      return num(o.v) && Array.isArray(o.scenes) ? (o as unknown as HelloReply) : null;
    case 'eval':
      return num(o.energy) && num(o.fx) && num(o.fy) && num(o.x) && num(o.y)
        && num(o.theta) && num(o.us)
        ? (o as unknown as EvalReply) : null;
    case 'set_params':
      return num(o.modes) && num(o.damping) ? (o as unknown as SetParamsReply) : null;
    case 'stats':
      return num(o.frames) ? (o as unknown as StatsReply) : null;
    case 'field_slice':
      return num(o.w) && num(o.h) && num(o.dx) && num(o.dy)
        && typeof o.data_b64 === 'string'
        ? (o as unknown as FieldSliceReply) : null;
    case 'error':
      return typeof o.error === 'string' ? (o as unknown as ErrorReply) : null;
    default:
      return null;
  }
}

export interface DecodedSlice {
  theta: number;
  w: number;
  h: number;
  x0: number;
  y0: number;
  dx: number;
  dy: number;
  modes: number;
  fullMask: boolean;
  /** Row-major w*h; NaN marks wrap-contaminated cells. */
  values: Float32Array;
}

/** Base64 little-endian float32 payload -> typed array, NaN preserved. */
export function decodeSlice(r: FieldSliceReply): DecodedSlice {
  const bin = atob(r.data_b64);
  const bytes = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) bytes[i] = bin.charCodeAt(i);
  const values = new Float32Array(bytes.buffer, 0, r.w * r.h);
  return {
    theta: r.theta, w: r.w, h: r.h, x0: r.x0, y0: r.y0,
    dx: r.dx, dy: r.dy, modes: r.modes, fullMask: r.full_mask, values,
  };
}
