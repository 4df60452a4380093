/**
 * Wire protocol for the sandbox service: JSON text frames over one WebSocket.
 * The server is the sole authority on scores and poses; everything here is
 * typing, validation, and payload decoding. Shapes mirror the server exactly.
 */
export const PROTOCOL_VERSION = 1;
export const hello = () => ({ t: 'hello', v: PROTOCOL_VERSION });
export const loadScene = (scene) => ({ t: 'load_scene', scene });
/** Bare pose (no coordinates) is the damped-mode autonomous tick. */
export function pose(theta, x, y) {
    const m = { t: 'pose' };
    if (theta !== undefined)
        m.theta = theta;
    if (x !== undefined) {
        m.x = x;
        m.y = y;
    }
    return m;
}
const num = (v) => typeof v === 'number' && Number.isFinite(v);
/**
 * Parse one incoming frame. Returns null for anything that does not match a
 * known reply shape, so a confused server can never corrupt client state.
 */
export function parseServer(raw) {
    let m;
    try {
        m = JSON.parse(raw);
    }
    catch {
        return null;
    }
    if (typeof m !== 'object' || m === null || Array.isArray(m))
        return null;
    const o = m;
    switch (o.t) {
        case 'hello':
            return num(o.v) && Array.isArray(o.scenes) ? o : null;
        case 'eval':
            return num(o.energy) && num(o.fx) && num(o.fy) && num(o.x) && num(o.y)
                && num(o.theta) && num(o.us)
                ? o : null;
        case 'set_params':
            return num(o.modes) && num(o.damping) ? o : null;
        case 'stats':
            return num(o.frames) ? o : null;
        case 'field_slice':
            return num(o.w) && num(o.h) && num(o.dx) && num(o.dy)
                && typeof o.data_b64 === 'string'
                ? o : null;
        case 'error':
            return typeof o.error === 'string' ? o : null;
        default:
            return null;
    }
}
/** Base64 little-endian float32 payload -> typed array, NaN preserved. */
export function decodeSlice(r) {
    const bin = atob(r.data_b64);
    const bytes = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++)
        bytes[i] = bin.charCodeAt(i);
    const values = new Float32Array(bytes.buffer, 0, r.w * r.h);
    return {
        theta: r.theta, w: r.w, h: r.h, x0: r.x0, y0: r.y0,
        dx: r.dx, dy: r.dy, modes: r.modes, fullMask: r.full_mask, values,
    };
}
