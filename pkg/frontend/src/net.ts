/**
 * WebSocket binding with reconnect. Incoming frames are parsed and handed to
 * a single callback; the rendering loop owns all state, so nothing here
 * mutates anything beyond the connection itself.
 */

import { parseServer, type ClientMsg, type ServerMsg } from './protocol.js';

export type Status = 'connecting' | 'connected' | 'closed';

/** Doubling backoff, capped; exported for the reconnect schedule test. */
export function nextBackoffMs(prev: number): number {
  return Math.min(8000, Math.max(500, prev * 2));
}

export class SandboxSocket {
  private ws: WebSocket | null = null;
  private backoff = 250;
  private stopped = false;

  constructor(
    readonly url: string,
    readonly onMessage: (m: ServerMsg) => void,
    readonly onStatus: (s: Status, detail?: string) => void,
  ) {}

  connect(): void {
    this.stopped = false;
    this.onStatus('connecting');
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.backoff = 250;
      this.onStatus('connected');
    };
    ws.onmessage = (e) => {
      const m = parseServer(String(e.data));
      if (m) this.onMessage(m);
    };
    ws.onclose = () => {
      this.ws = null;
      if (this.stopped) return;
      this.backoff = nextBackoffMs(this.backoff);
      this.onStatus('closed', `retrying in ${this.backoff / 1000}s`);
      setTimeout(() => this.connect(), this.backoff);
    };
    ws.onerror = () => ws.close();
  }

  get ready(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  send(m: ClientMsg): boolean {
    if (!this.ready) return false;
    this.ws!.send(JSON.stringify(m));
    return true;
  }

  stop(): void {
    this.stopped = true;
    this.ws?.close();
  }
}
