import type { ConsoleStore } from "./store.js";
import type { UiInfo } from "./types.js";

/** Minimal WebSocket surface: satisfied by the browser class and by `ws`. */
export interface WsLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type WsFactory = (url: string) => WsLike;

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export interface ClientOptions {
  wsFactory: WsFactory;
  fetchImpl: FetchLike;
  /** Reconnect delays in ms; the last entry repeats. */
  backoffMs?: number[];
}

const DEFAULT_BACKOFF = [500, 1000, 2000, 4000, 5000];

/**
 * Owns the WebSocket lifecycle (auto-reconnect with backoff) and command
 * POSTs. Commands are debounced per button: while one is in flight the
 * next click on the same button is dropped, never queued.
 */
export class ConsoleClient {
  private store: ConsoleStore;
  private baseUrl: string;
  private wsUrl: string;
  private wsFactory: WsFactory;
  private fetchImpl: FetchLike;
  private backoff: number[];
  private attempt = 0;
  private ws: WsLike | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private disposed = false;
  private lastFailed: (() => Promise<boolean>) | null = null;

  constructor(store: ConsoleStore, baseUrl: string, opts: ClientOptions) {
    this.store = store;
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.wsUrl = this.baseUrl.replace(/^http/, "ws") + "/ws";
    this.wsFactory = opts.wsFactory;
    this.fetchImpl = opts.fetchImpl;
    this.backoff = opts.backoffMs ?? DEFAULT_BACKOFF;
  }

  connect(): void {
    if (this.disposed) return;
    this.store.setStatus("connecting");
    void this.fetchUi();
    let sock: WsLike;
    try {
      sock = this.wsFactory(this.wsUrl);
    } catch {
      this.store.setStatus("disconnected");
      this.scheduleReconnect();
      return;
    }
    this.ws = sock;
    sock.onopen = () => {
      if (this.disposed) return;
      this.attempt = 0;
      this.store.setStatus("connected");
      void this.fetchUi();
    };
    sock.onmessage = (ev) => {
      if (this.disposed) return;
      try {
        this.store.applyMessage(JSON.parse(String(ev.data)));
      } catch {
        this.store.recordError();
      }
    };
    sock.onerror = () => {
      // a close event follows; nothing to do here
    };
    sock.onclose = () => {
      if (this.disposed) return;
      this.ws = null;
      this.store.setStatus("disconnected");
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.disposed || this.timer !== null) return;
    const delay = this.backoff[Math.min(this.attempt, this.backoff.length - 1)];
    this.attempt += 1;
    this.timer = setTimeout(() => {
      this.timer = null;
      this.connect();
    }, delay);
  }

  private async fetchUi(): Promise<void> {
    try {
      const res = await this.fetchImpl(this.baseUrl + "/scenario");
      if (!res.ok) return;
      const body = (await res.json()) as { ui?: UiInfo };
      if (body && body.ui) this.store.setUi(body.ui);
    } catch {
      // the next reconnect retries; the UI keeps its defaults meanwhile
    }
  }

  sendSignal(u: string): Promise<boolean> {
    return this.command(`signal:${u}`, "/signal", { u });
  }

  sendJog(joint: number, deltaRad: number): Promise<boolean> {
    return this.command(`jog:${joint}`, "/jog", { joint, delta_rad: deltaRad });
  }

  /** Re-issue the last failed command (the toast's retry button). */
  retryLast(): void {
    const f = this.lastFailed;
    if (!f) return;
    this.lastFailed = null;
    void f();
  }

  private async command(key: string, path: string, body: unknown): Promise<boolean> {
    const state = this.store.getState();
    if (state.status !== "connected") return false;
    if (state.pending[key]) return false;
    this.store.setPending(key, true);
    try {
      const res = await this.fetchImpl(this.baseUrl + path, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      });
      if (!res.ok) throw new Error(`status ${res.status}`);
      this.store.setToast(null);
      this.lastFailed = null;
      return true;
    } catch {
      this.lastFailed = () => this.command(key, path, body);
      this.store.setToast(`command failed: POST ${path} ${JSON.stringify(body)}`);
      return false;
    } finally {
      this.store.setPending(key, false);
    }
  }

  dispose(): void {
    this.disposed = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    if (this.ws) {
      try {
        this.ws.close();
      } catch {
        // already gone
      }
      this.ws = null;
    }
    this.store.setStatus("disconnected");
  }
}
