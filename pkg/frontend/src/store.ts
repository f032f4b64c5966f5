import type {
  ConnectionStatus,
  ConsoleState,
  Snapshot,
  TraceRow,
  UiInfo,
} from "./types.js";

export const TRACE_RING = 200;

type Listener = () => void;

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isNumArray(v: unknown, n: number): v is number[] {
  return Array.isArray(v) && v.length === n && v.every(isFiniteNumber);
}

export function isSnapshot(v: unknown): v is Snapshot {
  if (!v || typeof v !== "object") return false;
  const s = v as Record<string, unknown>;
  const det = s.detection;
  const detOk =
    det === null ||
    (!!det && typeof det === "object" && typeof (det as Record<string, unknown>).found === "boolean");
  return (
    isFiniteNumber(s.t) &&
    typeof s.state === "string" &&
    isNumArray(s.q, 4) &&
    isNumArray(s.steps, 4) &&
    isNumArray(s.targets, 4) &&
    typeof s.settled === "boolean" &&
    detOk &&
    Array.isArray(s.events)
  );
}

export function isTraceRow(v: unknown): v is TraceRow {
  if (!v || typeof v !== "object") return false;
  const r = v as Record<string, unknown>;
  return (
    isFiniteNumber(r.t) &&
    typeof r.state === "string" &&
    typeof r.signal === "string" &&
    typeof r.next === "string"
  );
}

/**
 * Single source of console truth. All mutation goes through methods that
 * replace the state object and notify subscribers; renderers read only
 * what the service sent (no client-side simulation).
 */
export class ConsoleStore {
  private state: ConsoleState = {
    status: "connecting",
    snapshot: null,
    trace: [],
    traceTotal: 0,
    pending: {},
    errorCount: 0,
    ui: null,
    toast: null,
  };
  private listeners: Listener[] = [];

  getState(): ConsoleState {
    return this.state;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(): void {
    for (const l of [...this.listeners]) l();
  }

  setStatus(status: ConnectionStatus): void {
    if (this.state.status === status) return;
    this.state = { ...this.state, status };
    this.emit();
  }

  setUi(ui: UiInfo): void {
    this.state = { ...this.state, ui };
    this.emit();
  }

  setToast(toast: string | null): void {
    this.state = { ...this.state, toast };
    this.emit();
  }

  setPending(key: string, on: boolean): void {
    const pending = { ...this.state.pending };
    if (on) pending[key] = true;
    else delete pending[key];
    this.state = { ...this.state, pending };
    this.emit();
  }

  /** Apply one parsed WS message; malformed input is skipped and counted. */
  applyMessage(raw: unknown): void {
    const msg = raw as { type?: unknown; data?: unknown } | null;
    if (msg && msg.type === "state" && isSnapshot(msg.data)) {
      this.state = { ...this.state, snapshot: msg.data };
      this.emit();
      return;
    }
    if (msg && msg.type === "trace" && isTraceRow(msg.data)) {
      const trace = [...this.state.trace, msg.data];
      if (trace.length > TRACE_RING) trace.splice(0, trace.length - TRACE_RING);
      this.state = { ...this.state, trace, traceTotal: this.state.traceTotal + 1 };
      this.emit();
      return;
    }
    this.recordError();
  }

  recordError(): void {
    this.state = { ...this.state, errorCount: this.state.errorCount + 1 };
    this.emit();
  }
}
