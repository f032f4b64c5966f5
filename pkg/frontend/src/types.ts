/** Shapes shared across the console. Mirrors the sim service JSON contract. */

export interface Detection {
  found: boolean;
  x_offset: number;
  y_offset: number;
  distance: number;
  box_w: number;
  box_h: number;
}

export interface WorldEvent {
  t: number;
  message: string;
}

/** One line of run.jsonl / GET /state / WS "state" messages. */
export interface Snapshot {
  t: number;
  state: string;
  q: number[];
  steps: number[];
  targets: number[];
  settled: boolean;
  detection: Detection | null;
  servo_error: number | null;
  events: WorldEvent[];
}

/** One supervisor transition, WS "trace" messages. */
export interface TraceRow {
  t: number;
  state: string;
  signal: string;
  next: string;
}

/** The ui block of GET /scenario: display constants owned by the sim. */
export interface UiInfo {
  radius_threshold: number;
  stable_duration: number;
  signals: string[];
  states: string[];
  steps_per_rev: number[];
  joint_limits_deg: number[][];
  image_size: number[];
  dt: number;
  speed: number;
}

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface ConsoleState {
  status: ConnectionStatus;
  /** Always the last received snapshot, never locally extrapolated. */
  snapshot: Snapshot | null;
  /** Ring buffer of the most recent transitions, newest last. */
  trace: TraceRow[];
  /** Count of trace rows ever accepted (lets renderers append increments). */
  traceTotal: number;
  /** Commands in flight, keyed per button. */
  pending: Record<string, boolean>;
  /** Malformed messages skipped so far. */
  errorCount: number;
  ui: UiInfo | null;
  toast: string | null;
}
