import type { ConsoleClient } from "./client.js";
import type { ConsoleStore } from "./store.js";
import type { ConsoleState } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

/** Image-plane pixels to plot units (640x480 image drawn at half size). */
const PLOT_SCALE = 0.5;

const JOG_STEP_RAD = 0.1;

/** Diagram layout: the nominal cycle first, side states after. */
const DIAGRAM_STATES: ReadonlyArray<readonly [string, string]> = [
  ["X0", "waiting"],
  ["X1", "product search"],
  ["X2", "positioning"],
  ["X3", "grasp"],
  ["X4", "face search"],
  ["X5", "move to face"],
  ["X6", "feeding"],
  ["X9", "confirm wait"],
  ["X7", "repeat"],
  ["X10", "no objects"],
  ["X8", "e-stop"],
];

const SIGNAL_BUTTONS: ReadonlyArray<readonly [string, string]> = [
  ["u1", "Start"],
  ["u7", "Repeat"],
  ["u10", "Pause"],
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function svgEl(tag: string, attrs: Record<string, string> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, tag) as SVGElement;
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

/**
 * Build the console DOM under `root`, wire buttons to the client, and
 * keep every view in sync with the store. Rendered values always come
 * from the last received snapshot.
 */
export function mountConsole(root: HTMLElement, store: ConsoleStore, client: ConsoleClient): void {
  root.classList.add("console");

  // ----------------------------------------------------------- header
  const header = el("header", { "data-testid": "header" });
  header.append(el("h1", {}, "Feeding arm console"));
  const statusChip = el("span", { class: "chip status", "data-testid": "status-chip" }, "connecting");
  const stateChip = el("span", { class: "chip state", "data-testid": "state-chip" }, "-");
  const estopBtn = el(
    "button",
    { class: "estop", "data-command": "", "data-testid": "btn-u8", type: "button" },
    "E-STOP",
  );
  estopBtn.addEventListener("click", () => void client.sendSignal("u8"));
  header.append(statusChip, stateChip, estopBtn);
  root.append(header);

  const banner = el(
    "div",
    { class: "banner", "data-testid": "banner" },
    "disconnected: controls are locked until the service is reachable again",
  );
  banner.hidden = true;
  root.append(banner);

  const toast = el("div", { class: "toast", "data-testid": "toast" });
  const toastMsg = el("span", { "data-testid": "toast-msg" });
  const toastRetry = el("button", { "data-testid": "toast-retry", type: "button" }, "retry");
  toastRetry.addEventListener("click", () => client.retryLast());
  toast.append(toastMsg, toastRetry);
  toast.hidden = true;
  root.append(toast);

  const main = el("main", { class: "grid" });
  root.append(main);

  // ---------------------------------------------------------- diagram
  const diagram = el("section", { class: "panel diagram", "data-testid": "diagram" });
  diagram.append(el("h2", {}, "Cycle"));
  const diagramChips = new Map<string, HTMLElement>();
  const chipRow = el("div", { class: "chips" });
  for (const [code, label] of DIAGRAM_STATES) {
    const chip = el("div", { class: "state-chip", "data-state-chip": code });
    chip.append(el("b", {}, code), el("small", {}, label));
    diagramChips.set(code, chip);
    chipRow.append(chip);
  }
  diagram.append(chipRow);
  main.append(diagram);

  // ----------------------------------------------------------- gauges
  const gauges = el("section", { class: "panel gauges" });
  gauges.append(el("h2", {}, "Joints"));
  const angleCells: HTMLElement[] = [];
  const stepCells: HTMLElement[] = [];
  const barFills: HTMLElement[] = [];
  const jogButtons: HTMLButtonElement[] = [];
  for (let i = 0; i < 4; i += 1) {
    const gauge = el("div", { class: "gauge" });
    gauge.append(el("h3", {}, `Joint ${i + 1}`));
    const angle = el("div", { class: "angle", "data-testid": `angle-${i}` }, "-");
    const steps = el("div", { class: "steps", "data-testid": `steps-${i}` }, "-");
    const bar = el("div", { class: "bar" });
    const fill = el("div", { class: "fill", "data-testid": `bar-${i}` });
    bar.append(fill);
    const jog = el("div", { class: "jog" });
    const minus = el(
      "button",
      { "data-command": "", "data-testid": `jog-minus-${i}`, type: "button" },
      `-${JOG_STEP_RAD}`,
    );
    const plus = el(
      "button",
      { "data-command": "", "data-testid": `jog-plus-${i}`, type: "button" },
      `+${JOG_STEP_RAD}`,
    );
    minus.addEventListener("click", () => void client.sendJog(i, -JOG_STEP_RAD));
    plus.addEventListener("click", () => void client.sendJog(i, JOG_STEP_RAD));
    jog.append(minus, plus);
    jogButtons.push(minus, plus);
    gauge.append(angle, steps, bar, jog);
    angleCells.push(angle);
    stepCells.push(steps);
    barFills.push(fill);
    gauges.append(gauge);
  }
  main.append(gauges);

  // ----------------------------------------------------------- camera
  const camera = el("section", { class: "panel camera" });
  camera.append(el("h2", {}, "Camera plane"));
  const svg = svgEl("svg", {
    viewBox: "-160 -120 320 240",
    width: "320",
    height: "240",
    "data-testid": "camera-plot",
  });
  svg.append(
    svgEl("rect", { x: "-160", y: "-120", width: "320", height: "240", class: "frame" }),
    svgEl("line", { x1: "-160", y1: "0", x2: "160", y2: "0", class: "cross" }),
    svgEl("line", { x1: "0", y1: "-120", x2: "0", y2: "120", class: "cross" }),
  );
  const thresholdCircle = svgEl("circle", {
    cx: "0",
    cy: "0",
    r: String(20 * PLOT_SCALE),
    class: "threshold",
    "data-testid": "threshold-circle",
  });
  const targetDot = svgEl("circle", {
    r: "4",
    class: "dot",
    visibility: "hidden",
    "data-testid": "target-dot",
  });
  svg.append(thresholdCircle, targetDot);
  camera.append(svg);
  const servoError = el("div", { class: "servo-error", "data-testid": "servo-error" }, "no detection");
  camera.append(servoError);
  main.append(camera);

  // --------------------------------------------------------- controls
  const controls = el("section", { class: "panel controls" });
  controls.append(el("h2", {}, "Commands"));
  const signalButtons = new Map<string, HTMLButtonElement>();
  for (const [u, label] of SIGNAL_BUTTONS) {
    const btn = el(
      "button",
      { "data-command": "", "data-testid": `btn-${u}`, type: "button" },
      `${label} (${u})`,
    );
    btn.addEventListener("click", () => void client.sendSignal(u));
    signalButtons.set(u, btn);
    controls.append(btn);
  }
  const pendingNote = el("div", { class: "pending", "data-testid": "pending" });
  pendingNote.hidden = true;
  controls.append(pendingNote);
  main.append(controls);

  // ------------------------------------------------------- trace log
  const tracePanel = el("section", { class: "panel trace" });
  tracePanel.append(el("h2", {}, "Trace"));
  const traceLog = el("ol", { class: "trace-log", "data-testid": "trace-log" });
  tracePanel.append(traceLog);
  const eventsList = el("ul", { class: "events", "data-testid": "events" });
  tracePanel.append(el("h3", {}, "Events"), eventsList);
  const errorCount = el("span", { class: "errors", "data-testid": "error-count" }, "skipped: 0");
  tracePanel.append(errorCount);
  main.append(tracePanel);

  // ----------------------------------------------------------- update
  let renderedTraceTotal = 0;

  function update(): void {
    const state: ConsoleState = store.getState();
    const connected = state.status === "connected";
    const snap = state.snapshot;

    statusChip.textContent = state.status;
    statusChip.className = `chip status status-${state.status}`;
    banner.hidden = connected;

    stateChip.textContent = snap ? snap.state : "-";
    header.classList.toggle("alert", snap?.state === "X8");
    for (const [code, chip] of diagramChips) {
      chip.classList.toggle("active", snap?.state === code);
    }

    if (snap) {
      const limits = state.ui?.joint_limits_deg;
      for (let i = 0; i < 4; i += 1) {
        angleCells[i].textContent = `${snap.q[i].toFixed(3)} rad`;
        stepCells[i].textContent = `${snap.steps[i]} / ${snap.targets[i]}`;
        const [lo, hi] = limits?.[i] ?? [-180, 180];
        const deg = (snap.q[i] * 180) / Math.PI;
        const frac = Math.min(1, Math.max(0, (deg - lo) / (hi - lo)));
        barFills[i].style.width = `${(frac * 100).toFixed(1)}%`;
      }
    }

    if (state.ui) {
      thresholdCircle.setAttribute("r", String(state.ui.radius_threshold * PLOT_SCALE));
    }
    const det = snap?.detection;
    if (det && det.found) {
      targetDot.setAttribute("cx", String(det.x_offset * PLOT_SCALE));
      targetDot.setAttribute("cy", String(-det.y_offset * PLOT_SCALE));
      targetDot.setAttribute("visibility", "visible");
      const s = snap?.servo_error;
      servoError.textContent = s === null || s === undefined ? "detected" : `s = ${s.toFixed(1)} px`;
    } else {
      targetDot.setAttribute("visibility", "hidden");
      servoError.textContent = "no detection";
    }

    // e-stop is always enabled while connected; other buttons also wait
    // out their own in-flight command
    estopBtn.disabled = !connected;
    for (const [u, btn] of signalButtons) {
      btn.disabled = !connected || !!state.pending[`signal:${u}`];
    }
    jogButtons.forEach((btn, idx) => {
      const joint = Math.floor(idx / 2);
      btn.disabled = !connected || !!state.pending[`jog:${joint}`];
    });

    const pendingKeys = Object.keys(state.pending);
    pendingNote.hidden = pendingKeys.length === 0;
    pendingNote.textContent = pendingKeys.length ? `sending: ${pendingKeys.join(", ")}` : "";

    toast.hidden = state.toast === null;
    toastMsg.textContent = state.toast ?? "";

    if (state.traceTotal !== renderedTraceTotal) {
      const fresh = Math.min(state.traceTotal - renderedTraceTotal, state.trace.length);
      for (const row of state.trace.slice(state.trace.length - fresh)) {
        const item = el(
          "li",
          {},
          `${row.t.toFixed(3)}s  ${row.state}  ${row.signal}  ${row.next}`,
        );
        traceLog.append(item);
      }
      while (traceLog.childElementCount > state.trace.length) {
        traceLog.firstElementChild?.remove();
      }
      renderedTraceTotal = state.traceTotal;
      traceLog.scrollTop = traceLog.scrollHeight;
    }

    eventsList.replaceChildren(
      ...(snap?.events ?? []).map((e) => el("li", {}, `${e.t.toFixed(3)}s  ${e.message}`)),
    );
    errorCount.textContent = `skipped: ${state.errorCount}`;
  }

  store.subscribe(update);
  update();
}
