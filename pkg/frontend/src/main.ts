// Console wiring: connects the session to the DOM.

import { webAudioBeeper } from "./audio.js";
import { DrivePad, PadDirection } from "./drivepad.js";
import { buildCommand } from "./protocol.js";
import { paintFrame } from "./renderer.js";
import { Session, SessionView } from "./session.js";
import { ScheduleEntry, buildScheduleCommand, validateDraft } from "./schedule.js";

const CELL_PX = 16;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  return `${proto}//${location.host}/ws`;
}

function main(): void {
  const modeBadge = el<HTMLSpanElement>("mode-badge");
  const connBadge = el<HTMLSpanElement>("conn-badge");
  const canvas = el<HTMLCanvasElement>("camera");
  const ctx = canvas.getContext("2d")!;
  const frameSeqLabel = el<HTMLSpanElement>("frame-seq");
  const alertFeed = el<HTMLUListElement>("alert-feed");
  const vitalsLabel = el<HTMLSpanElement>("vitals");
  const poseLabel = el<HTMLSpanElement>("pose");
  const coverageLabel = el<HTMLSpanElement>("coverage");
  const padNote = el<HTMLDivElement>("pad-note");
  const scheduleErrors = el<HTMLDivElement>("schedule-errors");
  const scheduleRows = el<HTMLTableSectionElement>("schedule-rows");

  const cue = webAudioBeeper();
  const session = new Session(wsUrl(), {
    socketFactory: (url) => new WebSocket(url),
    cue,
    onChange: render,
  });

  const pad = new DrivePad(
    (line) => session.send(line),
    () => session.view.mode === "MANUAL",
  );

  function render(view: SessionView): void {
    connBadge.textContent = view.connection;
    connBadge.className = `badge conn-${view.connection}`;
    modeBadge.textContent = view.mode ?? "–";
    modeBadge.className = `badge mode-${view.mode ?? "none"}`;
    if (view.error) {
      connBadge.textContent = view.error;
    }
    if (view.frame) {
      paintFrame(ctx, view.frame, CELL_PX);
      frameSeqLabel.textContent = `frame #${view.frame.seq}`;
    }
    if (view.telemetry) {
      const t = view.telemetry;
      poseLabel.textContent =
        `x ${t.pose.x.toFixed(2)}  y ${t.pose.y.toFixed(2)}  θ ${t.pose.theta.toFixed(2)}`;
      coverageLabel.textContent =
        `${(t.visits.fraction * 100).toFixed(1)}% covered, max visit ${t.visits.max_count}`;
      vitalsLabel.textContent = t.vitals
        ? `♥ ${t.vitals.pulse_bpm.toFixed(0)} bpm   ${t.vitals.temp_c.toFixed(1)} °C`
        : "no vitals yet";
      if (view.mode !== "MANUAL" && pad.held) {
        pad.cancel();
      }
    }
    alertFeed.replaceChildren(
      ...view.alerts.slice(0, 12).map((a) => {
        const li = document.createElement("li");
        li.textContent = `[${a.ts.toFixed(1)}s] ${a.text}`;
        li.className = `alert-${a.kind.toLowerCase()}`;
        return li;
      }),
    );
    if (view.lastNack) {
      padNote.textContent = `${view.lastNack.code ?? "refused"}: ${view.lastNack.detail ?? ""}`;
    }
    padNote.hidden = !view.lastNack;
  }

  // mode toggle
  el<HTMLButtonElement>("btn-manual").onclick = () =>
    session.send(buildCommand("mode_set", { mode: "MANUAL" }));
  el<HTMLButtonElement>("btn-auto").onclick = () =>
    session.send(buildCommand("mode_set", { mode: "AUTONOMOUS" }));
  el<HTMLButtonElement>("btn-sos").onclick = () =>
    session.send(buildCommand("emergency_press", {}));

  // drive pad (pointer + keyboard)
  const padButtons: [string, PadDirection][] = [
    ["pad-fwd", "fwd"], ["pad-back", "back"], ["pad-left", "left"], ["pad-right", "right"],
  ];
  for (const [id, dir] of padButtons) {
    const btn = el<HTMLButtonElement>(id);
    btn.onpointerdown = () => {
      if (!pad.press(dir)) {
        padNote.textContent = "drive pad works in MANUAL mode only";
        padNote.hidden = false;
      }
    };
    btn.onpointerup = btn.onpointerleave = () => pad.release();
  }
  const keyMap: Record<string, PadDirection> = {
    ArrowUp: "fwd", ArrowDown: "back", ArrowLeft: "left", ArrowRight: "right",
    w: "fwd", s: "back", a: "left", d: "right",
  };
  document.addEventListener("keydown", (ev) => {
    const dir = keyMap[ev.key];
    if (dir && !ev.repeat) {
      pad.press(dir);
    }
  });
  document.addEventListener("keyup", (ev) => {
    if (keyMap[ev.key]) {
      pad.release();
    }
  });

  // camera pan
  for (const dir of ["LEFT", "RIGHT", "UP", "DOWN"] as const) {
    el<HTMLButtonElement>(`pan-${dir.toLowerCase()}`).onclick = () =>
      session.send(buildCommand("camera_pan", { dir }));
  }

  // schedule editor
  const draft: ScheduleEntry[] = [];

  function renderDraft(): void {
    scheduleRows.replaceChildren(
      ...draft.map((entry, i) => {
        const tr = document.createElement("tr");
        const make = (value: string, onInput: (v: string) => void) => {
          const td = document.createElement("td");
          const input = document.createElement("input");
          input.value = value;
          input.oninput = () => onInput(input.value);
          td.appendChild(input);
          return td;
        };
        tr.appendChild(make(entry.id, (v) => (draft[i].id = v)));
        tr.appendChild(make(entry.label, (v) => (draft[i].label = v)));
        tr.appendChild(make(entry.time, (v) => (draft[i].time = v)));
        const tdOn = document.createElement("td");
        const check = document.createElement("input");
        check.type = "checkbox";
        check.checked = entry.enabled;
        check.onchange = () => (draft[i].enabled = check.checked);
        tdOn.appendChild(check);
        tr.appendChild(tdOn);
        const tdDel = document.createElement("td");
        const del = document.createElement("button");
        del.textContent = "✕";
        del.onclick = () => {
          draft.splice(i, 1);
          renderDraft();
        };
        tdDel.appendChild(del);
        tr.appendChild(tdDel);
        return tr;
      }),
    );
  }

  el<HTMLButtonElement>("schedule-add").onclick = () => {
    draft.push({ id: `m${draft.length + 1}`, label: "", time: "08:00", enabled: true });
    renderDraft();
  };
  el<HTMLButtonElement>("schedule-send").onclick = () => {
    const errors = validateDraft(draft);
    if (errors.length > 0) {
      scheduleErrors.textContent = errors.join("; ");
      return;
    }
    scheduleErrors.textContent = "";
    session.send(buildScheduleCommand(draft));
  };

  session.connect();
}

window.addEventListener("load", main);
