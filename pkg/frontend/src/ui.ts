/**
 * DOM construction for the control surface.  Deliberately plain: panels
 * of buttons, a draggable listener pad and a status strip.  All state
 * shown (BPM, room, loops, meters) mirrors the last STATUS line.
 */

import {
  BINDINGS,
  LISTENER_EAR_HEIGHT,
  Panel,
  PanelBinding,
  padToRoom,
} from "./bindings.js";
import { EngineClient } from "./client.js";
import { buildPosListener, EngineStatus } from "./protocol.js";

const PANELS: Panel[] = ["Conductor1", "Conductor2", "Crane1", "Crane2"];

export function mount(root: HTMLElement, client: EngineClient): void {
  root.innerHTML = "";
  root.appendChild(buildStatusStrip(client));
  const grid = document.createElement("div");
  grid.className = "panels";
  for (const panel of PANELS) {
    grid.appendChild(buildPanel(panel, client));
  }
  root.appendChild(grid);
  root.appendChild(buildListenerPad(client));
  client.startPolling();
}

function buildPanel(panel: Panel, client: EngineClient): HTMLElement {
  const box = document.createElement("section");
  box.className = "panel";
  const title = document.createElement("h2");
  title.textContent = panel;
  box.appendChild(title);
  for (const binding of BINDINGS.filter((b) => b.panel === panel)) {
    box.appendChild(buildControl(binding, client));
  }
  return box;
}

function buildControl(binding: PanelBinding, client: EngineClient): HTMLElement {
  const button = document.createElement("button");
  button.id = binding.control;
  button.textContent = binding.label;
  button.dataset.kind = binding.kind;
  if (binding.kind === "loop") {
    let on = false;
    button.addEventListener("click", () => {
      on = !on;
      button.classList.toggle("active", on);
      for (const line of binding.messages(on)) {
        void client.send(line);
      }
    });
  } else {
    button.addEventListener("click", () => {
      for (const line of binding.messages()) {
        void client.send(line);
      }
    });
  }
  return button;
}

function buildListenerPad(client: EngineClient): HTMLElement {
  const wrap = document.createElement("section");
  wrap.className = "panel listener";
  const title = document.createElement("h2");
  title.textContent = "Listener";
  wrap.appendChild(title);
  const pad = document.createElement("div");
  pad.id = "listener_pad";
  pad.className = "pad";
  const dot = document.createElement("div");
  dot.className = "dot";
  pad.appendChild(dot);

  const sendPosition = (clientX: number, clientY: number) => {
    const rect = pad.getBoundingClientRect();
    const fx = Math.min(Math.max((clientX - rect.left) / rect.width, 0), 1);
    const fy = Math.min(Math.max((clientY - rect.top) / rect.height, 0), 1);
    const { x, y } = padToRoom(fx, fy);
    dot.style.left = `${fx * 100}%`;
    dot.style.top = `${fy * 100}%`;
    void client.send(buildPosListener(x, y, LISTENER_EAR_HEIGHT, 0.0));
  };

  let dragging = false;
  pad.addEventListener("pointerdown", (ev) => {
    dragging = true;
    pad.setPointerCapture(ev.pointerId);
    sendPosition(ev.clientX, ev.clientY);
  });
  pad.addEventListener("pointermove", (ev) => {
    if (dragging) {
      sendPosition(ev.clientX, ev.clientY);
    }
  });
  pad.addEventListener("pointerup", () => {
    dragging = false;
  });
  wrap.appendChild(pad);
  return wrap;
}

function buildStatusStrip(client: EngineClient): HTMLElement {
  const strip = document.createElement("header");
  strip.className = "status";
  const bpm = span("bpm", "BPM --");
  const room = span("room", "ROOM --");
  const loops = span("loops", "loops: none");
  const link = span("link", "connecting...");
  const meters = document.createElement("div");
  meters.className = "meters";
  const bars: HTMLElement[] = [];
  for (let i = 0; i < 8; i++) {
    const bar = document.createElement("div");
    bar.className = "meter";
    const fill = document.createElement("div");
    fill.className = "fill";
    bar.appendChild(fill);
    meters.appendChild(bar);
    bars.push(fill);
  }
  strip.append(bpm, room, loops, meters, link);

  client.onStatus((status: EngineStatus | null) => {
    if (status === null) {
      link.textContent = "disconnected";
      link.classList.add("down");
      return;
    }
    link.textContent = "live";
    link.classList.remove("down");
    bpm.textContent = `BPM ${status.bpm.toFixed(2)}`;
    room.textContent = `ROOM ${status.room.toUpperCase()}`;
    loops.textContent = status.loops.length
      ? `loops: ${status.loops.join(", ")}`
      : "loops: none";
    status.meters.forEach((db, i) => {
      const frac = Math.min(Math.max((db + 60) / 60, 0), 1);
      bars[i].style.height = `${frac * 100}%`;
    });
  });
  return strip;
}

function span(cls: string, text: string): HTMLElement {
  const el = document.createElement("span");
  el.className = cls;
  el.textContent = text;
  return el;
}
