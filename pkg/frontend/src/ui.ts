// DOM rendering: chat log, editable KB grid, row highlight, attention heatmap.

import { argmaxEntry, blueShade, rowShade, UiSession } from "./logic.js";

export function renderChat(el: HTMLElement, session: UiSession): void {
  el.innerHTML = "";
  for (const msg of session.messages) {
    const bubble = document.createElement("div");
    bubble.className = `msg ${msg.role}`;
    bubble.textContent = `${msg.role === "driver" ? "you" : "car"}: ${msg.text}`;
    el.appendChild(bubble);
  }
  if (session.pending) {
    const wait = document.createElement("div");
    wait.className = "msg pending";
    wait.textContent = "…";
    el.appendChild(wait);
  }
  el.scrollTop = el.scrollHeight;
}

export function renderBanner(el: HTMLElement, session: UiSession): void {
  el.hidden = session.error === null;
  el.textContent = session.error ? `${session.error} — press send to retry` : "";
}

export function renderKbGrid(el: HTMLElement, session: UiSession,
                             onEdit: (row: number, column: string, value: string) => void,
                             onAddRow: () => void): void {
  el.innerHTML = "";
  const table = document.createElement("table");
  table.className = "kb";
  const head = table.insertRow();
  for (const column of session.kb.columns) {
    const th = document.createElement("th");
    th.textContent = column;
    head.appendChild(th);
  }
  const highlight = argmaxEntry(session.lastTrace);
  session.kb.rows.forEach((row, i) => {
    const tr = table.insertRow();
    tr.style.background = rowShade(session.lastTrace, i);
    if (highlight === i) tr.classList.add("attended");
    for (const column of session.kb.columns) {
      const td = tr.insertCell();
      if (session.kbLocked) {
        td.textContent = row[column];
      } else {
        const input = document.createElement("input");
        input.value = row[column];
        input.addEventListener("input", () => onEdit(i, column, input.value));
        td.appendChild(input);
      }
    }
  });
  el.appendChild(table);
  if (!session.kbLocked) {
    const add = document.createElement("button");
    add.textContent = "add row";
    add.addEventListener("click", onAddRow);
    el.appendChild(add);
  }
}

export function renderStateHeatmap(el: HTMLElement, session: UiSession): void {
  el.innerHTML = "";
  const trace = session.lastTrace;
  if (!trace) return;
  const table = document.createElement("table");
  table.className = "heatmap";
  const head = table.insertRow();
  head.appendChild(document.createElement("th"));
  for (const token of trace.input_tokens) {
    const th = document.createElement("th");
    th.textContent = token;
    head.appendChild(th);
  }
  trace.slot_names.forEach((slot, k) => {
    const tr = table.insertRow();
    const th = document.createElement("th");
    th.textContent = slot;
    tr.appendChild(th);
    for (const weight of trace.state_attention[k]) {
      const td = tr.insertCell();
      td.style.background = blueShade(weight);
      td.title = weight.toFixed(4);
    }
  });
  el.appendChild(table);
}
