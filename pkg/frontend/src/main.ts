import { createSession, sendChat, ApiError } from "./api.js";
import { addKbRow, applyFailure, applyReply, beginSend, editKbCell, newSession,
         nonEmptyRows, UiSession } from "./logic.js";
import { renderBanner, renderChat, renderKbGrid, renderStateHeatmap } from "./ui.js";

const BASE = "";  // served from the same origin as the API
const NAV_COLUMNS = ["poi", "traffic_info", "poi_type", "address", "distance"];

let session: UiSession = newSession(NAV_COLUMNS);

const chatEl = document.getElementById("chat")!;
const kbEl = document.getElementById("kb")!;
const heatEl = document.getElementById("heatmap")!;
const bannerEl = document.getElementById("banner")!;
const inputEl = document.getElementById("utterance") as HTMLInputElement;
const sendEl = document.getElementById("send") as HTMLButtonElement;

function render(): void {
  renderChat(chatEl, session);
  renderBanner(bannerEl, session);
  renderKbGrid(kbEl, session,
    (row, column, value) => { session = editKbCell(session, row, column, value); },
    () => { session = addKbRow(session); render(); });
  renderStateHeatmap(heatEl, session);
  sendEl.disabled = session.pending;  // one in-flight request per session
}

async function send(): Promise<void> {
  const utterance = inputEl.value.trim();
  if (!utterance || session.pending) return;
  session = beginSend(session, utterance);
  render();
  try {
    if (session.sessionId === null) {
      const rows = nonEmptyRows(session.kb);
      if (rows.length === 0) throw new ApiError(400, "fill in at least one KB row");
      session.sessionId = await createSession(BASE, { columns: session.kb.columns, rows });
      session.kb = { columns: session.kb.columns, rows };
    }
    const reply = await sendChat(BASE, session.sessionId, utterance);
    session = applyReply(session, reply);
    inputEl.value = "";
  } catch (err) {
    session = applyFailure(session, err instanceof Error ? err.message : String(err));
  }
  render();
}

sendEl.addEventListener("click", () => { void send(); });
inputEl.addEventListener("keydown", (ev) => {
  if (ev.key === "Enter") void send();
});

render();
