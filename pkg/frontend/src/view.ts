/**
 * DOM rendering: maps UiState onto the static page. No business logic
 * here; everything decidable lives in state.ts. The watermark banner is
 * part of the static page and is never hidden by any code path.
 */

import {
  canSubmit,
  countdownDisplay,
  deadlinePassed,
  type SimEvent,
  type UiState,
} from "./state.js";

export interface Dom {
  offlineBanner: HTMLElement;
  noteView: HTMLElement;
  successView: HTMLElement;
  idleView: HTMLElement;
  noteText: HTMLElement;
  countdown: HTMLElement;
  deadlineNote: HTMLElement;
  filesLocked: HTMLElement;
  keyForm: HTMLFormElement;
  keyInput: HTMLTextAreaElement;
  submitButton: HTMLButtonElement;
  keyMessage: HTMLElement;
  progressWrap: HTMLElement;
  progressBar: HTMLElement;
  progressLabel: HTMLElement;
  eventFeed: HTMLElement;
  successDetail: HTMLElement;
}

export function bindDom(doc: Document): Dom {
  const get = (id: string): HTMLElement => {
    const el = doc.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el;
  };
  return {
    offlineBanner: get("offline-banner"),
    noteView: get("note-view"),
    successView: get("success-view"),
    idleView: get("idle-view"),
    noteText: get("note-text"),
    countdown: get("countdown-display"),
    deadlineNote: get("deadline-passed"),
    filesLocked: get("files-locked"),
    keyForm: get("key-form") as HTMLFormElement,
    keyInput: get("key-input") as HTMLTextAreaElement,
    submitButton: get("submit-key") as HTMLButtonElement,
    keyMessage: get("key-message"),
    progressWrap: get("progress-wrap"),
    progressBar: get("progress-bar"),
    progressLabel: get("progress-label"),
    eventFeed: get("event-feed"),
    successDetail: get("success-detail"),
  };
}

function eventLine(e: SimEvent): string {
  const parts = [`#${e.seq}`, e.kind];
  if (e.relative_path) parts.push(e.relative_path);
  if (e.detail) parts.push(`(${e.detail})`);
  return parts.join("  ");
}

export function render(state: UiState, dom: Dom): void {
  dom.offlineBanner.hidden = !state.offline;

  const showNote =
    state.phase === "locked" ||
    state.phase === "decrypting" ||
    state.phase === "unknown" ||
    state.phase === "encrypting";
  dom.noteView.hidden = !showNote;
  dom.successView.hidden = state.phase !== "restored";
  dom.idleView.hidden = state.phase !== "idle";

  dom.noteText.textContent = state.noteText;
  dom.filesLocked.textContent = String(state.filesLocked);
  dom.countdown.textContent = countdownDisplay(state.secondsRemaining);
  dom.deadlineNote.hidden = !deadlinePassed(state);

  dom.submitButton.disabled = !canSubmit(state);
  dom.keyMessage.hidden = state.keyMessage === null;
  dom.keyMessage.textContent = state.keyMessage ?? "";

  const restoring = state.phase === "decrypting" || state.phase === "restored";
  dom.progressWrap.hidden = !restoring;
  if (restoring) {
    const pct = Math.round(state.progress * 100);
    dom.progressBar.style.width = `${pct}%`;
    const done = state.totalToRestore - state.filesLocked;
    dom.progressLabel.textContent =
      `${done}/${state.totalToRestore} files restored (${pct}%)`;
  }

  if (state.phase === "restored") {
    dom.successDetail.textContent =
      `${state.totalToRestore} files restored. Checksums verified by the` +
      ` engine; see the activity feed below.`;
  }

  // event feed: render only the tail that changed
  const want = state.events.map(eventLine);
  while (dom.eventFeed.children.length > want.length) {
    dom.eventFeed.removeChild(dom.eventFeed.firstChild as Node);
  }
  const existing = dom.eventFeed.children.length;
  for (let i = 0; i < want.length; i++) {
    if (i < existing) {
      if (dom.eventFeed.children[i].textContent !== want[i]) {
        dom.eventFeed.children[i].textContent = want[i];
      }
    } else {
      const li = dom.eventFeed.ownerDocument.createElement("li");
      li.textContent = want[i];
      dom.eventFeed.appendChild(li);
    }
  }
}
