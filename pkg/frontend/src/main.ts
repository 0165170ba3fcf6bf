/**
 * Entry point: wires the poll loop, the local countdown tick, and the
 * key-submission form. The pasted key goes from the textarea straight
 * into the unlock request and nowhere else (no storage, no URL, no
 * console).
 */

import { fetchEvents, fetchStatus, submitKey } from "./api.js";
import {
  applyEvents,
  applyStatus,
  applyUnlockOutcome,
  beginSubmit,
  canSubmit,
  initialState,
  onPollFailure,
  pollDelayMs,
  tickCountdown,
  type UiState,
} from "./state.js";
import { bindDom, render } from "./view.js";

function start(): void {
  const dom = bindDom(document);
  let state: UiState = initialState();

  const redraw = () => render(state, dom);

  async function pollOnce(): Promise<void> {
    try {
      const snap = await fetchStatus();
      state = applyStatus(state, snap);
      state = applyEvents(state, await fetchEvents(state.lastSeq));
    } catch {
      state = onPollFailure(state);
    }
    redraw();
    window.setTimeout(pollOnce, pollDelayMs(state));
  }

  window.setInterval(() => {
    state = tickCountdown(state);
    redraw();
  }, 1000);

  dom.keyForm.addEventListener("submit", (event) => {
    event.preventDefault();
    if (!canSubmit(state)) return;
    const pemText = dom.keyInput.value;
    state = beginSubmit(state);
    redraw();
    void submitKey(pemText).then((outcome) => {
      const applied = applyUnlockOutcome(state, outcome);
      state = applied.state;
      if (applied.clearKeyInput) dom.keyInput.value = "";
      redraw();
    });
  });

  void pollOnce();
}

document.addEventListener("DOMContentLoaded", start);
