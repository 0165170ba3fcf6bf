/**
 * Pure UI state for the ransom-note client.
 *
 * All transitions are plain functions over an immutable-ish state object so
 * the interaction loop (poll responses, unlock outcomes, countdown ticks)
 * is testable without a DOM or a live service. Invariants enforced here:
 * the restore progress fraction never decreases within a run, the countdown
 * clamps at zero, and the pasted key text is never stored in this state at
 * all — it stays inside the submit call chain.
 */

export type Phase = "idle" | "encrypting" | "locked" | "decrypting" | "restored";

export interface StatusSnapshot {
  phase: Phase;
  files_locked: number;
  bytes_locked: number;
  deadline: number | null;
  seconds_remaining: number | null;
  note_text: string;
  last_error: string | null;
  last_report: {
    files_restored: number;
    checksum_matches: number;
    failures: unknown[];
    duration: number;
  } | null;
}

export interface SimEvent {
  seq: number;
  timestamp: number;
  kind: string;
  relative_path?: string | null;
  bytes?: number | null;
  detail?: string | null;
}

export const EVENT_FEED_LIMIT = 200;
export const STALE_AFTER_FAILURES = 5;
export const BASE_POLL_MS = 1000;
export const MAX_BACKOFF_MS = 8000;

export interface UiState {
  phase: Phase | "unknown";
  filesLocked: number;
  bytesLocked: number;
  totalToRestore: number;
  progress: number;
  secondsRemaining: number | null;
  noteText: string;
  lastError: string | null;
  offline: boolean;
  consecutiveFailures: number;
  keyMessage: string | null;
  submitting: boolean;
  events: SimEvent[];
  lastSeq: number;
}

export function initialState(): UiState {
  return {
    phase: "unknown",
    filesLocked: 0,
    bytesLocked: 0,
    totalToRestore: 0,
    progress: 0,
    secondsRemaining: null,
    noteText: "",
    lastError: null,
    offline: false,
    consecutiveFailures: 0,
    keyMessage: null,
    submitting: false,
    events: [],
    lastSeq: 0,
  };
}

export function applyStatus(state: UiState, snap: StatusSnapshot): UiState {
  const next = { ...state };
  next.phase = snap.phase;
  next.filesLocked = snap.files_locked;
  next.bytesLocked = snap.bytes_locked;
  next.secondsRemaining = snap.seconds_remaining;
  next.noteText = snap.note_text;
  next.lastError = snap.last_error;
  next.offline = false;
  next.consecutiveFailures = 0;

  if (snap.phase === "locked") {
    // a fresh locked corpus (or a failed unlock) resets the run baseline
    next.totalToRestore = snap.files_locked;
    next.progress = 0;
  } else if (snap.phase === "decrypting" && next.totalToRestore > 0) {
    const done = next.totalToRestore - snap.files_locked;
    const fraction = Math.min(Math.max(done / next.totalToRestore, 0), 1);
    // progress is monotonic within a run
    next.progress = Math.max(state.progress, fraction);
  } else if (snap.phase === "restored") {
    next.progress = 1;
  }
  return next;
}

export function applyEvents(state: UiState, incoming: SimEvent[]): UiState {
  if (incoming.length === 0) return state;
  const ordered = [...incoming].sort((a, b) => a.seq - b.seq);
  const fresh = ordered.filter((e) => e.seq > state.lastSeq);
  if (fresh.length === 0) return state;
  const events = [...state.events, ...fresh].slice(-EVENT_FEED_LIMIT);
  return { ...state, events, lastSeq: events[events.length - 1].seq };
}

export function onPollFailure(state: UiState): UiState {
  const failures = state.consecutiveFailures + 1;
  return {
    ...state,
    consecutiveFailures: failures,
    offline: failures >= STALE_AFTER_FAILURES,
  };
}

/** Exponential backoff between polls while the service is unreachable. */
export function pollDelayMs(state: UiState): number {
  if (state.consecutiveFailures === 0) return BASE_POLL_MS;
  const exp = Math.min(state.consecutiveFailures - 1, 3);
  return Math.min(BASE_POLL_MS * 2 ** exp, MAX_BACKOFF_MS);
}

/** Local 1 Hz tick between polls; the countdown never goes negative. */
export function tickCountdown(state: UiState): UiState {
  if (state.secondsRemaining === null) return state;
  return {
    ...state,
    secondsRemaining: Math.max(0, state.secondsRemaining - 1),
  };
}

export function countdownDisplay(secondsRemaining: number | null): string {
  if (secondsRemaining === null) return "--:--:--";
  const s = Math.max(0, Math.floor(secondsRemaining));
  const hh = String(Math.floor(s / 3600)).padStart(2, "0");
  const mm = String(Math.floor((s % 3600) / 60)).padStart(2, "0");
  const ss = String(s % 60).padStart(2, "0");
  return `${hh}:${mm}:${ss}`;
}

export function deadlinePassed(state: UiState): boolean {
  return state.secondsRemaining !== null && state.secondsRemaining <= 0;
}

export type UnlockOutcome =
  | { kind: "accepted"; entries: number }
  | { kind: "malformed"; detail: string }
  | { kind: "wrong_key" }
  | { kind: "conflict"; phase: string }
  | { kind: "error"; detail: string };

export function beginSubmit(state: UiState): UiState {
  return { ...state, submitting: true, keyMessage: null };
}

/**
 * Apply an unlock outcome. Returns the new state plus whether the key
 * input field must be cleared (wrong key) — the view owns the field, the
 * state never holds the key text.
 */
export function applyUnlockOutcome(
  state: UiState,
  outcome: UnlockOutcome,
): { state: UiState; clearKeyInput: boolean } {
  const next = { ...state, submitting: false };
  switch (outcome.kind) {
    case "accepted":
      next.phase = "decrypting";
      next.totalToRestore = Math.max(outcome.entries, state.totalToRestore);
      next.keyMessage = null;
      return { state: next, clearKeyInput: false };
    case "malformed":
      next.keyMessage = "That does not look like a valid key (malformed PEM).";
      return { state: next, clearKeyInput: false };
    case "wrong_key":
      next.keyMessage = "Wrong key: it does not unlock this sandbox.";
      return { state: next, clearKeyInput: true };
    case "conflict":
      next.keyMessage = `Unlock not possible right now (phase: ${outcome.phase}).`;
      return { state: next, clearKeyInput: false };
    case "error":
      next.keyMessage = `Service error: ${outcome.detail}`;
      return { state: next, clearKeyInput: false };
  }
}

export function canSubmit(state: UiState): boolean {
  return state.phase === "locked" && !state.submitting && !state.offline;
}
