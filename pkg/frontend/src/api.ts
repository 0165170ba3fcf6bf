/**
 * Thin typed client for the control service. The unlock body is plain
 * text (the pasted PEM); everything else is JSON. The key text passes
 * straight through to fetch and is never logged or stored.
 */

import type { SimEvent, StatusSnapshot, UnlockOutcome } from "./state.js";

export async function fetchStatus(base = ""): Promise<StatusSnapshot> {
  const resp = await fetch(`${base}/api/status`);
  if (!resp.ok) throw new Error(`status ${resp.status}`);
  return (await resp.json()) as StatusSnapshot;
}

export interface NotePayload {
  note_text: string;
  deadline: number | null;
  seconds_remaining: number | null;
}

export async function fetchNote(base = ""): Promise<NotePayload> {
  const resp = await fetch(`${base}/api/note`);
  if (!resp.ok) throw new Error(`status ${resp.status}`);
  return (await resp.json()) as NotePayload;
}

export async function fetchEvents(
  since: number,
  base = "",
): Promise<SimEvent[]> {
  const resp = await fetch(`${base}/api/events?since=${since}`);
  if (!resp.ok) throw new Error(`status ${resp.status}`);
  const body = (await resp.json()) as { events: SimEvent[] };
  return body.events;
}

export async function submitKey(
  pemText: string,
  base = "",
): Promise<UnlockOutcome> {
  let resp: Response;
  try {
    resp = await fetch(`${base}/api/unlock`, {
      method: "POST",
      headers: { "content-type": "text/plain" },
      body: pemText,
    });
  } catch (err) {
    return { kind: "error", detail: `service unreachable (${err})` };
  }
  if (resp.status === 202) {
    const body = (await resp.json()) as { entries: number };
    return { kind: "accepted", entries: body.entries };
  }
  if (resp.status === 400) {
    const body = (await resp.json()) as { detail?: string };
    return { kind: "malformed", detail: body.detail ?? "malformed key" };
  }
  if (resp.status === 403) {
    return { kind: "wrong_key" };
  }
  if (resp.status === 409) {
    const body = (await resp.json()) as { phase?: string };
    return { kind: "conflict", phase: body.phase ?? "unknown" };
  }
  return { kind: "error", detail: `unexpected status ${resp.status}` };
}
