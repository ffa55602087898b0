// Thin fetch client for the inference service.

import type { ChatReply, KbPayload, SessionCreated } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function post<T>(base: string, path: string, payload: unknown): Promise<T> {
  let response: Response;
  try {
    response = await fetch(base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  } catch (err) {
    throw new ApiError(0, `service unreachable: ${String(err)}`);
  }
  const data = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(response.status, (data as { error?: string }).error ?? response.statusText);
  }
  return data as T;
}

export async function createSession(base: string, kb: KbPayload): Promise<string> {
  const created = await post<SessionCreated>(base, "/session", { kb });
  return created.session_id;
}

export async function sendChat(base: string, sessionId: string,
                               utterance: string): Promise<ChatReply> {
  return post<ChatReply>(base, "/chat", { session_id: sessionId, utterance });
}

export async function health(base: string): Promise<boolean> {
  try {
    const response = await fetch(base + "/health");
    return response.ok;
  } catch {
    return false;
  }
}
