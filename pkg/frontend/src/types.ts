// Wire types for the inference service. Kept in sync with the backend via the
// recorded fixture in test/fixtures/chat_fig1.json.

export interface KbPayload {
  columns: string[];
  rows: Record<string, string>[];
}

export interface DecodeStep {
  token: string;
  input_attention: number[];
  memory_attention: number[];
}

export interface DecodeTrace {
  tokens: string[];
  input_tokens: string[];
  slot_names: string[];
  state_attention: number[][]; // m rows x n_in columns
  entry_probs: number[];       // one per KB row
  entry_labels: string[];
  steps: DecodeStep[];
}

export interface ChatReply {
  response: string;
  trace: DecodeTrace;
}

export interface SessionCreated {
  session_id: string;
}

export interface ChatMessage {
  role: "driver" | "car";
  text: string;
}
