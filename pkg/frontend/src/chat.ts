import { ApiRequestError } from "./api.js";
import type { ChatTurnPayload } from "./types.js";

export type TurnState = "pending" | "rendered" | "error";

// One entry per user submission, kept whatever the outcome: a failed turn
// flips to "error" with a retry affordance instead of disappearing.
export interface UiTurn {
  localId: number;
  message: string;
  state: TurnState;
  payload: ChatTurnPayload | null;
  error: string | null;
}

export interface ChatBackend {
  chat(sessionId: string | null, message: string): Promise<ChatTurnPayload>;
}

export interface KeyValueStorage {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const SESSION_KEY = "emagent.session";

export class ChatStore {
  readonly turns: UiTurn[] = [];
  private nextId = 0;
  private inFlight = false;
  private sessionId: string | null;
  private readonly listeners: Array<() => void> = [];

  constructor(
    private readonly backend: ChatBackend,
    private readonly storage: KeyValueStorage | null = null,
  ) {
    this.sessionId = storage?.getItem(SESSION_KEY) ?? null;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  get session(): string | null {
    return this.sessionId;
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  // Appends a pending turn immediately and resolves it in place. At most one
  // request is in flight; extra submissions while busy are refused.
  async submit(message: string): Promise<UiTurn | null> {
    const text = message.trim();
    if (!text || this.inFlight) return null;
    const turn: UiTurn = {
      localId: this.nextId++,
      message: text,
      state: "pending",
      payload: null,
      error: null,
    };
    this.turns.push(turn);
    this.notify();
    await this.resolve(turn);
    return turn;
  }

  // Re-sends the message of a failed turn; the entry keeps its position.
  async retry(localId: number): Promise<void> {
    const turn = this.turns.find((t) => t.localId === localId);
    if (!turn || turn.state !== "error" || this.inFlight) return;
    turn.state = "pending";
    turn.error = null;
    this.notify();
    await this.resolve(turn);
  }

  private async resolve(turn: UiTurn): Promise<void> {
    this.inFlight = true;
    try {
      const payload = await this.backend.chat(this.sessionId, turn.message);
      this.sessionId = payload.session_id;
      this.storage?.setItem(SESSION_KEY, payload.session_id);
      turn.payload = payload;
      turn.state = "rendered";
    } catch (err) {
      turn.state = "error";
      turn.error =
        err instanceof ApiRequestError ? err.message
        : err instanceof Error ? `network failure: ${err.message}`
        : "network failure";
    } finally {
      this.inFlight = false;
      this.notify();
    }
  }
}
