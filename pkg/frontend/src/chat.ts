/**
 * Chat session state. Pure data + transitions; rendering lives in render.ts
 * so the whole flow is testable without a browser.
 */

import { ApiError, Diagnostics, GragClient, UserProfile } from './api';

export type TurnStatus = 'pending' | 'answered' | 'error';

export interface ChatTurn {
  question: string;
  status: TurnStatus;
  answer: string;
  citations: string[];
  emptyContext: boolean;
  diagnostics: Diagnostics | null;
  context: string | null;
  error: { code: string; message: string; retryable: boolean } | null;
  timestamp: number;
}

export const COUNTRY_OPTIONS = ['IT', 'CH', 'other'] as const;

export class ChatSession {
  readonly turns: ChatTurn[] = [];
  inputDisabled = false;
  language = '';

  constructor(
    private readonly client: GragClient,
    readonly userId: string,
    private readonly now: () => number = Date.now,
  ) {}

  /** Ask the service; the returned turn is already appended to the session. */
  async sendQuestion(text: string): Promise<ChatTurn> {
    const question = text.trim();
    if (!question) {
      throw new Error('question must be nonempty');
    }
    const turn: ChatTurn = {
      question,
      status: 'pending',
      answer: '',
      citations: [],
      emptyContext: false,
      diagnostics: null,
      context: null,
      error: null,
      timestamp: this.now(),
    };
    this.turns.push(turn);
    this.inputDisabled = true;
    try {
      const res = await this.client.query({
        question,
        user_id: this.userId,
        language: this.language || undefined,
      });
      turn.status = 'answered';
      turn.answer = res.answer;
      turn.citations = res.citations;
      turn.emptyContext = res.empty_context;
      turn.diagnostics = res.diagnostics;
      turn.context = res.context ?? null;
    } catch (err) {
      turn.status = 'error';
      if (err instanceof ApiError) {
        turn.error = { code: err.code, message: err.message, retryable: err.retryable };
      } else {
        turn.error = { code: 'client_error', message: String(err), retryable: false };
      }
    } finally {
      this.inputDisabled = false;
    }
    return turn;
  }

  /** Re-ask the question of a failed turn, replacing it in place. */
  async retry(index: number): Promise<ChatTurn> {
    const failed = this.turns[index];
    if (!failed || failed.status !== 'error') {
      throw new Error(`turn ${index} is not an error turn`);
    }
    this.turns.splice(index, 1);
    return this.sendQuestion(failed.question);
  }

  async loadProfile(): Promise<UserProfile | null> {
    try {
      const profile = await this.client.getProfile(this.userId);
      this.language = profile.language;
      return profile;
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        return null; // new user, nothing stored yet
      }
      throw err;
    }
  }

  async saveProfile(profile: UserProfile): Promise<void> {
    if (!profile.language.trim()) {
      throw new Error('language must not be empty');
    }
    await this.client.saveProfile(this.userId, profile);
    this.language = profile.language;
  }
}
