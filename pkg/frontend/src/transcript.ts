// Chat transcript state: ordered question/answer entries with a single
// pending slot. Entries freeze once answered.

import type { AnswerPayload } from "./types.js";

export interface TranscriptEntry {
  readonly id: number;
  readonly question: string;
  readonly answer: AnswerPayload | null;
  readonly error: string | null;
  readonly askedAt: number;
}

export class PendingQuestionError extends Error {
  constructor() {
    super("a question is already pending; wait for its answer");
  }
}

interface MutableEntry {
  id: number;
  question: string;
  answer: AnswerPayload | null;
  error: string | null;
  askedAt: number;
}

export type Asker = (question: string) => Promise<AnswerPayload>;

export class Transcript {
  private readonly asker: Asker;
  private readonly clock: () => number;
  private readonly items: MutableEntry[] = [];
  private nextId = 1;

  constructor(asker: Asker, clock: () => number = Date.now) {
    this.asker = asker;
    this.clock = clock;
  }

  get entries(): readonly TranscriptEntry[] {
    return this.items.map((entry) =>
      entry.answer !== null ? Object.freeze({ ...entry }) : { ...entry });
  }

  get pending(): boolean {
    const last = this.items[this.items.length - 1];
    return last !== undefined && last.answer === null && last.error === null;
  }

  async submit(question: string): Promise<TranscriptEntry> {
    if (this.pending) throw new PendingQuestionError();
    const entry: MutableEntry = {
      id: this.nextId++,
      question,
      answer: null,
      error: null,
      askedAt: this.clock(),
    };
    this.items.push(entry);
    return this.resolve(entry);
  }

  /** Re-send a failed entry's question; answered entries are immutable. */
  async retry(id: number): Promise<TranscriptEntry> {
    if (this.pending) throw new PendingQuestionError();
    const entry = this.items.find((item) => item.id === id);
    if (!entry) throw new Error(`no transcript entry ${id}`);
    if (entry.answer !== null) throw new Error("entry already answered");
    entry.error = null;
    return this.resolve(entry);
  }

  /** Clarification flow: resubmit the chosen refinement as a new question. */
  async chooseRefinement(id: number, option: string): Promise<TranscriptEntry> {
    const entry = this.items.find((item) => item.id === id);
    if (!entry || entry.answer === null || entry.answer.kind !== "clarification") {
      throw new Error("entry is not an answered clarification");
    }
    if (!entry.answer.options.includes(option)) {
      throw new Error("refinement is not one of the offered options");
    }
    return this.submit(option);
  }

  private async resolve(entry: MutableEntry): Promise<TranscriptEntry> {
    try {
      entry.answer = await this.asker(entry.question);
    } catch (failure) {
      entry.error = failure instanceof Error ? failure.message : String(failure);
    }
    return Object.freeze({ ...entry });
  }
}
