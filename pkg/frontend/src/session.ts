// Study session state machine: ten instructed emotions in a fixed order,
// one rating record per step, strictly forward progress.

import type { RatingRecord } from "./api";

export const STUDY_EMOTIONS = [
  "neutral",
  "delighted",
  "happy",
  "miserable",
  "sad",
  "surprised",
  "angry",
  "afraid",
  "disgusted",
  "contemptuous",
] as const;

export type StudyEmotion = (typeof STUDY_EMOTIONS)[number];

export class StudySession {
  readonly sessionId: string;
  private index = 0;
  private submitted: RatingRecord[] = [];

  constructor(sessionId?: string) {
    this.sessionId =
      sessionId ?? `study-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 8)}`;
  }

  get stepCount(): number {
    return STUDY_EMOTIONS.length;
  }

  get stepIndex(): number {
    return this.index;
  }

  get complete(): boolean {
    return this.index >= STUDY_EMOTIONS.length;
  }

  get currentEmotion(): StudyEmotion | null {
    return this.complete ? null : STUDY_EMOTIONS[this.index];
  }

  get records(): readonly RatingRecord[] {
    return this.submitted;
  }

  /** Attach the session id and current instruction to a partial record. */
  buildRecord(
    partial: Omit<RatingRecord, "session_id" | "instructed_emotion">,
  ): RatingRecord {
    if (this.complete) throw new Error("session already complete");
    return {
      ...partial,
      session_id: this.sessionId,
      instructed_emotion: STUDY_EMOTIONS[this.index],
    };
  }

  /** Record the current step's submission and advance. Each step can be
   * submitted exactly once. */
  submitStep(record: RatingRecord): void {
    if (this.complete) throw new Error("session already complete");
    if (record.instructed_emotion !== STUDY_EMOTIONS[this.index]) {
      throw new Error(
        `record is for ${record.instructed_emotion}, current step is ${STUDY_EMOTIONS[this.index]}`,
      );
    }
    if (this.submitted.length !== this.index) {
      throw new Error("step already submitted");
    }
    this.submitted.push(record);
    this.index += 1;
  }
}
