/** Session state: the editable request draft, the last completed
 * exchange, and up to two saved scenarios for side-by-side comparison.
 *
 * Requests never overlap: each edit or submit advances a generation
 * counter, and a response is applied only if it is still the newest
 * generation when it arrives.  A superseded response is dropped.
 */

import type { ForecastClient } from "./client.js";
import type {
  Exchange,
  ForecastRequest,
  Meta,
  Side,
  StrokeInput,
  ValidationIssue,
} from "./types.js";
import { clampHorizon, clampToCourt, isShotType, validateDraft } from "./validation.js";

export const COMPARISON_SLOTS = 2;

function deepCopy<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

export class SessionState {
  draft: ForecastRequest;
  lastExchange: Exchange | null = null;
  slots: Array<Exchange | null> = [null, null];
  private generation = 0;
  private pendingGeneration: number | null = null;

  constructor(
    readonly meta: Meta,
    playerA: string,
    playerB: string,
    prefix: StrokeInput[],
    seed?: number,
  ) {
    this.draft = {
      playerA,
      playerB,
      prefix: deepCopy(prefix),
      horizon: 3,
      nSamples: 10,
      ...(seed !== undefined ? { seed } : {}),
    };
  }

  get inFlight(): boolean {
    return this.pendingGeneration !== null;
  }

  validate(): ValidationIssue[] {
    return validateDraft(this.draft, this.meta);
  }

  get canSubmit(): boolean {
    return this.validate().length === 0;
  }

  private edited(): void {
    this.generation += 1;
  }

  /** Move one marker; the position clamps to the court bounds. */
  dragMarker(strokeIndex: number, side: Side, x: number, y: number): void {
    const stroke = this.draft.prefix[strokeIndex];
    if (!stroke) return;
    const clamped = clampToCourt(x, y, this.meta.courtBounds);
    if (side === "a") stroke.locationA = clamped;
    else stroke.locationB = clamped;
    this.edited();
  }

  /** Returns null on success, or the inline issue for a rejected label
   * (movement labels and other non-shot strings never enter the draft). */
  setShot(strokeIndex: number, shot: string): ValidationIssue | null {
    const stroke = this.draft.prefix[strokeIndex];
    if (!stroke) return { field: `prefix[${strokeIndex}]`, message: "no such stroke" };
    if (!isShotType(this.meta, shot)) {
      return {
        field: `prefix[${strokeIndex}].shotType`,
        message: `"${shot}" is not a shot type`,
      };
    }
    stroke.shotType = shot;
    this.edited();
    return null;
  }

  setHorizon(h: number): void {
    this.draft.horizon = clampHorizon(h);
    this.edited();
  }

  setSeed(seed: number | undefined): void {
    if (seed === undefined) delete this.draft.seed;
    else this.draft.seed = seed;
    this.edited();
  }

  /** Post the draft; resolves to the exchange, or null if superseded. */
  async submit(client: ForecastClient): Promise<Exchange | null> {
    const issues = this.validate();
    if (issues.length > 0) {
      throw new Error(issues.map((i) => `${i.field}: ${i.message}`).join("; "));
    }
    this.generation += 1;
    const mine = this.generation;
    this.pendingGeneration = mine;
    const request = deepCopy(this.draft);
    try {
      const response = await client.forecast(request);
      if (this.generation !== mine) return null; // superseded
      const exchange: Exchange = { request, response };
      this.lastExchange = exchange;
      // The server echoes the seed it used; keep it so the next submit
      // replays the same rollouts unless the user changes it.
      this.draft.seed = response.seed;
      return exchange;
    } finally {
      if (this.pendingGeneration === mine) this.pendingGeneration = null;
    }
  }

  saveScenario(slot: number): Exchange {
    if (!this.lastExchange) throw new Error("nothing to save: run a forecast first");
    if (!Number.isInteger(slot) || slot < 0 || slot >= COMPARISON_SLOTS) {
      throw new Error(`slot must be 0..${COMPARISON_SLOTS - 1}`);
    }
    const copy = deepCopy(this.lastExchange);
    this.slots[slot] = copy;
    return copy;
  }

  clearScenario(slot: number): void {
    if (slot >= 0 && slot < COMPARISON_SLOTS) this.slots[slot] = null;
  }

  /** Load a saved scenario back into the draft for further editing. */
  restoreScenario(slot: number): void {
    const saved = this.slots[slot];
    if (!saved) throw new Error(`slot ${slot} is empty`);
    this.draft = deepCopy(saved.request);
    this.lastExchange = deepCopy(saved);
    this.edited();
  }
}
