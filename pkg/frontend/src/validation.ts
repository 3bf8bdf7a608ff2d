/** Client-side draft validation mirroring the server's 400 rules, so
 * violations surface inline without a round-trip. */

import type { CourtBounds, ForecastRequest, Meta, ValidationIssue } from "./types.js";

export const MIN_PREFIX = 2;
export const MAX_PREFIX = 35;
export const MIN_HORIZON = 1;
export const MAX_HORIZON = 5; // slider range; the server itself allows more

export function clampToCourt(
  x: number,
  y: number,
  bounds: CourtBounds,
): [number, number] {
  const cx = Math.min(Math.max(x, 0), bounds.width);
  const cy = Math.min(Math.max(y, 0), bounds.length);
  return [cx, cy];
}

export function clampHorizon(h: number): number {
  return Math.min(Math.max(Math.round(h), MIN_HORIZON), MAX_HORIZON);
}

/** True for entries of meta.shotTypes only; movement labels such as
 * "defend" or "return" are edges, not strokes, and must be rejected. */
export function isShotType(meta: Meta, shot: string): boolean {
  return meta.shotTypes.includes(shot);
}

export function isServeType(meta: Meta, shot: string): boolean {
  return meta.serveTypes.includes(shot);
}

function pushIssue(issues: ValidationIssue[], field: string, message: string): void {
  issues.push({ field, message });
}

export function validateDraft(draft: ForecastRequest, meta: Meta): ValidationIssue[] {
  const issues: ValidationIssue[] = [];
  if (!draft.playerA) pushIssue(issues, "playerA", "player A is required");
  if (!draft.playerB) pushIssue(issues, "playerB", "player B is required");

  const n = draft.prefix.length;
  if (n < MIN_PREFIX || n > MAX_PREFIX) {
    pushIssue(issues, "prefix", `prefix must have ${MIN_PREFIX}..${MAX_PREFIX} strokes, has ${n}`);
  }
  draft.prefix.forEach((stroke, i) => {
    const where = `prefix[${i}]`;
    if (stroke.t !== i + 1) {
      pushIssue(issues, `${where}.t`, `stroke ${i + 1} is numbered ${stroke.t}; strokes must alternate 1..${n}`);
    }
    if (!isShotType(meta, stroke.shotType)) {
      pushIssue(issues, `${where}.shotType`, `"${stroke.shotType}" is not a shot type`);
    } else if (stroke.t === 1 && !isServeType(meta, stroke.shotType)) {
      pushIssue(issues, `${where}.shotType`, "stroke 1 must be a serve");
    } else if (stroke.t > 1 && isServeType(meta, stroke.shotType)) {
      pushIssue(issues, `${where}.shotType`, `stroke ${stroke.t} cannot be a serve`);
    }
    for (const [who, loc] of [["locationA", stroke.locationA], ["locationB", stroke.locationB]] as const) {
      const [x, y] = loc;
      if (!Number.isFinite(x) || !Number.isFinite(y)) {
        pushIssue(issues, `${where}.${who}`, "location must be two finite numbers");
      } else if (x < 0 || x > meta.courtBounds.width || y < 0 || y > meta.courtBounds.length) {
        pushIssue(issues, `${where}.${who}`, "location is outside the court");
      }
    }
  });

  if (!Number.isInteger(draft.horizon) || draft.horizon < MIN_HORIZON || draft.horizon > MAX_HORIZON) {
    pushIssue(issues, "horizon", `horizon must be ${MIN_HORIZON}..${MAX_HORIZON}`);
  }
  if (!Number.isInteger(draft.nSamples) || draft.nSamples < 1) {
    pushIssue(issues, "nSamples", "nSamples must be a positive integer");
  }
  if (draft.seed !== undefined && !Number.isInteger(draft.seed)) {
    pushIssue(issues, "seed", "seed must be an integer");
  }
  return issues;
}
