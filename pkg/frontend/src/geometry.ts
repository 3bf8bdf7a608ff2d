/** Court-to-screen mapping and deterministic number formatting.
 *
 * Everything rendered goes through fmt(), so a given scene always
 * produces byte-identical markup; identical vector markup is what makes
 * replayed scenarios pixel-identical.
 */

import type { CourtBounds } from "./types.js";

export interface Transform {
  scale: number; // pixels per meter, uniform in x and y
  padX: number;
  padY: number;
  height: number; // total pixel height, for the y flip
}

export function makeTransform(bounds: CourtBounds, scale = 40, pad = 20): Transform {
  return {
    scale,
    padX: pad,
    padY: pad,
    height: bounds.length * scale + 2 * pad,
  };
}

export function viewSize(bounds: CourtBounds, t: Transform): [number, number] {
  return [bounds.width * t.scale + 2 * t.padX, t.height];
}

/** Court y grows away from the serving baseline; screen y grows down. */
export function toScreen(t: Transform, x: number, y: number): [number, number] {
  return [t.padX + x * t.scale, t.height - (t.padY + y * t.scale)];
}

export function toCourt(t: Transform, px: number, py: number): [number, number] {
  return [(px - t.padX) / t.scale, (t.height - py - t.padY) / t.scale];
}

export function fmt(value: number): string {
  const s = value.toFixed(3);
  return s === "-0.000" ? "0.000" : s;
}
