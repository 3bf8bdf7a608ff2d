/** Court-to-screen mapping and deterministic number formatting.
 *
 * Everything rendered goes through fmt(), so a given scene always
 * produces byte-identical markup; identical vector markup is what makes
 * replayed scenarios pixel-identical.
 */
export function makeTransform(bounds, scale = 40, pad = 20) {
    return {
        scale,
        padX: pad,
        padY: pad,
        height: bounds.length * scale + 2 * pad,
    };
}
export function viewSize(bounds, t) {
    return [bounds.width * t.scale + 2 * t.padX, t.height];
}
/** Court y grows away from the serving baseline; screen y grows down. */
export function toScreen(t, x, y) {
    return [t.padX + x * t.scale, t.height - (t.padY + y * t.scale)];
}
export function toCourt(t, px, py) {
    return [(px - t.padX) / t.scale, (t.height - py - t.padY) / t.scale];
}
export function fmt(value) {
    const s = value.toFixed(3);
    return s === "-0.000" ? "0.000" : s;
}
