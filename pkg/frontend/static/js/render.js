/** Pure SVG/HTML string rendering for the court scene and forecast
 * overlays.  No DOM access and no randomness: the same inputs always
 * yield byte-identical markup, which is what the scenario-replay
 * guarantee rests on. */
import { covarianceEllipse } from "./ellipse.js";
import { fmt, makeTransform, toScreen, viewSize } from "./geometry.js";
// Side colors follow serving convention: player A serves stroke 1.
export const SIDE_COLORS = { a: "#c0392b", b: "#2b5fc0" };
export const MARKER_RADIUS = 9;
export function escapeXml(s) {
    return s
        .replace(/&/g, "&amp;")
        .replace(/</g, "&lt;")
        .replace(/>/g, "&gt;")
        .replace(/"/g, "&quot;");
}
function el(tag, attrs, body = "") {
    const parts = Object.entries(attrs).map(([k, v]) => `${k}="${v}"`);
    const head = parts.length ? `${tag} ${parts.join(" ")}` : tag;
    return body ? `<${head}>${body}</${tag}>` : `<${head}/>`;
}
function line(t, x1, y1, x2, y2, cls) {
    const [ax, ay] = toScreen(t, x1, y1);
    const [bx, by] = toScreen(t, x2, y2);
    return el("line", {
        x1: fmt(ax), y1: fmt(ay), x2: fmt(bx), y2: fmt(by), class: cls,
    });
}
export function renderCourt(meta, t) {
    const { width, length } = meta.courtBounds;
    const net = length / 2;
    const service = 1.98; // short service line distance from the net
    const [x0, y0] = toScreen(t, 0, length);
    const parts = [
        el("rect", {
            x: fmt(x0), y: fmt(y0),
            width: fmt(width * t.scale), height: fmt(length * t.scale),
            class: "court-floor",
        }),
        line(t, 0, 0, width, 0, "court-line"),
        line(t, 0, length, width, length, "court-line"),
        line(t, 0, 0, 0, length, "court-line"),
        line(t, width, 0, width, length, "court-line"),
        line(t, 0, net, width, net, "court-net"),
        line(t, 0, net - service, width, net - service, "court-line"),
        line(t, 0, net + service, width, net + service, "court-line"),
        line(t, width / 2, 0, width / 2, net - service, "court-line"),
        line(t, width / 2, net + service, width / 2, length, "court-line"),
    ];
    return el("g", { class: "court" }, parts.join(""));
}
/** Time-numbered, side-colored markers for the prefix; data attributes
 * make each marker a drag handle for the controller. */
export function renderMarkers(prefix, t) {
    const parts = [];
    for (const [side, key] of [["a", "locationA"], ["b", "locationB"]]) {
        for (let i = 0; i < prefix.length; i++) {
            const stroke = prefix[i];
            const [px, py] = toScreen(t, stroke[key][0], stroke[key][1]);
            parts.push(el("g", {
                class: `marker marker-${side}`,
                "data-stroke": String(i),
                "data-side": side,
            }, [
                el("circle", {
                    cx: fmt(px), cy: fmt(py), r: String(MARKER_RADIUS),
                    fill: SIDE_COLORS[side],
                }),
                el("text", {
                    x: fmt(px), y: fmt(py), class: "marker-label",
                }, String(stroke.t)),
            ].join("")));
        }
    }
    return el("g", { class: "markers" }, parts.join(""));
}
function screenGaussian(g, t) {
    const [mx, my] = toScreen(t, g.muX, g.muY);
    // The y axis flips on screen, which negates the correlation.
    return { muX: mx, muY: my, sigmaX: g.sigmaX * t.scale, sigmaY: g.sigmaY * t.scale, rho: -g.rho };
}
function renderEllipses(g, t, color) {
    const s = screenGaussian(g, t);
    const parts = [];
    for (const k of [1, 2]) {
        const e = covarianceEllipse(s, k);
        parts.push(el("ellipse", {
            cx: fmt(e.cx), cy: fmt(e.cy), rx: fmt(e.rx), ry: fmt(e.ry),
            transform: `rotate(${fmt(e.angleDeg)} ${fmt(e.cx)} ${fmt(e.cy)})`,
            class: `sigma-${k}`,
            stroke: color,
        }));
    }
    parts.push(el("circle", {
        cx: fmt(s.muX), cy: fmt(s.muY), r: "3", fill: color, class: "mean-dot",
    }));
    return parts.join("");
}
export function renderStepOverlay(step, t, index) {
    const opacity = Math.max(0.85 - 0.15 * index, 0.25);
    const parts = [
        renderEllipses(step.gaussians.playerA, t, SIDE_COLORS.a),
        renderEllipses(step.gaussians.playerB, t, SIDE_COLORS.b),
    ];
    for (const sample of step.samples) {
        for (const [key, color] of [["playerA", SIDE_COLORS.a], ["playerB", SIDE_COLORS.b]]) {
            const [sx, sy] = toScreen(t, sample[key][0], sample[key][1]);
            parts.push(el("circle", {
                cx: fmt(sx), cy: fmt(sy), r: "2.5", fill: color, class: "sample-dot",
            }));
        }
    }
    return el("g", {
        class: "step-overlay",
        "data-step": String(step.k),
        opacity: fmt(opacity),
    }, parts.join(""));
}
export function renderScene(meta, prefix, steps, scale = 40) {
    const t = makeTransform(meta.courtBounds, scale);
    const [w, h] = viewSize(meta.courtBounds, t);
    const body = [
        renderCourt(meta, t),
        steps.map((s, i) => renderStepOverlay(s, t, i)).join(""),
        renderMarkers(prefix, t),
    ].join("");
    return el("svg", {
        xmlns: "http://www.w3.org/2000/svg",
        viewBox: `0 0 ${fmt(w)} ${fmt(h)}`,
        width: fmt(w), height: fmt(h),
        class: "court-scene",
    }, body);
}
export const BAR_WIDTH = 150;
/** Horizontal probability bars for one step, one row per shot type.
 * Bar lengths are proportional to probability, so each set sums to the
 * full BAR_WIDTH within display rounding. */
export function renderShotBars(step, shotTypes) {
    const rowH = 16;
    const labelW = 110;
    const rows = [];
    step.shotDistribution.forEach((p, i) => {
        const y = i * rowH;
        const name = shotTypes[i] ?? `class ${i}`;
        const chosen = name === step.chosenShot;
        rows.push(el("g", { class: chosen ? "bar-row chosen" : "bar-row" }, [
            el("text", { x: fmt(labelW - 6), y: fmt(y + 12), class: "bar-label" }, escapeXml(name)),
            el("rect", {
                x: fmt(labelW), y: fmt(y + 3),
                width: fmt(p * BAR_WIDTH), height: fmt(rowH - 6),
                class: "bar-fill",
                "data-probability": fmt(p),
            }),
            el("text", {
                x: fmt(labelW + p * BAR_WIDTH + 4), y: fmt(y + 12), class: "bar-pct",
            }, `${(p * 100).toFixed(1)}%`),
        ].join("")));
    });
    const h = shotTypes.length * rowH + 20;
    return el("svg", {
        xmlns: "http://www.w3.org/2000/svg",
        viewBox: `0 0 ${labelW + BAR_WIDTH + 60} ${h}`,
        width: String(labelW + BAR_WIDTH + 60), height: String(h),
        class: "shot-bars",
        "data-step": String(step.k),
    }, [
        el("text", { x: "0", y: fmt(shotTypes.length * rowH + 14), class: "bar-title" }, `step ${step.k}: ${escapeXml(step.chosenShot)}`),
        rows.join(""),
    ].join(""));
}
/** One saved or live scenario: the court scene plus per-step bars. */
export function renderPanel(meta, exchange, title) {
    const scene = renderScene(meta, exchange.request.prefix, exchange.response.steps);
    const bars = exchange.response.steps
        .map((s) => renderShotBars(s, meta.shotTypes))
        .join("");
    return [
        `<div class="panel">`,
        `<h3>${escapeXml(title)} <span class="seed-tag">seed ${exchange.response.seed}</span></h3>`,
        `<div class="panel-body">${scene}<div class="bars">${bars}</div></div>`,
        `</div>`,
    ].join("");
}
