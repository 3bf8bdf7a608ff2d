/** Browser bootstrap: wires DOM events to the session state machine and
 * repaints from the pure renderers.  All logic lives in the imported
 * modules; this file only moves data between them and the page. */
import { ApiError, ForecastClient } from "./client.js";
import { makeTransform, toCourt } from "./geometry.js";
import { renderPanel, renderScene, renderShotBars } from "./render.js";
import { SessionState } from "./state.js";
const client = new ForecastClient("");
function byId(id) {
    const node = document.getElementById(id);
    if (!node)
        throw new Error(`missing #${id}`);
    return node;
}
function demoPrefix(meta) {
    const { width, length } = meta.courtBounds;
    const serve = meta.serveTypes[0] ?? "short service";
    const rally = ["net shot", "lob", "clear", "drop", "smash"].filter((s) => meta.shotTypes.includes(s));
    const prefix = [];
    for (let t = 1; t <= 4; t++) {
        const lift = 0.4 * t;
        prefix.push({
            t,
            locationA: [width / 2 - 0.6, length * 0.25 + lift],
            locationB: [width / 2 + 0.6, length * 0.75 - lift],
            shotType: t === 1 ? serve : rally[(t - 2) % rally.length] ?? "net shot",
        });
    }
    return prefix;
}
function toast(message, isError = true) {
    const node = byId("toast");
    node.textContent = message;
    node.className = isError ? "toast error" : "toast";
    node.style.display = message ? "block" : "none";
}
async function boot() {
    let meta;
    try {
        meta = await client.meta();
    }
    catch (err) {
        if (err instanceof ApiError && err.status === 503) {
            toast("No checkpoint is loaded; start the server with a trained model.");
        }
        else {
            toast(`Cannot reach the forecast service: ${String(err)}`);
        }
        return;
    }
    const players = meta.players;
    const state = new SessionState(meta, players[0] ?? "playerA", players[1] ?? players[0] ?? "playerB", demoPrefix(meta), 42);
    wire(state);
    repaint(state);
}
function repaint(state) {
    const meta = state.meta;
    const steps = state.lastExchange?.response.steps ?? [];
    byId("scene").innerHTML = renderScene(meta, state.draft.prefix, steps);
    const stale = state.lastExchange !== null &&
        JSON.stringify(state.lastExchange.request.prefix) !== JSON.stringify(state.draft.prefix);
    byId("scene").classList.toggle("stale", stale);
    byId("bars").innerHTML = steps.map((s) => renderShotBars(s, meta.shotTypes)).join("");
    byId("horizon-value").textContent = String(state.draft.horizon);
    byId("horizon").value = String(state.draft.horizon);
    byId("seed").value =
        state.draft.seed === undefined ? "" : String(state.draft.seed);
    const issues = state.validate();
    byId("issues").innerHTML = issues
        .map((i) => `<li>${i.field}: ${i.message}</li>`)
        .join("");
    byId("forecast").disabled = issues.length > 0;
    byId("save-0").disabled = state.lastExchange === null;
    byId("save-1").disabled = state.lastExchange === null;
    renderStrokeEditors(state);
    renderComparison(state);
    const warnings = state.lastExchange?.response.warnings ?? [];
    byId("warnings").innerHTML = warnings
        .map((w) => `<li>${w}</li>`)
        .join("");
}
function renderStrokeEditors(state) {
    const meta = state.meta;
    const rows = state.draft.prefix.map((stroke, i) => {
        const choices = stroke.t === 1 ? meta.serveTypes : meta.shotTypes.filter((s) => !meta.serveTypes.includes(s));
        const options = choices
            .map((s) => `<option${s === stroke.shotType ? " selected" : ""}>${s}</option>`)
            .join("");
        return (`<label>stroke ${stroke.t}` +
            `<select data-stroke="${i}">${options}</select></label>`);
    });
    byId("strokes").innerHTML = rows.join("");
    for (const select of byId("strokes").querySelectorAll("select")) {
        select.addEventListener("change", () => {
            const issue = state.setShot(Number(select.dataset["stroke"]), select.value);
            if (issue)
                toast(issue.message);
            else
                toast("");
            repaint(state);
        });
    }
}
function renderComparison(state) {
    const html = state.slots
        .map((slot, i) => slot ? renderPanel(state.meta, slot, `Scenario ${i === 0 ? "A" : "B"}`) : "")
        .join("");
    byId("comparison").innerHTML = html;
}
function wire(state) {
    const scene = byId("scene");
    let drag = null;
    const courtPoint = (ev) => {
        const svg = scene.querySelector("svg");
        const rect = (svg ?? scene).getBoundingClientRect();
        const t = makeTransform(state.meta.courtBounds);
        return toCourt(t, ev.clientX - rect.left, ev.clientY - rect.top);
    };
    scene.addEventListener("pointerdown", (ev) => {
        const marker = ev.target.closest("[data-stroke][data-side]");
        if (!marker)
            return;
        drag = {
            stroke: Number(marker.getAttribute("data-stroke")),
            side: marker.getAttribute("data-side"),
        };
        scene.setPointerCapture(ev.pointerId);
        ev.preventDefault();
    });
    scene.addEventListener("pointermove", (ev) => {
        if (!drag)
            return;
        const [x, y] = courtPoint(ev);
        state.dragMarker(drag.stroke, drag.side, x, y);
        repaint(state);
    });
    const endDrag = (ev) => {
        if (drag && scene.hasPointerCapture(ev.pointerId)) {
            scene.releasePointerCapture(ev.pointerId);
        }
        drag = null;
    };
    scene.addEventListener("pointerup", endDrag);
    scene.addEventListener("pointercancel", endDrag);
    byId("horizon").addEventListener("input", (ev) => {
        state.setHorizon(Number(ev.target.value));
        repaint(state);
    });
    byId("seed").addEventListener("change", (ev) => {
        const raw = ev.target.value.trim();
        state.setSeed(raw === "" ? undefined : Number(raw));
        repaint(state);
    });
    byId("forecast").addEventListener("click", async () => {
        toast("");
        try {
            const exchange = await state.submit(client);
            if (exchange)
                repaint(state);
        }
        catch (err) {
            // Draft is preserved; only surface the message.
            toast(err instanceof ApiError ? `${err.status}: ${err.message}` : String(err));
        }
    });
    for (const slot of [0, 1]) {
        byId(`save-${slot}`).addEventListener("click", () => {
            try {
                state.saveScenario(slot);
                renderComparison(state);
            }
            catch (err) {
                toast(String(err));
            }
        });
    }
}
boot().catch((err) => toast(String(err)));
