/** End-to-end UI contract against a replay of the real service:
 * load metadata, render a 4-stroke prefix, drag the defender and
 * re-forecast, check the probability bars, and reproduce a saved
 * scenario byte-for-byte (vector markup, hence pixel-identical). */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ApiError, ForecastClient } from "../src/client.js";
import { renderPanel, renderScene, renderShotBars } from "../src/render.js";
import { SessionState } from "../src/state.js";
import type { Exchange } from "../src/types.js";
import { loadFixtures, startFixtureServer, type FixtureServer } from "./helpers.js";

const fixtures = loadFixtures();

let server: FixtureServer;
let client: ForecastClient;

beforeAll(async () => {
  server = await startFixtureServer(fixtures);
  client = new ForecastClient(server.baseUrl);
});

afterAll(async () => {
  await server.close();
});

describe("court explorer against the fixture service", () => {
  let state: SessionState;
  let baseScene: string;
  let draggedExchange: Exchange;

  it("boots from live metadata", async () => {
    const health = await client.health();
    expect(health.checkpointLoaded).toBe(true);

    const meta = await client.meta();
    expect(meta.shotTypes).toHaveLength(10);
    expect(meta.courtBounds).toEqual({ width: 6.1, length: 13.4 });
    expect([...meta.players].sort()).toEqual(meta.players);

    const req = fixtures.forecasts[0]!.request;
    state = new SessionState(meta, req.playerA, req.playerB, req.prefix, req.seed);
    state.draft.horizon = req.horizon;
    state.draft.nSamples = req.nSamples;
    expect(state.canSubmit).toBe(true);
  });

  it("renders the 4-stroke prefix before any forecast", () => {
    const scene = renderScene(state.meta, state.draft.prefix, []);
    expect((scene.match(/class="marker marker-/g) ?? []).length).toBe(8);
    expect(scene).toContain(">4</text>");
    expect(scene).not.toContain("step-overlay");
  });

  it("forecasts and renders bars that sum to 1", async () => {
    const exchange = await state.submit(client);
    expect(exchange).not.toBeNull();
    expect(exchange!.response.steps).toHaveLength(3);

    baseScene = renderScene(state.meta, state.draft.prefix, exchange!.response.steps);
    expect((baseScene.match(/class="step-overlay"/g) ?? []).length).toBe(3);

    for (const step of exchange!.response.steps) {
      const bars = renderShotBars(step, state.meta.shotTypes);
      const probs = [...bars.matchAll(/data-probability="([0-9.]+)"/g)].map((m) =>
        Number(m[1]),
      );
      const sum = probs.reduce((acc, p) => acc + p, 0);
      expect(Math.abs(sum - 1)).toBeLessThanOrEqual(10 * 0.0005);
    }
  });

  it("the horizon slider trims the overlay to that many steps", async () => {
    state.setHorizon(1);
    const exchange = await state.submit(client);
    expect(exchange!.response.steps).toHaveLength(1);
    const scene = renderScene(state.meta, state.draft.prefix, exchange!.response.steps);
    expect((scene.match(/class="step-overlay"/g) ?? []).length).toBe(1);
    state.setHorizon(3);
  });

  it("dragging the defender off-court clamps and re-forecasts", async () => {
    // Stroke 4 is hit by player B, so player A is the defender.
    state.dragMarker(3, "a", 7.0, 12.0);
    expect(state.draft.prefix[3]!.locationA).toEqual([6.1, 12.0]);
    expect(state.canSubmit).toBe(true);

    const exchange = await state.submit(client);
    expect(exchange).not.toBeNull();
    draggedExchange = exchange!;

    const scene = renderScene(state.meta, state.draft.prefix, exchange!.response.steps);
    expect(scene).not.toBe(baseScene);
  });

  it("replaying a saved scenario reproduces identical markup", async () => {
    state.saveScenario(0);
    const savedPanel = renderPanel(state.meta, state.slots[0]!, "Scenario A");
    expect(renderPanel(state.meta, state.slots[0]!, "Scenario A")).toBe(savedPanel);

    // Same draft, same seed, fresh round-trip through the service.
    const replay = await state.submit(client);
    expect(replay!.response).toEqual(draggedExchange.response);
    const replayPanel = renderPanel(
      state.meta,
      { request: replay!.request, response: replay!.response },
      "Scenario A",
    );
    expect(replayPanel).toBe(savedPanel);
  });

  it("keeps both comparison slots independently", async () => {
    state.saveScenario(1);
    expect(state.slots[0]).not.toBeNull();
    expect(state.slots[1]).not.toBeNull();
    expect(state.slots[1]).not.toBe(state.slots[0]);
    const a = renderPanel(state.meta, state.slots[0]!, "Scenario A");
    const b = renderPanel(state.meta, state.slots[1]!, "Scenario B");
    expect(a).toContain("Scenario A");
    expect(b).toContain("Scenario B");
  });

  it("surfaces server-side 400s with field details and keeps the draft", async () => {
    const before = JSON.stringify(state.draft);
    state.draft.nSamples = 77; // valid client-side, but not a recorded fixture
    await expect(state.submit(client)).rejects.toMatchObject({ status: 400 });
    try {
      await state.submit(client);
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).fields).toHaveProperty("body");
    }
    state.draft.nSamples = 5;
    expect(JSON.stringify(state.draft)).toBe(before);
  });

  it("client-side validation blocks bad edits without any request", () => {
    expect(state.setShot(2, "Defend")).not.toBeNull();
    expect(state.canSubmit).toBe(true); // the draft never absorbed the bad label
  });
});
