/** Shared test plumbing: fixture loading and a replay server.
 *
 * The fixture file is recorded from the real forecast service by
 * scripts/capture_fixtures.py; tests never compute forecasts
 * themselves.  The replay server matches POST bodies by canonical JSON
 * and answers with the recorded response, so every rendering assertion
 * runs against genuine service output.
 */

import { readFileSync } from "node:fs";
import { createServer, type Server } from "node:http";
import type { AddressInfo } from "node:net";
import type { ForecastRequest, ForecastResponse, Meta } from "../src/types.js";

export interface Fixtures {
  meta: Meta;
  forecasts: Array<{ request: ForecastRequest; response: ForecastResponse }>;
}

export function loadFixtures(): Fixtures {
  const url = new URL("./fixtures/fixtures.json", import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as Fixtures;
}

/** JSON.stringify with recursively sorted keys, for body matching. */
export function canonical(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(canonical).join(",")}]`;
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .filter(([, v]) => v !== undefined)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => `${JSON.stringify(k)}:${canonical(v)}`);
    return `{${entries.join(",")}}`;
  }
  return JSON.stringify(value);
}

export interface FixtureServer {
  baseUrl: string;
  close(): Promise<void>;
}

export async function startFixtureServer(fixtures: Fixtures): Promise<FixtureServer> {
  const byBody = new Map<string, ForecastResponse>();
  for (const pair of fixtures.forecasts) {
    byBody.set(canonical(pair.request), pair.response);
  }

  const server: Server = createServer((req, res) => {
    const send = (status: number, body: unknown) => {
      const payload = JSON.stringify(body);
      res.writeHead(status, { "Content-Type": "application/json" });
      res.end(payload);
    };
    if (req.method === "GET" && req.url === "/v1/health") {
      send(200, { status: "ok", checkpointLoaded: true });
      return;
    }
    if (req.method === "GET" && req.url === "/v1/meta") {
      send(200, fixtures.meta);
      return;
    }
    if (req.method === "POST" && req.url === "/v1/forecast") {
      const chunks: Buffer[] = [];
      req.on("data", (chunk: Buffer) => chunks.push(chunk));
      req.on("end", () => {
        const raw = Buffer.concat(chunks).toString("utf-8");
        let key: string;
        try {
          key = canonical(JSON.parse(raw));
        } catch {
          send(400, { error: "validation", fields: { body: "not valid JSON" } });
          return;
        }
        const recorded = byBody.get(key);
        if (recorded) send(200, recorded);
        else send(400, { error: "validation", fields: { body: `no fixture for request: ${raw}` } });
      });
      return;
    }
    send(404, { error: "not found" });
  });

  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const { port } = server.address() as AddressInfo;
  return {
    baseUrl: `http://127.0.0.1:${port}`,
    close: () =>
      new Promise<void>((resolve, reject) =>
        server.close((err) => (err ? reject(err) : resolve())),
      ),
  };
}
