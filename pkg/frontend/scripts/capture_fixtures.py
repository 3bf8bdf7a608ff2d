"""Record request/response fixtures from a live forecast service.

Trains a small deterministic checkpoint on synthetic rallies, starts the
HTTP service in-process, replays a fixed set of requests, and writes the
bodies to tests/fixtures/fixtures.json.  Rerun after any model or API
change; the output is byte-stable for a given package version.
"""

import json
import pathlib
import urllib.request

from rallycast.data import generate_synthetic
from rallycast.service import ForecastService, start_background
from rallycast.training import TrainRun, train

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def post(base, body):
    data = json.dumps(body).encode()
    req = urllib.request.Request(base + "/v1/forecast", data=data,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def get(base, path):
    with urllib.request.urlopen(base + path) as resp:
        return json.loads(resp.read())


def main():
    rallies = generate_synthetic(seed=0, n_rallies=16, min_len=6, max_len=6)
    ckpt, _ = train(rallies, TrainRun(seed=7, epochs=20, batch_size=4, tau=4, lr=0.005))

    service = ForecastService(checkpoint=ckpt, source="fixture-train")
    server, base = start_background(service)
    try:
        rally = rallies[0]
        prefix = [
            {
                "t": s.t,
                "locationA": [round(s.loc_a[0], 6), round(s.loc_a[1], 6)],
                "locationB": [round(s.loc_b[0], 6), round(s.loc_b[1], 6)],
                "shotType": s.shot_type,
            }
            for s in rally.strokes[:4]
        ]
        base_req = {
            "playerA": rally.player_a,
            "playerB": rally.player_b,
            "prefix": prefix,
            "horizon": 3,
            "nSamples": 5,
            "seed": 42,
        }
        # Stroke 4 is hit by player B, so player A is defending; this is
        # the position a drag to (7.0, 12.0) clamps to.
        dragged_prefix = json.loads(json.dumps(prefix))
        dragged_prefix[3]["locationA"] = [6.1, 12.0]
        dragged_req = dict(base_req, prefix=dragged_prefix)
        short_req = dict(base_req, horizon=1)

        fixtures = {
            "meta": get(base, "/v1/meta"),
            "forecasts": [
                {"request": req, "response": post(base, req)}
                for req in (base_req, dragged_req, short_req)
            ],
        }
    finally:
        server.shutdown()

    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / "fixtures.json"
    path.write_text(json.dumps(fixtures, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path} ({len(fixtures['forecasts'])} forecast pairs)")


if __name__ == "__main__":
    main()
