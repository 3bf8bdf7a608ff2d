"""Forecast service: request validation, rollout orchestration, HTTP front."""

import json
import logging
import mimetypes
import os
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint
from .data import (
    COURT_LENGTH,
    COURT_WIDTH,
    MAX_RALLY_LENGTH,
    Rally,
    SERVE_TYPES,
    SHOT_TYPES,
    Stroke,
)
from .model import DecodingSession
from .rng import substream

logger = logging.getLogger(__name__)

MAX_HORIZON = 64
MAX_SAMPLES = 100
MAX_BODY_BYTES = 1 << 20


class RequestError(Exception):
    """Invalid request payload; maps to HTTP 400 with per-field messages."""

    def __init__(self, fields: dict):
        super().__init__("; ".join(f"{k}: {v}" for k, v in fields.items()))
        self.fields = fields


class NoCheckpointError(Exception):
    """No model loaded; maps to HTTP 503."""


def _dump(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n").encode()


def _require_location(value, field, errors):
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in value)
    ):
        errors[field] = "must be a two-number [x, y] array"
        return None
    x, y = float(value[0]), float(value[1])
    if not (np.isfinite(x) and np.isfinite(y)):
        errors[field] = "coordinates must be finite"
        return None
    return (x, y)


def _require_int(body, field, errors, default=None, lo=None, hi=None):
    value = body.get(field, default)
    if value is None:
        if default is None:
            errors[field] = "is required"
        return default
    if isinstance(value, bool) or not isinstance(value, int):
        errors[field] = "must be an integer"
        return default
    if lo is not None and value < lo:
        errors[field] = f"must be at least {lo}"
        return default
    if hi is not None and value > hi:
        errors[field] = f"must be at most {hi}"
        return default
    return value


def parse_forecast_request(body) -> dict:
    """Validate a forecast payload; raises RequestError naming each bad field."""
    if not isinstance(body, dict):
        raise RequestError({"body": "must be a JSON object"})
    errors: dict = {}
    cleaned: dict = {}

    for field in ("playerA", "playerB"):
        value = body.get(field)
        if not isinstance(value, str) or not value.strip():
            errors[field] = "must be a non-empty string"
        else:
            cleaned[field] = value.strip()

    prefix = body.get("prefix")
    strokes = []
    if not isinstance(prefix, list):
        errors["prefix"] = "must be an array of strokes"
    elif len(prefix) < 2:
        errors["prefix"] = f"needs at least 2 strokes, got {len(prefix)}"
    elif len(prefix) > MAX_RALLY_LENGTH:
        errors["prefix"] = f"has {len(prefix)} strokes, maximum is {MAX_RALLY_LENGTH}"
    else:
        for i, entry in enumerate(prefix):
            where = f"prefix[{i}]"
            if not isinstance(entry, dict):
                errors[where] = "must be an object"
                continue
            t = entry.get("t")
            if t != i + 1:
                errors[f"{where}.t"] = f"must be {i + 1} (strokes are numbered in order)"
                continue
            loc_a = _require_location(entry.get("locationA"), f"{where}.locationA", errors)
            loc_b = _require_location(entry.get("locationB"), f"{where}.locationB", errors)
            shot = entry.get("shotType")
            if shot not in SHOT_TYPES:
                errors[f"{where}.shotType"] = (
                    f"unknown shot type {shot!r}; expected one of {', '.join(SHOT_TYPES)}"
                )
            elif t == 1 and shot not in SERVE_TYPES:
                errors[f"{where}.shotType"] = f"stroke 1 must be a service shot, got {shot!r}"
            elif t > 1 and shot in SERVE_TYPES:
                errors[f"{where}.shotType"] = (
                    f"stroke {t} is mid-rally and cannot be a service shot"
                )
            if loc_a is not None and loc_b is not None and f"{where}.shotType" not in errors:
                strokes.append(Stroke(t, loc_a, loc_b, shot))

    cleaned["horizon"] = _require_int(body, "horizon", errors, lo=1, hi=MAX_HORIZON)
    cleaned["nSamples"] = _require_int(body, "nSamples", errors, default=10, lo=1, hi=MAX_SAMPLES)
    seed = body.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        errors["seed"] = "must be an integer"
        seed = None
    cleaned["seed"] = seed

    if errors:
        raise RequestError(errors)
    cleaned["strokes"] = strokes
    return cleaned


class ForecastService:
    """Owns an immutable checkpoint snapshot and answers forecast queries."""

    def __init__(self, checkpoint: Checkpoint | None = None, source: str = ""):
        self._snapshot = (checkpoint, source)

    def load(self, path) -> None:
        ckpt = load_checkpoint(path)
        # A fully built checkpoint swaps in as one reference assignment,
        # so concurrent requests see either the old or new model whole.
        self._snapshot = (ckpt, os.fspath(path))

    @property
    def checkpoint(self) -> Checkpoint | None:
        return self._snapshot[0]

    def _require_checkpoint(self) -> tuple:
        ckpt, source = self._snapshot
        if ckpt is None:
            raise NoCheckpointError("no checkpoint loaded")
        return ckpt, source

    def health(self) -> dict:
        return {"status": "ok", "checkpointLoaded": self._snapshot[0] is not None}

    def meta(self) -> dict:
        ckpt, source = self._require_checkpoint()
        return {
            "players": list(ckpt.vocab.players),
            "shotTypes": list(SHOT_TYPES),
            "serveTypes": sorted(SERVE_TYPES),
            "courtBounds": {"width": COURT_WIDTH, "length": COURT_LENGTH},
            "checkpointInfo": {
                "source": source,
                "variant": ckpt.params.config.variant_name,
                "parameters": ckpt.params.parameter_count(),
                "players": ckpt.vocab.n_players,
            },
        }

    def forecast(self, body) -> dict:
        ckpt, _ = self._require_checkpoint()
        req = parse_forecast_request(body)
        seed = req["seed"]
        if seed is None:
            seed = int.from_bytes(os.urandom(4), "little")

        warnings = []
        indices = {}
        for side, field in (("a", "playerA"), ("b", "playerB")):
            name = req[field]
            indices[side] = ckpt.vocab.player_index(name)
            if not ckpt.vocab.knows_player(name):
                warnings.append(
                    f"{field} {name!r} is not in the training vocabulary; "
                    "using the shared unknown-player profile"
                )

        rally = Rally("request", "request", req["playerA"], req["playerB"],
                      tuple(req["strokes"]))
        norm = ckpt.stats.normalize_rally(rally)
        observed = len(rally.strokes)
        horizon = req["horizon"]
        n_samples = req["nSamples"]

        # Representative trajectory: propagate the Gaussian means forward.
        session = DecodingSession(ckpt.params, ckpt.vocab, norm, observed,
                                  player_indices=indices)
        mean_steps = [session.decode_step("free") for _ in range(horizon)]

        # Stochastic rollouts supply the per-step location scatter.
        scatter = [[] for _ in range(horizon)]
        for i in range(n_samples):
            rng = substream(seed, "forecast", i)
            s = DecodingSession(ckpt.params, ckpt.vocab, norm, observed,
                                player_indices=indices)
            for step in range(horizon):
                r = s.decode_step("free", sample_rng=rng)
                scatter[step].append({
                    "playerA": [float(c) for c in ckpt.stats.denormalize(*r.next_loc_a)],
                    "playerB": [float(c) for c in ckpt.stats.denormalize(*r.next_loc_b)],
                })

        steps = []
        for idx, r in enumerate(mean_steps):
            g_a = r.gaussian_a.snapshot().denormalized(ckpt.stats)
            g_b = r.gaussian_b.snapshot().denormalized(ckpt.stats)
            steps.append({
                "k": r.k,
                "shotDistribution": [float(p) for p in r.shot_probs],
                "chosenShot": ckpt.vocab.class_name(r.committed_class),
                "gaussians": {
                    "playerA": _gaussian_json(g_a),
                    "playerB": _gaussian_json(g_b),
                },
                "samples": scatter[idx],
            })
        return {
            "seed": seed,
            "horizon": horizon,
            "nSamples": n_samples,
            "warnings": warnings,
            "steps": steps,
        }


def _gaussian_json(g) -> dict:
    return {
        "muX": float(g.mu_x), "muY": float(g.mu_y),
        "sigmaX": float(g.sigma_x), "sigmaY": float(g.sigma_y),
        "rho": float(g.rho),
    }


# ------------------------------------------------------------- HTTP layer

class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    service: ForecastService = None
    static_dir: str | None = None

    def log_message(self, fmt, *args):
        logger.debug("http: " + fmt, *args)

    def _send(self, status: int, payload: bytes, content_type="application/json"):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, status: int, obj):
        self._send(status, _dump(obj))

    def do_GET(self):
        path = self.path.split("?", 1)[0]
        if path == "/v1/health":
            self._send_json(200, self.service.health())
            return
        if path == "/v1/meta":
            try:
                self._send_json(200, self.service.meta())
            except NoCheckpointError as e:
                self._send_json(503, {"error": str(e)})
            return
        if self.static_dir is not None:
            self._serve_static(path)
            return
        self._send_json(404, {"error": "not found"})

    def do_POST(self):
        path = self.path.split("?", 1)[0]
        if path != "/v1/forecast":
            self._send_json(404, {"error": "not found"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY_BYTES:
            self._send_json(413, {"error": "request body too large"})
            return
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            self._send_json(400, {"error": "validation",
                                  "fields": {"body": f"not valid JSON: {e}"}})
            return
        try:
            self._send_json(200, self.service.forecast(body))
        except RequestError as e:
            self._send_json(400, {"error": "validation", "fields": e.fields})
        except NoCheckpointError as e:
            self._send_json(503, {"error": str(e)})
        except Exception:
            logger.exception("forecast failed")
            self._send_json(500, {"error": "internal error"})

    def _serve_static(self, path: str):
        rel = path.lstrip("/") or "index.html"
        root = os.path.realpath(self.static_dir)
        full = os.path.realpath(os.path.join(root, rel))
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not full.startswith(root + os.sep) and full != root:
            self._send_json(404, {"error": "not found"})
            return
        if not os.path.isfile(full):
            self._send_json(404, {"error": "not found"})
            return
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as fh:
            self._send(200, fh.read(), content_type=ctype)


def make_server(service: ForecastService, port: int = 0,
                static_dir: str | None = None) -> ThreadingHTTPServer:
    """Bind a threading HTTP server; port 0 picks an ephemeral port."""
    handler = type("BoundHandler", (_Handler,), {
        "service": service,
        "static_dir": static_dir,
    })
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve_forever(service: ForecastService, port: int,
                  static_dir: str | None = None) -> None:
    server = make_server(service, port, static_dir)
    host, bound_port = server.server_address
    logger.info("listening on http://%s:%d/", host, bound_port)
    print(json.dumps({"listening": f"http://{host}:{bound_port}/"}), flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def start_background(service: ForecastService, port: int = 0,
                     static_dir: str | None = None):
    """Start a server on a daemon thread; returns (server, base_url)."""
    server = make_server(service, port, static_dir)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, bound_port = server.server_address
    return server, f"http://{host}:{bound_port}"
