"""Rally records: parsing, validation, splits, normalization, synthesis.

A rally is an alternating sequence of strokes between two players on a
standard doubles-width court.  Player A hits every odd-numbered stroke
(A serves), player B every even one; each stroke records both players'
positions at hit time plus the shot type hit.  Serve types may appear
only on stroke 1, and stroke 1 must be a serve.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractError, ParseError, ValidationError
from .rng import substream

logger = logging.getLogger(__name__)

# Canonical shot-type names, fixed order. Indices 1..10 (0 is padding).
SHOT_TYPES = (
    "net shot",
    "lob",
    "defensive shot",
    "smash",
    "drop",
    "push/rush",
    "short service",
    "clear",
    "drive",
    "long service",
)
SERVE_TYPES = frozenset({"short service", "long service"})
PAD_TOKEN = "<pad>"

COURT_WIDTH = 6.1
COURT_LENGTH = 13.4

MAX_RALLY_LENGTH = 35

CSV_COLUMNS = (
    "match_id",
    "rally_id",
    "ball_round",
    "player_a_id",
    "player_b_id",
    "shot_type",
    "player_a_x",
    "player_a_y",
    "player_b_x",
    "player_b_y",
)


def hitter(t: int) -> str:
    """Side hitting stroke t (1-based): player A on odd strokes."""
    if t < 1:
        raise ContractError(f"stroke numbers are 1-based, got {t}")
    return "a" if t % 2 == 1 else "b"


@dataclass(frozen=True)
class Stroke:
    """One stroke: both players' positions at hit time plus the shot hit."""

    t: int
    loc_a: tuple
    loc_b: tuple
    shot_type: str


@dataclass
class Rally:
    """One alternating stroke sequence between a fixed pair of players."""

    rally_id: str
    match_id: str
    player_a: str
    player_b: str
    strokes: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.strokes)

    def validate(self) -> None:
        """Check stroke numbering, serve placement, and shot-type names."""
        if not self.strokes:
            raise ValidationError(f"rally {self.rally_id!r} has no strokes")
        for i, s in enumerate(self.strokes):
            if s.t != i + 1:
                raise ValidationError(
                    f"rally {self.rally_id!r}: stroke numbers must run 1..n without gaps, "
                    f"found {s.t} at position {i + 1}"
                )
            if s.shot_type not in SHOT_TYPES:
                raise ValidationError(
                    f"rally {self.rally_id!r}: unknown shot type {s.shot_type!r} at stroke {s.t}"
                )
            if s.t == 1 and s.shot_type not in SERVE_TYPES:
                raise ValidationError(
                    f"rally {self.rally_id!r}: stroke 1 must be a serve, got {s.shot_type!r}"
                )
            if s.t > 1 and s.shot_type in SERVE_TYPES:
                raise ValidationError(
                    f"rally {self.rally_id!r}: serve type {s.shot_type!r} at stroke {s.t}"
                )


class Vocabulary:
    """Shot-type and player-id codebooks shared by model and service.

    Shot indices are 1-based with index 0 reserved for padding; the
    ten head classes are shot index minus one.  Player indices are
    dense over the training roster, with one extra row reserved for
    players never seen in training.
    """

    def __init__(self, players):
        self.shot_types = SHOT_TYPES
        self.players = tuple(sorted(set(players)))
        self._shot_to_index = {name: i + 1 for i, name in enumerate(SHOT_TYPES)}
        self._player_to_index = {p: i for i, p in enumerate(self.players)}

    @classmethod
    def from_rallies(cls, rallies) -> "Vocabulary":
        names = set()
        for r in rallies:
            names.add(r.player_a)
            names.add(r.player_b)
        return cls(names)

    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def unknown_player_index(self) -> int:
        return len(self.players)

    @property
    def n_shot_classes(self) -> int:
        return len(SHOT_TYPES)

    def shot_index(self, name: str) -> int:
        """1-based shot index; 0 is the padding slot."""
        try:
            return self._shot_to_index[name]
        except KeyError:
            raise ValidationError(f"unknown shot type {name!r}") from None

    def shot_name(self, index: int) -> str:
        if index == 0:
            return PAD_TOKEN
        if not 1 <= index <= len(SHOT_TYPES):
            raise ContractError(f"shot index {index} out of range 0..{len(SHOT_TYPES)}")
        return SHOT_TYPES[index - 1]

    def shot_class(self, name: str) -> int:
        """0-based class used by the prediction head and metrics."""
        return self.shot_index(name) - 1

    def class_name(self, cls_index: int) -> str:
        if not 0 <= cls_index < len(SHOT_TYPES):
            raise ContractError(f"shot class {cls_index} out of range")
        return SHOT_TYPES[cls_index]

    def serve_classes(self) -> tuple:
        return tuple(self.shot_class(n) for n in sorted(SERVE_TYPES))

    def player_index(self, player_id: str) -> int:
        """Dense index; ids absent from the roster map to the reserved row."""
        return self._player_to_index.get(player_id, self.unknown_player_index)

    def knows_player(self, player_id: str) -> bool:
        return player_id in self._player_to_index

    def to_json(self) -> dict:
        return {"shot_types": list(self.shot_types), "players": list(self.players)}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        if tuple(obj.get("shot_types", ())) != SHOT_TYPES:
            raise ValidationError("vocabulary shot types do not match this build")
        return cls(obj["players"])


@dataclass(frozen=True)
class NormStats:
    """Per-axis z-score statistics pooled over both players, train split only."""

    mean_x: float
    mean_y: float
    std_x: float
    std_y: float

    @classmethod
    def from_rallies(cls, rallies) -> "NormStats":
        xs, ys = [], []
        for r in rallies:
            for s in r.strokes:
                xs.extend((s.loc_a[0], s.loc_b[0]))
                ys.extend((s.loc_a[1], s.loc_b[1]))
        if not xs:
            raise ConfigurationError("cannot compute normalization from an empty split")
        sx = float(np.std(xs))
        sy = float(np.std(ys))
        if sx <= 0.0 or sy <= 0.0:
            raise ConfigurationError("degenerate coordinates: zero variance on an axis")
        return cls(float(np.mean(xs)), float(np.mean(ys)), sx, sy)

    def normalize(self, x: float, y: float) -> tuple:
        return ((x - self.mean_x) / self.std_x, (y - self.mean_y) / self.std_y)

    def denormalize(self, x: float, y: float) -> tuple:
        return (x * self.std_x + self.mean_x, y * self.std_y + self.mean_y)

    def normalize_rally(self, rally: Rally) -> Rally:
        strokes = [
            Stroke(s.t, self.normalize(*s.loc_a), self.normalize(*s.loc_b), s.shot_type)
            for s in rally.strokes
        ]
        return Rally(rally.rally_id, rally.match_id, rally.player_a, rally.player_b, strokes)

    def to_json(self) -> dict:
        return {
            "mean_x": self.mean_x,
            "mean_y": self.mean_y,
            "std_x": self.std_x,
            "std_y": self.std_y,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NormStats":
        return cls(obj["mean_x"], obj["mean_y"], obj["std_x"], obj["std_y"])


def _parse_rows(reader, source: str):
    """Yield validated raw rows; raise ParseError with the 1-based line number."""
    header = next(reader, None)
    if header is None:
        raise ParseError(f"{source}: empty input")
    if [h.strip() for h in header] != list(CSV_COLUMNS):
        raise ParseError(
            f"{source}, line 1: header must be {','.join(CSV_COLUMNS)}, got {','.join(header)}"
        )
    for lineno, cells in enumerate(reader, start=2):
        if not cells or all(c.strip() == "" for c in cells):
            continue
        if len(cells) != len(CSV_COLUMNS):
            raise ParseError(
                f"{source}, line {lineno}: expected {len(CSV_COLUMNS)} fields, got {len(cells)}"
            )
        yield lineno, dict(zip(CSV_COLUMNS, (c.strip() for c in cells)))


def parse_rallies(path_or_text, source: str = "") -> list:
    """Parse the stroke CSV into validated rallies, preserving file order.

    Rows with empty fields poison their whole rally, which is dropped
    with a logged warning; unparseable numbers raise ParseError with the
    line number; semantic violations (stroke-number gaps, misplaced
    serves) raise ValidationError naming the rally.  Rallies longer than
    35 strokes are truncated to 35.
    """
    if hasattr(path_or_text, "read"):
        text = path_or_text.read()
        source = source or "<stream>"
    elif isinstance(path_or_text, os.PathLike) or (
        isinstance(path_or_text, str) and "\n" not in path_or_text
    ):
        source = source or str(path_or_text)
        if not os.path.exists(path_or_text):
            raise ParseError(f"no such file: {path_or_text}")
        with open(path_or_text, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = str(path_or_text)
        source = source or "<text>"

    groups: dict = {}
    order: list = []
    incomplete: set = set()
    for lineno, rowdict in _parse_rows(csv.reader(io.StringIO(text)), source):
        key = (rowdict["match_id"], rowdict["rally_id"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        if any(rowdict[c] == "" for c in CSV_COLUMNS):
            incomplete.add(key)
            continue
        try:
            t = int(rowdict["ball_round"])
            coords = tuple(
                float(rowdict[c])
                for c in ("player_a_x", "player_a_y", "player_b_x", "player_b_y")
            )
        except ValueError as e:
            raise ParseError(f"{source}, line {lineno}: {e}") from None
        groups[key].append((t, rowdict, coords))

    rallies = []
    for key in order:
        match_id, rally_id = key
        if key in incomplete:
            logger.warning("dropping rally %r (match %r): missing values", rally_id, match_id)
            continue
        rows = sorted(groups[key], key=lambda item: item[0])
        if not rows:
            continue
        first = rows[0][1]
        strokes = [
            Stroke(t, (c[0], c[1]), (c[2], c[3]), rd["shot_type"])
            for t, rd, c in rows[:MAX_RALLY_LENGTH]
        ]
        rally = Rally(rally_id, match_id, first["player_a_id"], first["player_b_id"], strokes)
        rally.validate()
        rallies.append(rally)
    return rallies


def rallies_to_csv(rallies) -> str:
    """Serialize rallies back to the canonical CSV text."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rallies:
        for s in r.strokes:
            writer.writerow(
                [
                    r.match_id,
                    r.rally_id,
                    s.t,
                    r.player_a,
                    r.player_b,
                    s.shot_type,
                    repr(float(s.loc_a[0])),
                    repr(float(s.loc_a[1])),
                    repr(float(s.loc_b[0])),
                    repr(float(s.loc_b[1])),
                ]
            )
    return out.getvalue()


def split_train_test(rallies) -> tuple:
    """Per-match 80/20 split, preserving order; ceil(0.8n) rallies train.

    Splitting within each match keeps every player present in training,
    since a match's player pair is constant.
    """
    by_match: dict = {}
    match_order = []
    for r in rallies:
        if r.match_id not in by_match:
            by_match[r.match_id] = []
            match_order.append(r.match_id)
        by_match[r.match_id].append(r)
    train, test = [], []
    for m in match_order:
        group = by_match[m]
        n_train = math.ceil(0.8 * len(group))
        train.extend(group[:n_train])
        test.extend(group[n_train:])
    return train, test


# ------------------------------------------------------------- synthesis

# Court anchors for the synthetic generator. Side A defends y < net,
# side B defends y > net; x columns are left / center / right.
_NET_Y = COURT_LENGTH / 2.0
_X_COLUMNS = (1.2, COURT_WIDTH / 2.0, 4.9)
_DEPTHS = {"net": 1.1, "mid": 3.0, "back": 5.2}  # distance from the net

# Where each shot type sends the opponent (zone they must reach).
_SHOT_TARGET_ZONE = {
    "net shot": "net",
    "lob": "back",
    "defensive shot": "mid",
    "smash": "mid",
    "drop": "net",
    "push/rush": "mid",
    "short service": "net",
    "clear": "back",
    "drive": "mid",
    "long service": "back",
}

# Per-style reply tables: given the zone a player was pulled into, the
# shot they hit back. Styles make players distinguishable and keep the
# conditional shot distribution near-deterministic, hence learnable.
_STYLES = (
    {"net": "net shot", "mid": "smash", "back": "clear"},
    {"net": "lob", "mid": "drive", "back": "drop"},
    {"net": "push/rush", "mid": "defensive shot", "back": "smash"},
    {"net": "net shot", "mid": "drive", "back": "lob"},
)


def _zone_point(side: str, zone: str, x_col: float) -> tuple:
    depth = _DEPTHS[zone]
    y = _NET_Y - depth if side == "a" else _NET_Y + depth
    return (x_col, y)


def _clamp_court(x: float, y: float) -> tuple:
    return (min(max(x, 0.0), COURT_WIDTH), min(max(y, 0.0), COURT_LENGTH))


def generate_synthetic(
    seed: int,
    n_rallies: int,
    min_len: int = 4,
    max_len: int = 12,
    n_players: int = 4,
    noise: float = 0.18,
    rallies_per_match: int = 10,
) -> list:
    """Create stylized but realistic rallies on a 6.1 x 13.4 court.

    Players follow fixed reply styles, so shot sequences are close to
    deterministic given (player, incoming zone) and positions are zone
    anchors plus Gaussian noise.  Byte-identical output for a fixed
    seed.
    """
    if n_rallies < 1:
        raise ConfigurationError(f"n_rallies must be >= 1, got {n_rallies}")
    if not 2 <= min_len <= max_len <= MAX_RALLY_LENGTH:
        raise ConfigurationError(
            f"rally length bounds must satisfy 2 <= min <= max <= {MAX_RALLY_LENGTH}, "
            f"got [{min_len}, {max_len}]"
        )
    if n_players < 2:
        raise ConfigurationError(f"need at least 2 players, got {n_players}")

    players = [f"P{i + 1}" for i in range(n_players)]
    rallies = []
    for idx in range(n_rallies):
        rng = substream(seed, "synthetic", idx)
        match_no = idx // rallies_per_match
        pair_rng = substream(seed, "synthetic", "pair", match_no)
        pa, pb = pair_rng.choice(len(players), size=2, replace=False)
        player_a, player_b = players[pa], players[pb]
        style = {"a": _STYLES[pa % len(_STYLES)], "b": _STYLES[pb % len(_STYLES)]}

        length = int(rng.integers(min_len, max_len + 1))
        serve = "short service" if (pa + idx) % 2 == 0 else "long service"

        # Serve stances: server near the center service line, receiver mid.
        pos = {
            "a": _zone_point("a", "mid", _X_COLUMNS[1]),
            "b": _zone_point("b", "mid", _X_COLUMNS[1]),
        }
        strokes = []
        shot = serve
        for t in range(1, length + 1):
            side = hitter(t)
            other = "b" if side == "a" else "a"
            if t > 1:
                # The hitter was pulled to the zone targeted by the last shot.
                zone = _SHOT_TARGET_ZONE[shot]
                x_col = _X_COLUMNS[int(rng.integers(0, 3))]
                pos[side] = _zone_point(side, zone, x_col)
                # The previous hitter retreats toward center defense.
                pos[other] = _zone_point(other, "mid", _X_COLUMNS[1])
                shot = style[side][zone]
            jitter = rng.normal(0.0, noise, size=4)
            loc_a = _clamp_court(pos["a"][0] + jitter[0], pos["a"][1] + jitter[1])
            loc_b = _clamp_court(pos["b"][0] + jitter[2], pos["b"][1] + jitter[3])
            strokes.append(Stroke(t, loc_a, loc_b, shot))

        rally = Rally(
            rally_id=f"R{idx + 1}",
            match_id=f"M{match_no + 1}",
            player_a=player_a,
            player_b=player_b,
            strokes=strokes,
        )
        rally.validate()
        rallies.append(rally)
    return rallies
