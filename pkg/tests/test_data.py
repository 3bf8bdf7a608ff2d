"""Rally parsing, validation, splits, normalization, synthetic corpus."""

import math

import numpy as np
import pytest

from rallycast import data as D
from rallycast.errors import ConfigurationError, ParseError, ValidationError

HEADER = ",".join(D.CSV_COLUMNS)


def make_csv(rows) -> str:
    return HEADER + "\n" + "\n".join(",".join(str(c) for c in r) for r in rows) + "\n"


def simple_rally_rows(match="M1", rally="R1", n=4, pa="Alice", pb="Bob"):
    rows = []
    shots = ["short service", "lob", "clear", "smash", "drive", "drop"]
    for t in range(1, n + 1):
        rows.append(
            [match, rally, t, pa, pb, shots[(t - 1) % len(shots)],
             1.0 + t, 2.0 + t, 3.0 + t, 9.0 + t]
        )
    return rows


# ---------------------------------------------------------------- parsing

def test_parse_single_rally():
    rallies = D.parse_rallies(make_csv(simple_rally_rows(n=4)))
    assert len(rallies) == 1
    r = rallies[0]
    assert (r.match_id, r.rally_id, r.player_a, r.player_b) == ("M1", "R1", "Alice", "Bob")
    assert len(r) == 4
    assert r.strokes[0].shot_type == "short service"
    assert r.strokes[2].loc_a == (4.0, 5.0)
    assert r.strokes[2].loc_b == (6.0, 12.0)


def test_parse_preserves_file_order_and_groups():
    rows = simple_rally_rows(rally="R1", n=2) + simple_rally_rows(rally="R2", n=3)
    rallies = D.parse_rallies(make_csv(rows))
    assert [r.rally_id for r in rallies] == ["R1", "R2"]
    assert [len(r) for r in rallies] == [2, 3]


def test_parse_sorts_strokes_within_rally():
    rows = simple_rally_rows(n=3)
    shuffled = [rows[2], rows[0], rows[1]]
    rallies = D.parse_rallies(make_csv(shuffled))
    assert [s.t for s in rallies[0].strokes] == [1, 2, 3]


def test_missing_value_drops_rally_with_warning(caplog):
    rows = simple_rally_rows(rally="R1", n=2)
    rows[1][5] = ""  # empty shot_type
    rows += simple_rally_rows(rally="R2", n=2)
    with caplog.at_level("WARNING", logger="rallycast.data"):
        rallies = D.parse_rallies(make_csv(rows))
    assert [r.rally_id for r in rallies] == ["R2"]
    assert any("R1" in rec.getMessage() for rec in caplog.records)


def test_malformed_number_raises_parse_error_with_line():
    rows = simple_rally_rows(n=2)
    rows[1][6] = "not-a-number"
    with pytest.raises(ParseError) as exc:
        D.parse_rallies(make_csv(rows))
    assert "line 3" in str(exc.value)


def test_bad_header_rejected():
    bad = make_csv(simple_rally_rows(n=1)).replace("match_id", "game_id")
    with pytest.raises(ParseError):
        D.parse_rallies(bad)


def test_long_rally_truncated_to_35():
    rows = []
    for t in range(1, 41):
        shot = "short service" if t == 1 else ["lob", "clear", "drive"][t % 3]
        rows.append(["M1", "R1", t, "A", "B", shot, 1, 2, 3, 9])
    rallies = D.parse_rallies(make_csv(rows))
    assert len(rallies[0]) == 35
    assert rallies[0].strokes[-1].t == 35


def test_stroke_gap_is_validation_error_naming_rally():
    rows = simple_rally_rows(n=3)
    rows = [rows[0], rows[2]]  # drop stroke 2 entirely
    with pytest.raises(ValidationError) as exc:
        D.parse_rallies(make_csv(rows))
    assert "R1" in str(exc.value)


def test_serve_rules_enforced():
    rows = simple_rally_rows(n=2)
    rows[0][5] = "smash"  # stroke 1 not a serve
    with pytest.raises(ValidationError):
        D.parse_rallies(make_csv(rows))
    rows = simple_rally_rows(n=2)
    rows[1][5] = "long service"  # serve after stroke 1
    with pytest.raises(ValidationError) as exc:
        D.parse_rallies(make_csv(rows))
    assert "stroke 2" in str(exc.value)


def test_unknown_shot_type_rejected():
    rows = simple_rally_rows(n=2)
    rows[1][5] = "backhand wizardry"
    with pytest.raises(ValidationError):
        D.parse_rallies(make_csv(rows))


def test_csv_round_trip():
    rallies = D.generate_synthetic(seed=9, n_rallies=5)
    text = D.rallies_to_csv(rallies)
    back = D.parse_rallies(text)
    assert len(back) == len(rallies)
    for x, y in zip(back, rallies):
        assert x.rally_id == y.rally_id and x.match_id == y.match_id
        assert x.player_a == y.player_a and x.player_b == y.player_b
        for sx, sy in zip(x.strokes, y.strokes):
            assert sx.shot_type == sy.shot_type and sx.t == sy.t
            assert sx.loc_a == sy.loc_a and sx.loc_b == sy.loc_b


def test_parse_missing_file():
    with pytest.raises(ParseError):
        D.parse_rallies("/nonexistent/path/data.csv")


# ------------------------------------------------------------------ split

def _dummy_rally(match, rid):
    strokes = [
        D.Stroke(1, (1.0, 2.0), (3.0, 9.0), "short service"),
        D.Stroke(2, (1.5, 2.5), (3.5, 9.5), "lob"),
    ]
    return D.Rally(rid, match, "A", "B", strokes)


@pytest.mark.parametrize("n,want_train", [(10, 8), (1, 1), (2, 2), (3, 3), (4, 4), (5, 4), (9, 8)])
def test_split_sizes_use_ceiling(n, want_train):
    rallies = [_dummy_rally("M1", f"R{i}") for i in range(n)]
    train, test = D.split_train_test(rallies)
    assert len(train) == want_train
    assert len(test) == n - want_train
    assert [r.rally_id for r in train] == [f"R{i}" for i in range(want_train)]


def test_split_is_per_match_and_order_preserving():
    rallies = [_dummy_rally("M1", f"A{i}") for i in range(5)] + [
        _dummy_rally("M2", f"B{i}") for i in range(5)
    ]
    train, test = D.split_train_test(rallies)
    assert [r.rally_id for r in test] == ["A4", "B4"]
    # Every test player also appears in training.
    train_players = {p for r in train for p in (r.player_a, r.player_b)}
    for r in test:
        assert r.player_a in train_players and r.player_b in train_players


# -------------------------------------------------------------- normalize

def test_norm_stats_round_trip_and_standardization():
    rallies = D.generate_synthetic(seed=3, n_rallies=20)
    stats = D.NormStats.from_rallies(rallies)
    x, y = 2.5, 11.0
    nx, ny = stats.normalize(x, y)
    bx, by = stats.denormalize(nx, ny)
    assert bx == pytest.approx(x, abs=1e-12) and by == pytest.approx(y, abs=1e-12)

    normed = [stats.normalize_rally(r) for r in rallies]
    xs = [v for r in normed for s in r.strokes for v in (s.loc_a[0], s.loc_b[0])]
    ys = [v for r in normed for s in r.strokes for v in (s.loc_a[1], s.loc_b[1])]
    assert abs(np.mean(xs)) < 1e-9 and abs(np.mean(ys)) < 1e-9
    assert np.std(xs) == pytest.approx(1.0, abs=1e-9)
    assert np.std(ys) == pytest.approx(1.0, abs=1e-9)


def test_norm_stats_come_from_train_split_only():
    r1 = _dummy_rally("M1", "R1")
    stats = D.NormStats.from_rallies([r1])
    # Adding a wildly different rally to the would-be test split must not matter.
    assert stats.mean_x == pytest.approx(np.mean([1.0, 3.0, 1.5, 3.5]))


def test_norm_stats_reject_degenerate_axis():
    strokes = [
        D.Stroke(1, (1.0, 2.0), (1.0, 9.0), "short service"),
        D.Stroke(2, (1.0, 3.0), (1.0, 8.0), "lob"),
    ]
    r = D.Rally("R1", "M1", "A", "B", strokes)
    with pytest.raises(ConfigurationError):
        D.NormStats.from_rallies([r])


# ------------------------------------------------------------- vocabulary

def test_vocabulary_shot_codebook():
    v = D.Vocabulary(["P2", "P1"])
    assert v.shot_index("net shot") == 1
    assert v.shot_index("long service") == 10
    assert v.shot_name(0) == D.PAD_TOKEN
    assert v.shot_name(7) == "short service"
    assert v.shot_class("net shot") == 0
    assert v.class_name(9) == "long service"
    assert set(v.serve_classes()) == {v.shot_class("short service"), v.shot_class("long service")}
    with pytest.raises(ValidationError):
        v.shot_index("no such shot")


def test_vocabulary_player_codebook_and_unknown():
    v = D.Vocabulary(["Zoe", "Ann"])
    assert v.players == ("Ann", "Zoe")
    assert v.player_index("Ann") == 0
    assert v.player_index("Zoe") == 1
    assert v.player_index("Stranger") == v.unknown_player_index == 2
    assert v.knows_player("Ann") and not v.knows_player("Stranger")


def test_vocabulary_json_round_trip():
    v = D.Vocabulary(["B", "A"])
    again = D.Vocabulary.from_json(v.to_json())
    assert again.players == v.players
    bad = v.to_json()
    bad["shot_types"] = ["foo"]
    with pytest.raises(ValidationError):
        D.Vocabulary.from_json(bad)


# -------------------------------------------------------------- synthetic

def test_synthetic_is_deterministic_bytewise():
    a = D.rallies_to_csv(D.generate_synthetic(seed=7, n_rallies=16))
    b = D.rallies_to_csv(D.generate_synthetic(seed=7, n_rallies=16))
    assert a == b
    c = D.rallies_to_csv(D.generate_synthetic(seed=8, n_rallies=16))
    assert a != c


def test_synthetic_respects_bounds_and_rules():
    rallies = D.generate_synthetic(seed=1, n_rallies=30, min_len=2, max_len=35)
    assert len(rallies) == 30
    for r in rallies:
        r.validate()
        assert 2 <= len(r) <= 35
        for s in r.strokes:
            for x, y in (s.loc_a, s.loc_b):
                assert 0.0 <= x <= D.COURT_WIDTH
                assert 0.0 <= y <= D.COURT_LENGTH
        # Side A stays on the near half, side B on the far half (hit points).
        assert r.strokes[0].shot_type in D.SERVE_TYPES


def test_synthetic_shot_process_is_player_conditioned():
    # The reply to a given incoming zone is a deterministic function of
    # the hitter's style, so repeated (style, previous-shot) pairs agree.
    rallies = D.generate_synthetic(seed=5, n_rallies=40, min_len=6, max_len=10)
    seen = {}
    for r in rallies:
        for i in range(1, len(r.strokes)):
            side = D.hitter(r.strokes[i].t)
            who = r.player_a if side == "a" else r.player_b
            key = (who, r.strokes[i - 1].shot_type)
            prev = seen.setdefault(key, r.strokes[i].shot_type)
            assert prev == r.strokes[i].shot_type


def test_synthetic_bad_settings():
    with pytest.raises(ConfigurationError):
        D.generate_synthetic(seed=1, n_rallies=0)
    with pytest.raises(ConfigurationError):
        D.generate_synthetic(seed=1, n_rallies=3, min_len=1)
    with pytest.raises(ConfigurationError):
        D.generate_synthetic(seed=1, n_rallies=3, min_len=10, max_len=40)


def test_hitter_parity():
    assert D.hitter(1) == "a"
    assert D.hitter(2) == "b"
    assert D.hitter(35) == "a"
