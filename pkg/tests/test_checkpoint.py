"""Checkpoint persistence: bit-exact round trips and strict validation."""

import json

import numpy as np
import pytest

from rallycast import model as M
from rallycast.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from rallycast.data import NormStats, Vocabulary
from rallycast.errors import ValidationError


def make_checkpoint(seed=3, **cfg):
    vocab = Vocabulary(["Ann", "Bea", "Cal"])
    config = M.ModelConfig(d_loc=4, d_player=4, d_embed=4, **cfg)
    params = M.ModelParams(config, vocab.n_players, seed=seed)
    stats = NormStats(mean_x=3.05, mean_y=6.7, std_x=1.234567890123456, std_y=2.5)
    return Checkpoint(params, vocab, stats)


def test_round_trip_bitwise(tmp_path):
    ck = make_checkpoint()
    path = tmp_path / "model.json"
    save_checkpoint(ck, path)
    back = load_checkpoint(path)
    assert back.params.config == ck.params.config
    assert back.vocab.players == ck.vocab.players
    assert back.stats == ck.stats
    for name, tensor in ck.params.named().items():
        got = back.params[name].data
        assert got.dtype == np.float64
        np.testing.assert_array_equal(got, tensor.data)
    # Serializing again produces identical bytes.
    assert back.to_text() == ck.to_text()


def test_round_trip_preserves_all_variants(tmp_path):
    for variant in M.VARIANTS:
        ck = make_checkpoint(**{})
        vocab = Vocabulary(["Ann", "Bea"])
        config = M.ModelConfig.for_variant(variant)
        params = M.ModelParams(config, vocab.n_players, seed=1)
        stats = NormStats(1.0, 2.0, 3.0, 4.0)
        ck = Checkpoint(params, vocab, stats)
        path = tmp_path / f"{variant}.json"
        save_checkpoint(ck, path)
        back = load_checkpoint(path)
        assert back.params.config.variant_name == variant
        assert back.params.parameter_count() == params.parameter_count()


def test_mutated_values_survive(tmp_path):
    ck = make_checkpoint()
    ck.params["embed.node"].data[0, 0] = 0.1 + 0.2  # not exactly 0.3
    path = tmp_path / "model.json"
    save_checkpoint(ck, path)
    back = load_checkpoint(path)
    assert back.params["embed.node"].data[0, 0] == 0.1 + 0.2


def test_load_rejects_missing_file(tmp_path):
    with pytest.raises(ValidationError):
        load_checkpoint(tmp_path / "absent.json")


def test_load_rejects_bad_json(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ValidationError):
        load_checkpoint(p)


def test_load_rejects_wrong_version(tmp_path):
    ck = make_checkpoint()
    obj = ck.to_json_obj()
    obj["format_version"] = 999
    p = tmp_path / "v.json"
    p.write_text(json.dumps(obj))
    with pytest.raises(ValidationError, match="version"):
        load_checkpoint(p)


def test_load_rejects_missing_parameter(tmp_path):
    ck = make_checkpoint()
    obj = ck.to_json_obj()
    del obj["parameters"]["embed.node"]
    p = tmp_path / "m.json"
    p.write_text(json.dumps(obj))
    with pytest.raises(ValidationError, match="embed.node"):
        load_checkpoint(p)


def test_load_rejects_wrong_shape(tmp_path):
    ck = make_checkpoint()
    obj = ck.to_json_obj()
    obj["parameters"]["gate.style"] = [[1.0, 2.0]]
    p = tmp_path / "s.json"
    p.write_text(json.dumps(obj))
    with pytest.raises(ValidationError, match="gate.style"):
        load_checkpoint(p)


def test_load_rejects_extra_parameter(tmp_path):
    ck = make_checkpoint()
    obj = ck.to_json_obj()
    obj["parameters"]["bogus.extra"] = [1.0]
    p = tmp_path / "e.json"
    p.write_text(json.dumps(obj))
    with pytest.raises(ValidationError, match="bogus.extra"):
        load_checkpoint(p)


def test_save_is_atomic_no_partial_file(tmp_path):
    ck = make_checkpoint()
    path = tmp_path / "model.json"
    save_checkpoint(ck, path)
    first = path.read_text()
    save_checkpoint(ck, path)
    assert path.read_text() == first
    assert list(tmp_path.iterdir()) == [path]
