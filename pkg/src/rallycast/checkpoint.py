"""Versioned JSON checkpoints with bit-exact double round-trips.

A checkpoint bundles everything a service or evaluator needs: the model
configuration, the vocabulary, the normalization statistics, and every
parameter tensor as nested lists.  Python's float repr is the shortest
decimal that round-trips the exact double, so save -> load reproduces
every buffer bitwise.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .data import NormStats, Vocabulary
from .errors import ValidationError
from .model import ModelConfig, ModelParams

FORMAT_VERSION = 1

__all__ = ["FORMAT_VERSION", "Checkpoint", "save_checkpoint", "load_checkpoint"]


class Checkpoint:
    """An immutable snapshot: config, vocabulary, stats, parameters."""

    def __init__(self, params: ModelParams, vocab: Vocabulary, stats: NormStats):
        self.params = params
        self.vocab = vocab
        self.stats = stats

    @property
    def config(self) -> ModelConfig:
        return self.params.config

    def to_json_obj(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_json(),
            "vocabulary": self.vocab.to_json(),
            "norm_stats": self.stats.to_json(),
            "parameters": {
                name: tensor.data.tolist() for name, tensor in self.params.named().items()
            },
        }

    def to_text(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Checkpoint":
        version = obj.get("format_version")
        if version != FORMAT_VERSION:
            raise ValidationError(
                f"unsupported checkpoint format_version {version!r}; this build reads {FORMAT_VERSION}"
            )
        for key in ("config", "vocabulary", "norm_stats", "parameters"):
            if key not in obj:
                raise ValidationError(f"checkpoint is missing the {key!r} section")
        config = ModelConfig.from_json(obj["config"])
        vocab = Vocabulary.from_json(obj["vocabulary"])
        stats = NormStats.from_json(obj["norm_stats"])
        params = ModelParams(config, vocab.n_players, seed=0)
        stored = obj["parameters"]
        expected = set(params.named())
        got = set(stored)
        if expected != got:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ValidationError(
                f"checkpoint parameters do not match the configuration: "
                f"missing {missing}, unexpected {extra}"
            )
        for name, tensor in params.named().items():
            arr = np.asarray(stored[name], dtype=np.float64)
            if arr.shape != tensor.data.shape:
                raise ValidationError(
                    f"parameter {name!r} has shape {arr.shape}, expected {tensor.data.shape}"
                )
            tensor.data[...] = arr
        return cls(params, vocab, stats)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(ckpt.to_text())
    os.replace(tmp, path)


def load_checkpoint(path: str) -> Checkpoint:
    if not os.path.exists(path):
        raise ValidationError(f"no checkpoint at {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValidationError(f"checkpoint {path} is not valid JSON: {e}") from None
    return Checkpoint.from_json_obj(obj)
