"""Training loop, evaluation protocol, metrics, and ablation sweeps."""

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .checkpoint import Checkpoint
from .data import NormStats, Rally, Vocabulary, split_train_test
from .errors import ConfigurationError, ContractError
from .model import DecodingSession, ModelConfig, ModelParams, VARIANTS, teacher_forced_loss
from .rng import substream

logger = logging.getLogger(__name__)

# During training a player is occasionally swapped for the shared
# unknown-player slot so its embedding column receives gradient.
UNKNOWN_SUBSTITUTION_RATE = 0.01


@dataclass
class TrainRun:
    """Settings for one training run."""

    seed: int = 0
    epochs: int = 100
    batch_size: int = 32
    tau: int = 4
    lr: float = 0.001
    config: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.tau < 2:
            raise ConfigurationError(f"tau must be at least 2, got {self.tau}")
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be positive, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be positive, got {self.batch_size}")
        if not self.lr > 0.0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")


def _usable(rallies, tau, stage):
    kept = []
    for rally in rallies:
        if len(rally.strokes) < tau + 1:
            logger.warning(
                "skipping rally %s in %s: %d strokes, need at least %d",
                rally.rally_id, stage, len(rally.strokes), tau + 1,
            )
            continue
        kept.append(rally)
    return kept


def train(rallies, run: TrainRun, log=None):
    """Fit a model on the given rallies.

    Returns (checkpoint, per-epoch mean loss history).  `log`, when
    given, receives one dict per epoch.
    """
    if not rallies:
        raise ConfigurationError("cannot train on an empty dataset")
    usable = _usable(rallies, run.tau, "training")
    if not usable:
        raise ConfigurationError(
            f"no rally has the {run.tau + 1} strokes needed for tau={run.tau}"
        )
    vocab = Vocabulary(sorted({p for r in usable for p in (r.player_a, r.player_b)}))
    stats = NormStats.from_rallies(usable)
    normalized = [stats.normalize_rally(r) for r in usable]

    params = ModelParams(run.config, vocab.n_players, seed=run.seed)
    opt = T.Adam(params.tensors(), lr=run.lr)
    history = []
    for epoch in range(1, run.epochs + 1):
        order = substream(run.seed, "shuffle", epoch).permutation(len(normalized))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), run.batch_size):
            batch = [normalized[i] for i in order[start:start + run.batch_size]]
            for p in params.tensors():
                p.grad = None
            for rally in batch:
                indices = _training_player_indices(vocab, rally, run.seed, epoch)
                drop_rng = substream(run.seed, "drop", epoch, rally.rally_id)
                with T.Tape() as tape:
                    loss, _ = teacher_forced_loss(
                        params, vocab, rally, run.tau,
                        train=True, drop_rng=drop_rng, player_indices=indices,
                    )
                tape.backward(loss)
                epoch_loss += loss.item()
            for p in params.tensors():
                if p.grad is not None:
                    p.grad /= len(batch)
            opt.step()
            n_batches += 1
        mean_loss = epoch_loss / len(normalized)
        history.append(mean_loss)
        if log is not None:
            log({"epoch": epoch, "loss": mean_loss,
                 "rallies": len(normalized), "batches": n_batches})
    return Checkpoint(params, vocab, stats), history


def _training_player_indices(vocab, rally, seed, epoch):
    draws = substream(seed, "unknown", epoch, rally.rally_id).uniform(size=2)
    indices = {
        "a": vocab.player_index(rally.player_a),
        "b": vocab.player_index(rally.player_b),
    }
    for pos, side in enumerate(("a", "b")):
        if draws[pos] < UNKNOWN_SUBSTITUTION_RATE:
            indices[side] = vocab.n_players
    return indices


# ------------------------------------------------------------- metrics

def metric_mse(predictions, targets) -> float:
    """Sum of squared coordinate errors over all steps and both players."""
    _check_aligned(predictions, targets)
    total = 0.0
    for (pa, pb), (ta, tb) in zip(predictions, targets):
        for p, t in ((pa, ta), (pb, tb)):
            total += (p[0] - t[0]) ** 2 + (p[1] - t[1]) ** 2
    return total


def metric_mae(predictions, targets) -> float:
    """Sum of absolute coordinate errors over all steps and both players."""
    _check_aligned(predictions, targets)
    total = 0.0
    for (pa, pb), (ta, tb) in zip(predictions, targets):
        for p, t in ((pa, ta), (pb, tb)):
            total += abs(p[0] - t[0]) + abs(p[1] - t[1])
    return total


def metric_ce(logits_list, target_classes) -> float:
    """Sum of negative log softmax probabilities at the target classes."""
    _check_aligned(logits_list, target_classes)
    total = 0.0
    for logits, target in zip(logits_list, target_classes):
        vec = np.asarray(logits, dtype=np.float64)
        if vec.ndim != 1:
            raise ContractError(f"logits must be 1D, got shape {vec.shape}")
        if not 0 <= int(target) < vec.shape[0]:
            raise ContractError(f"target {target} out of range for {vec.shape[0]} classes")
        shifted = vec - vec.max()
        total -= shifted[int(target)] - math.log(np.exp(shifted).sum())
    return total


def _check_aligned(predictions, targets):
    if len(predictions) != len(targets):
        raise ContractError(
            f"misaligned metric inputs: {len(predictions)} predictions, {len(targets)} targets"
        )


# ------------------------------------------------------------ evaluation

@dataclass
class EvalReport:
    mse: float
    mae: float
    ce: float
    n_rallies: int
    tau: int
    n_samples: int
    seed: int
    per_rally: dict = field(default_factory=dict)

    def to_json_obj(self):
        return {
            "mse": self.mse, "mae": self.mae, "ce": self.ce,
            "n_rallies": self.n_rallies, "tau": self.tau,
            "n_samples": self.n_samples, "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))


def _rollout(ckpt: Checkpoint, rally: Rally, tau: int, rng) -> list:
    session = DecodingSession(ckpt.params, ckpt.vocab, rally, tau)
    return [session.decode_step("free", sample_rng=rng) for _ in range(len(rally.strokes) - tau)]


def evaluate(ckpt: Checkpoint, rallies, tau: int, n_samples: int = 10,
             seed: int = 0) -> EvalReport:
    """Score free-running forecasts against recorded continuations.

    Each rally is rolled out n_samples times with sampled locations and
    argmax shots; the sample with the smallest summed squared location
    error is scored.  Metric values accumulate as raw sums.
    """
    if tau < 2:
        raise ConfigurationError(f"tau must be at least 2, got {tau}")
    if n_samples < 1:
        raise ConfigurationError(f"n_samples must be positive, got {n_samples}")
    usable = _usable(rallies, tau, "evaluation")
    report = EvalReport(0.0, 0.0, 0.0, len(usable), tau, n_samples, seed)
    for rally in usable:
        norm_rally = ckpt.stats.normalize_rally(rally)
        horizon = len(rally.strokes) - tau
        truth_locs = [
            (tuple(s.loc_a), tuple(s.loc_b)) for s in rally.strokes[tau:]
        ]
        truth_classes = [
            ckpt.vocab.shot_class(rally.strokes[k - 2].shot_type)
            for k in range(tau + 1, len(rally.strokes) + 1)
        ]
        best = None
        for sample_idx in range(n_samples):
            rng = substream(seed, "eval", rally.match_id, rally.rally_id, sample_idx)
            steps = _rollout(ckpt, norm_rally, tau, rng)
            pred_locs = [
                (ckpt.stats.denormalize(*r.next_loc_a), ckpt.stats.denormalize(*r.next_loc_b))
                for r in steps
            ]
            sq = metric_mse(pred_locs, truth_locs)
            if best is None or sq < best[0]:
                best = (sq, pred_locs, steps)
        sq, pred_locs, steps = best
        mae = metric_mae(pred_locs, truth_locs)
        ce = 0.0
        for r, target in zip(steps, truth_classes):
            ce -= math.log(r.shot_probs[target])
        report.mse += sq
        report.mae += mae
        report.ce += ce
        report.per_rally[rally.rally_id] = {
            "mse": sq, "mae": mae, "ce": ce, "steps": horizon,
        }
    return report


def evaluate_seeds(ckpt: Checkpoint, rallies, tau: int, n_samples: int,
                   seeds) -> dict:
    """Run evaluate once per seed and average the three metrics."""
    seeds = list(seeds)
    if not seeds:
        raise ConfigurationError("need at least one seed")
    reports = [evaluate(ckpt, rallies, tau, n_samples, seed=s) for s in seeds]
    return {
        "seeds": seeds,
        "reports": [r.to_json_obj() for r in reports],
        "mean": {
            "mse": sum(r.mse for r in reports) / len(reports),
            "mae": sum(r.mae for r in reports) / len(reports),
            "ce": sum(r.ce for r in reports) / len(reports),
        },
    }


# -------------------------------------------------------------- ablation

def ablation_sweep(rallies, variants, tau: int, epochs: int, batch_size: int,
                   lr: float, seed: int, n_samples: int = 10) -> dict:
    """Train and evaluate each variant under identical seeds and splits."""
    variants = list(variants)
    if not variants:
        raise ConfigurationError("variant list is empty")
    for v in variants:
        if v not in VARIANTS:
            raise ConfigurationError(f"unknown variant {v!r}; choose from {', '.join(VARIANTS)}")
    train_set, test_set = split_train_test(rallies)
    if not test_set:
        test_set = train_set
    rows = []
    for variant in variants:
        run = TrainRun(seed=seed, epochs=epochs, batch_size=batch_size, tau=tau,
                       lr=lr, config=ModelConfig.for_variant(variant))
        ckpt, history = train(train_set, run)
        report = evaluate(ckpt, test_set, tau, n_samples, seed=seed)
        rows.append({
            "variant": variant,
            "parameters": ckpt.params.parameter_count(),
            "final_loss": history[-1],
            "mse": report.mse,
            "mae": report.mae,
            "ce": report.ce,
        })
    return {"tau": tau, "epochs": epochs, "seed": seed, "rows": rows}


def format_ablation_table(result: dict) -> str:
    headers = ["variant", "parameters", "final_loss", "mse", "mae", "ce"]
    body = []
    for row in result["rows"]:
        body.append([
            row["variant"], str(row["parameters"]),
            f"{row['final_loss']:.4f}", f"{row['mse']:.4f}",
            f"{row['mae']:.4f}", f"{row['ce']:.4f}",
        ])
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * widths[i] for i in range(len(headers))),
    ]
    for r in body:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(headers))))
    return "\n".join(lines)
