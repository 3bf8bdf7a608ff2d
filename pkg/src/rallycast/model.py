"""Encoder-decoder forecaster over player-movement graphs.

The model reads an observed rally prefix into per-node embeddings,
propagates them with a relational GCN over the movement graph, extracts
each player's evolving playing style with a convolution-plus-LSTM
pattern extractor whose hidden states act as per-step weights of a
dynamic GCN over the temporal path graph, fuses the two players' styles
through co-attention, gates style against rally context per node, and
decodes future strokes one at a time: grow the graph by the next hitter,
predict the incoming shot type, commit it as a typed edge, grow the
graph by the defender, then emit one bivariate Gaussian per player over
next positions.

Ablation switches reduce the pipeline (plain GCN instead of the dynamic
one, no player-player fusion, frozen gates, a complete-graph variant
with an extra dummy relation, and a bare relational-GCN baseline).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .data import Rally, Vocabulary, hitter
from .errors import ConfigurationError, ContractError, DimensionError
from .graph import ALL_RELATIONS, PMGraph, RelationType, build_encoder_graph
from .rng import substream
from .tensor import Tensor

# Logit value for disallowed classes: far enough below any real logit
# that softmax underflows to exactly 0, while every buffer stays finite.
MASK_LOGIT = -1.0e30

N_SHOT_CLASSES = 10
GAUSSIAN_PARAMS = 5  # mu_x, mu_y, sigma_x, sigma_y, rho
_SIGMA_LO, _SIGMA_HI = 1e-3, 1e3
_RHO_SCALE = 0.999

VARIANTS = (
    "full",
    "noDynamic",
    "noPlayerPlayer",
    "noRallyWeight",
    "noStyleWeight",
    "completeGraph",
    "rgcnPmBaseline",
)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture settings plus ablation switches."""

    d_loc: int = 16
    d_player: int = 16
    d_embed: int = 16
    gnn_layers: int = 2
    basis_count: int = 3
    kernel_size: int = 3
    dropout: float = 0.1
    no_dynamic: bool = False
    no_player_player: bool = False
    no_rally_weight: bool = False
    no_style_weight: bool = False
    complete_graph: bool = False
    rgcn_pm_baseline: bool = False

    def __post_init__(self):
        for name in ("d_loc", "d_player", "d_embed", "gnn_layers", "basis_count"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigurationError(f"kernel_size must be odd and >= 1, got {self.kernel_size}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.rgcn_pm_baseline and (
            self.no_dynamic or self.no_player_player or self.no_rally_weight or self.no_style_weight
        ):
            raise ConfigurationError(
                "rgcn_pm_baseline already removes the fusion pipeline; "
                "it cannot combine with other fusion ablations"
            )

    @classmethod
    def for_variant(cls, variant: str, **overrides) -> "ModelConfig":
        if variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {variant!r}; choose from {VARIANTS}")
        flags = {
            "noDynamic": {"no_dynamic": True},
            "noPlayerPlayer": {"no_player_player": True},
            "noRallyWeight": {"no_rally_weight": True},
            "noStyleWeight": {"no_style_weight": True},
            "completeGraph": {"complete_graph": True},
            "rgcnPmBaseline": {"rgcn_pm_baseline": True},
        }.get(variant, {})
        return cls(**{**flags, **overrides})

    @property
    def variant_name(self) -> str:
        for name, attr in (
            ("noDynamic", "no_dynamic"),
            ("noPlayerPlayer", "no_player_player"),
            ("noRallyWeight", "no_rally_weight"),
            ("noStyleWeight", "no_style_weight"),
            ("completeGraph", "complete_graph"),
            ("rgcnPmBaseline", "rgcn_pm_baseline"),
        ):
            if getattr(self, attr):
                return name
        return "full"

    def relations(self) -> tuple:
        """Relations the GCN carries coefficients for, in fixed order."""
        rels = [r for r in ALL_RELATIONS if r is not RelationType.DUMMY]
        if self.complete_graph:
            rels.append(RelationType.DUMMY)
        return tuple(rels)

    def to_json(self) -> dict:
        return {
            "d_loc": self.d_loc,
            "d_player": self.d_player,
            "d_embed": self.d_embed,
            "gnn_layers": self.gnn_layers,
            "basis_count": self.basis_count,
            "kernel_size": self.kernel_size,
            "dropout": self.dropout,
            "no_dynamic": self.no_dynamic,
            "no_player_player": self.no_player_player,
            "no_rally_weight": self.no_rally_weight,
            "no_style_weight": self.no_style_weight,
            "complete_graph": self.complete_graph,
            "rgcn_pm_baseline": self.rgcn_pm_baseline,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


class ModelParams:
    """All trainable tensors, keyed by stable dotted names.

    Shapes depend on the configuration and the player roster size; the
    player embedding carries one extra column for unseen players.
    """

    def __init__(self, config: ModelConfig, n_players: int, seed: int):
        if n_players < 1:
            raise ConfigurationError(f"n_players must be >= 1, got {n_players}")
        self.config = config
        self.n_players = n_players
        self.seed = seed
        d_l, d_p, d_e = config.d_loc, config.d_player, config.d_embed
        n_rel = len(config.relations())
        shapes: dict = {
            "embed.location": (d_l, 2),
            "embed.player": (d_p, n_players + 1),
            "embed.node": (d_e, d_l + d_p),
        }
        for layer in range(config.gnn_layers):
            shapes[f"gcn.{layer}.basis"] = (config.basis_count, d_e * d_e)
            shapes[f"gcn.{layer}.coeff"] = (n_rel, config.basis_count)
            shapes[f"gcn.{layer}.self_loop"] = (d_e, d_e)
        if not config.rgcn_pm_baseline:
            shapes["pattern.input"] = (d_e, d_e + d_p)
            if config.no_dynamic:
                shapes["plain_gcn.weight"] = (d_e, d_e)
            else:
                shapes["pattern.conv.weight"] = (d_e, d_e, config.kernel_size)
                shapes["pattern.conv.bias"] = (d_e,)
                shapes["pattern.lstm.w_ih"] = (4 * d_e, d_e)
                shapes["pattern.lstm.w_hh"] = (4 * d_e, d_e)
                shapes["pattern.lstm.bias"] = (4 * d_e,)
            if not config.no_player_player:
                shapes["fusion.affinity"] = (d_e, d_e)
                shapes["fusion.view_a"] = (d_e, d_e)
                shapes["fusion.view_b"] = (d_e, d_e)
                shapes["fusion.score_a"] = (d_e,)
                shapes["fusion.score_b"] = (d_e,)
                shapes["fusion.gate_a"] = (d_e,)
                shapes["fusion.gate_b"] = (d_e,)
            if not config.no_style_weight:
                shapes["gate.style"] = (d_e,)
            if not config.no_rally_weight:
                shapes["gate.rally"] = (d_e,)
        shapes["head.shot"] = (N_SHOT_CLASSES, 2 * d_e)
        shapes["head.location"] = (2 * GAUSSIAN_PARAMS, 2 * d_e)

        self._tensors: dict = {}
        for name, shape in shapes.items():
            if name.endswith(".bias"):
                init = np.zeros(shape)
            else:
                init = T.glorot(substream(seed, "init", name), shape)
            self._tensors[name] = T.parameter(init, name=name)

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._tensors[name]
        except KeyError:
            raise ContractError(f"no parameter named {name!r} in this configuration") from None

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def named(self) -> dict:
        return dict(self._tensors)

    def tensors(self) -> list:
        return list(self._tensors.values())

    def parameter_count(self) -> int:
        return sum(t.data.size for t in self._tensors.values())


def expected_parameter_count(config: ModelConfig, n_players: int) -> int:
    """Closed-form size of the parameter set; tests pin this against
    the live tensors so ablation deltas stay auditable."""
    d_l, d_p, d_e = config.d_loc, config.d_player, config.d_embed
    b, k = config.basis_count, config.kernel_size
    n_rel = len(config.relations())
    total = d_l * 2 + d_p * (n_players + 1) + d_e * (d_l + d_p)
    total += config.gnn_layers * (b * d_e * d_e + n_rel * b + d_e * d_e)
    if not config.rgcn_pm_baseline:
        total += d_e * (d_e + d_p)
        if config.no_dynamic:
            total += d_e * d_e
        else:
            total += d_e * d_e * k + d_e + 2 * (4 * d_e * d_e) + 4 * d_e
        if not config.no_player_player:
            total += 3 * d_e * d_e + 4 * d_e
        if not config.no_style_weight:
            total += d_e
        if not config.no_rally_weight:
            total += d_e
    total += 2 * (N_SHOT_CLASSES * 2 * d_e)
    return total


# ------------------------------------------------------------ embeddings

def embed_node(params: ModelParams, loc_xy, player_column: Tensor) -> Tensor:
    """Initial node embedding from a position and a player column."""
    loc = np.asarray(loc_xy, dtype=np.float64)
    if loc.shape != (2,):
        raise DimensionError(f"a location is a 2-vector, got shape {loc.shape}")
    loc_feat = T.relu(T.matmul(params["embed.location"], T.constant(loc)))
    return T.matmul(params["embed.node"], T.concat([loc_feat, player_column]))


def player_column(params: ModelParams, player_index: int) -> Tensor:
    w = params["embed.player"]
    if not 0 <= player_index < w.data.shape[1]:
        raise ContractError(
            f"player index {player_index} out of range for {w.data.shape[1]} embedding columns"
        )
    return T.column(w, player_index)


# -------------------------------------------------------- relational GCN

def compose_relation_weight(params: ModelParams, layer: int, relation_index: int) -> Tensor:
    """Per-relation weight as a coefficient mix of shared basis matrices."""
    d_e = params.config.d_embed
    coeff = params[f"gcn.{layer}.coeff"]
    basis = params[f"gcn.{layer}.basis"]
    if not 0 <= relation_index < coeff.data.shape[0]:
        raise ContractError(f"relation index {relation_index} out of range")
    mixed = T.matmul(T.row(coeff, relation_index), basis)
    return T.reshape(mixed, (d_e, d_e))


def relational_gcn(
    params: ModelParams,
    graph: PMGraph,
    h_rows: Tensor,
    *,
    train: bool = False,
    drop_rng=None,
) -> Tensor:
    """Run every GCN layer over the graph; rows follow graph node ids.

    Layer activations are ReLU except the last, which is sigmoid.  Each
    relation contributes messages through its composed weight; nodes
    always see themselves through the per-layer self-loop weight.
    """
    config = params.config
    n = graph.n_nodes
    if h_rows.data.shape != (n, config.d_embed):
        raise DimensionError(
            f"hidden states {h_rows.data.shape} do not match {n} nodes x d_embed {config.d_embed}"
        )
    relations = config.relations()
    adjacency = {}
    for rel in graph.relations_present():
        if rel is RelationType.DUMMY and not config.complete_graph:
            raise ContractError("graph has dummy edges but the model does not use them")
        adjacency[rel] = graph.adjacency(rel)

    z = h_rows
    for layer in range(config.gnn_layers):
        mixed = T.matmul(params[f"gcn.{layer}.coeff"], params[f"gcn.{layer}.basis"])
        acc = T.matmul(z, T.transpose(params[f"gcn.{layer}.self_loop"]))
        for r_idx, rel in enumerate(relations):
            adj = adjacency.get(rel)
            if adj is None:
                continue
            w_r = T.reshape(T.row(mixed, r_idx), (config.d_embed, config.d_embed))
            acc = T.add(acc, T.matmul(T.constant(adj), T.matmul(z, T.transpose(w_r))))
        z = T.relu(acc) if layer < config.gnn_layers - 1 else T.sigmoid(acc)
        if train and config.dropout > 0.0:
            z = T.dropout(z, config.dropout, drop_rng)
    return z


# ----------------------------------------------------- dynamic style GCN

def path_norm_adjacency(t: int) -> np.ndarray:
    """Symmetrically normalized path graph over t steps, self-loops included."""
    if t < 1:
        raise ContractError(f"path graph needs t >= 1, got {t}")
    a = np.eye(t)
    for i in range(t - 1):
        a[i, i + 1] = 1.0
        a[i + 1, i] = 1.0
    deg = a.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def pattern_inputs(params: ModelParams, embed_rows: Tensor, player_col: Tensor) -> Tensor:
    """Append the player column to each step's embedding and project."""
    t = embed_rows.data.shape[0]
    tiled = T.stack_rows([player_col] * t)
    joined = T.concat([embed_rows, tiled])
    return T.matmul(joined, T.transpose(params["pattern.input"]))


def dynamic_pattern_weights(params: ModelParams, n_rows: Tensor) -> Tensor:
    """Per-step weights: convolution over steps, then an LSTM's hidden states."""
    d_e = params.config.d_embed
    c_rows = T.conv1d_same(n_rows, params["pattern.conv.weight"], params["pattern.conv.bias"])
    h = T.constant(np.zeros(d_e))
    c = T.constant(np.zeros(d_e))
    hidden = []
    for i in range(c_rows.data.shape[0]):
        h, c = T.lstm_step(
            h, c, T.row(c_rows, i),
            params["pattern.lstm.w_ih"], params["pattern.lstm.w_hh"], params["pattern.lstm.bias"],
        )
        hidden.append(h)
    return T.stack_rows(hidden)


def dynamic_gcn(n_rows: Tensor, q_rows: Tensor) -> Tensor:
    """Propagate per-step weighted inputs over the temporal path graph."""
    if n_rows.data.shape != q_rows.data.shape:
        raise DimensionError(
            f"dynamic weights {q_rows.data.shape} do not match inputs {n_rows.data.shape}"
        )
    t = n_rows.data.shape[0]
    norm = T.constant(path_norm_adjacency(t))
    return T.relu(T.matmul(norm, T.mul(q_rows, n_rows)))


def plain_gcn(params: ModelParams, n_rows: Tensor) -> Tensor:
    """Shared-weight variant used when the dynamic weights are ablated."""
    t = n_rows.data.shape[0]
    norm = T.constant(path_norm_adjacency(t))
    return T.relu(T.matmul(norm, T.matmul(n_rows, T.transpose(params["plain_gcn.weight"]))))


def style_rows(params: ModelParams, embed_rows: Tensor, player_col: Tensor,
               *, train: bool = False, drop_rng=None) -> Tensor:
    """Full per-player style pipeline: inputs, per-step weights, path GCN."""
    n_rows = pattern_inputs(params, embed_rows, player_col)
    if params.config.no_dynamic:
        out = plain_gcn(params, n_rows)
    else:
        q_rows = dynamic_pattern_weights(params, n_rows)
        out = dynamic_gcn(n_rows, q_rows)
    if train and params.config.dropout > 0.0:
        out = T.dropout(out, params.config.dropout, drop_rng)
    return out


# ----------------------------------------------------------- fusion

def player_player_fusion(params: ModelParams, d_a: Tensor, d_b: Tensor):
    """Co-attention between the players' style matrices.

    Returns (d_prime_a, d_prime_b, f_a, f_b): each player's styles plus
    the opponent's styles scaled by the opponent's scalar influence
    gate.
    """
    if d_a.data.shape != d_b.data.shape:
        raise DimensionError(f"style shapes differ: {d_a.data.shape} vs {d_b.data.shape}")
    affinity = T.tanh(T.matmul(T.matmul(d_a, params["fusion.affinity"]), T.transpose(d_b)))
    va = T.matmul(d_a, T.transpose(params["fusion.view_a"]))
    vb = T.matmul(d_b, T.transpose(params["fusion.view_b"]))
    h_a = T.tanh(T.add(va, T.matmul(affinity, vb)))
    h_b = T.tanh(T.add(vb, T.matmul(T.transpose(affinity), va)))
    att_a = T.softmax(T.matmul(h_a, params["fusion.score_a"]))
    att_b = T.softmax(T.matmul(h_b, params["fusion.score_b"]))
    a_hat = T.matmul(att_a, d_a)
    b_hat = T.matmul(att_b, d_b)
    f_a = T.sigmoid(T.matmul(params["fusion.gate_a"], a_hat))
    f_b = T.sigmoid(T.matmul(params["fusion.gate_b"], b_hat))
    d_prime_a = T.add(T.mul(f_b, d_b), d_a)
    d_prime_b = T.add(T.mul(f_a, d_a), d_b)
    return d_prime_a, d_prime_b, f_a, f_b


def player_rally_fusion(params: ModelParams, d_row: Tensor, z_row: Tensor) -> Tensor:
    """Blend one node's style row with its rally-context row via gates."""
    config = params.config
    if config.no_style_weight:
        styled = d_row
    else:
        alpha = T.sigmoid(T.matmul(params["gate.style"], d_row))
        styled = T.mul(alpha, d_row)
    if config.no_rally_weight:
        contexted = z_row
    else:
        beta = T.sigmoid(T.matmul(params["gate.rally"], z_row))
        contexted = T.mul(beta, z_row)
    return T.add(styled, contexted)


# -------------------------------------------------------------- heads

def predict_shot(params: ModelParams, prev_hitter_vec: Tensor, new_hitter_vec: Tensor,
                 serve_classes: tuple) -> Tensor:
    """Shot-type logits for the open stroke; serve classes are masked.

    The concatenation order is (returner at k-1, returner at k), which
    alternates sides with stroke parity.
    """
    logits = T.matmul(params["head.shot"], T.concat([prev_hitter_vec, new_hitter_vec]))
    mask = np.zeros(N_SHOT_CLASSES)
    for c in serve_classes:
        mask[c] = MASK_LOGIT
    return T.add(logits, T.constant(mask))


@dataclass(frozen=True)
class BivariateGaussian:
    """A 2D Gaussian over court positions, ready for serialization."""

    mu_x: float
    mu_y: float
    sigma_x: float
    sigma_y: float
    rho: float

    def __post_init__(self):
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise ContractError(f"sigmas must be positive, got {self.sigma_x}, {self.sigma_y}")
        if not -1.0 < self.rho < 1.0:
            raise ContractError(f"correlation must be in (-1, 1), got {self.rho}")

    def nll(self, x: float, y: float) -> float:
        """Negative log density at (x, y), in the log domain throughout."""
        zx = (x - self.mu_x) / self.sigma_x
        zy = (y - self.mu_y) / self.sigma_y
        one_minus = 1.0 - self.rho * self.rho
        quad = (zx * zx - 2.0 * self.rho * zx * zy + zy * zy) / one_minus
        return (
            math.log(2.0 * math.pi)
            + math.log(self.sigma_x)
            + math.log(self.sigma_y)
            + 0.5 * math.log(one_minus)
            + 0.5 * quad
        )

    def sample(self, rng) -> tuple:
        """One draw; uses exactly two standard normals from ``rng``."""
        u = rng.standard_normal()
        v = rng.standard_normal()
        x = self.mu_x + self.sigma_x * u
        y = self.mu_y + self.sigma_y * (self.rho * u + math.sqrt(1.0 - self.rho * self.rho) * v)
        return (x, y)

    def denormalized(self, stats) -> "BivariateGaussian":
        return BivariateGaussian(
            mu_x=self.mu_x * stats.std_x + stats.mean_x,
            mu_y=self.mu_y * stats.std_y + stats.mean_y,
            sigma_x=self.sigma_x * stats.std_x,
            sigma_y=self.sigma_y * stats.std_y,
            rho=self.rho,
        )


class GaussianTensors:
    """The five distribution parameters as live tensors for the loss."""

    __slots__ = ("mu_x", "mu_y", "sigma_x", "sigma_y", "rho")

    def __init__(self, mu_x, mu_y, sigma_x, sigma_y, rho):
        self.mu_x, self.mu_y = mu_x, mu_y
        self.sigma_x, self.sigma_y = sigma_x, sigma_y
        self.rho = rho

    def snapshot(self) -> BivariateGaussian:
        return BivariateGaussian(
            self.mu_x.item(), self.mu_y.item(),
            self.sigma_x.item(), self.sigma_y.item(), self.rho.item(),
        )


def _gaussian_from_raw(raw: Tensor) -> GaussianTensors:
    # Clamping before exp keeps sigma inside [1e-3, 1e3] with no overflow;
    # the mapping equals clamping exp(raw) itself.
    mu_x = T.element(raw, 0)
    mu_y = T.element(raw, 1)
    sigma_x = T.exp(T.clamp(T.element(raw, 2), math.log(_SIGMA_LO), math.log(_SIGMA_HI)))
    sigma_y = T.exp(T.clamp(T.element(raw, 3), math.log(_SIGMA_LO), math.log(_SIGMA_HI)))
    rho = T.mul(T.tanh(T.element(raw, 4)), T.constant(_RHO_SCALE))
    return GaussianTensors(mu_x, mu_y, sigma_x, sigma_y, rho)


def predict_locations(params: ModelParams, ehat_a: Tensor, ehat_b: Tensor):
    """Two bivariate Gaussians (player A's, player B's next positions)."""
    raw = T.matmul(params["head.location"], T.concat([ehat_a, ehat_b]))
    return _gaussian_from_raw(T.segment(raw, 0, GAUSSIAN_PARAMS)), _gaussian_from_raw(
        T.segment(raw, GAUSSIAN_PARAMS, 2 * GAUSSIAN_PARAMS)
    )


# ------------------------------------------------------------- losses

def cross_entropy(logits: Tensor, target: int) -> Tensor:
    if logits.data.ndim != 1:
        raise DimensionError(f"logits must be 1D, got shape {logits.data.shape}")
    if not 0 <= target < logits.data.shape[0]:
        raise ContractError(f"target {target} out of range for {logits.data.shape[0]} classes")
    return T.neg(T.element(T.log_softmax(logits), target))


def gaussian_nll(g: GaussianTensors, x: float, y: float) -> Tensor:
    """Differentiable negative log density of one observed point."""
    dx = T.sub(T.constant(float(x)), g.mu_x)
    dy = T.sub(T.constant(float(y)), g.mu_y)
    zx = T.div(dx, g.sigma_x)
    zy = T.div(dy, g.sigma_y)
    one_minus = T.sub(T.constant(1.0), T.mul(g.rho, g.rho))
    quad = T.add(
        T.sub(T.add(T.mul(zx, zx), T.mul(zy, zy)), T.mul(T.constant(2.0), T.mul(g.rho, T.mul(zx, zy)))),
        T.constant(0.0),
    )
    return T.add(
        T.add(
            T.add(T.constant(math.log(2.0 * math.pi)), T.add(T.log(g.sigma_x), T.log(g.sigma_y))),
            T.mul(T.constant(0.5), T.log(one_minus)),
        ),
        T.mul(T.constant(0.5), T.div(quad, one_minus)),
    )


def total_loss(shot_logits, shot_targets, gaussian_pairs, location_targets) -> Tensor:
    """Shot cross-entropy plus half the location NLL of each player.

    The four sequences must align one-to-one over the decoded steps.
    """
    n = len(shot_logits)
    if not (len(shot_targets) == len(gaussian_pairs) == len(location_targets) == n):
        raise ContractError(
            "misaligned loss inputs: "
            f"{n} logits, {len(shot_targets)} targets, "
            f"{len(gaussian_pairs)} gaussian pairs, {len(location_targets)} location targets"
        )
    if n == 0:
        raise ContractError("loss needs at least one decoded step")
    loss = None
    for logits, target in zip(shot_logits, shot_targets):
        term = cross_entropy(logits, target)
        loss = term if loss is None else T.add(loss, term)
    for (g_a, g_b), ((ax, ay), (bx, by)) in zip(gaussian_pairs, location_targets):
        term = T.add(gaussian_nll(g_a, ax, ay), gaussian_nll(g_b, bx, by))
        loss = T.add(loss, T.mul(T.constant(0.5), term))
    return loss


# ------------------------------------------------------------- sessions

@dataclass
class StepResult:
    """Everything one decode step produced."""

    k: int
    logits: Tensor
    shot_probs: np.ndarray
    committed_class: int
    gaussian_a: GaussianTensors
    gaussian_b: GaussianTensors
    next_loc_a: tuple
    next_loc_b: tuple


class DecodingSession:
    """Runs one rally through the encoder and then step-by-step decoding.

    The session owns the growing graph, the per-node initial embeddings,
    and the per-node propagated embeddings that persist between steps.
    All coordinates are expected in normalized space.
    """

    def __init__(
        self,
        params: ModelParams,
        vocab: Vocabulary,
        rally: Rally,
        observed: int,
        *,
        train: bool = False,
        drop_rng=None,
        player_indices: dict | None = None,
    ):
        if observed < 2:
            raise ContractError(f"decoding needs at least 2 observed strokes, got {observed}")
        if len(rally.strokes) < observed:
            raise ContractError(
                f"rally {rally.rally_id!r} has {len(rally.strokes)} strokes, observed={observed}"
            )
        if train and params.config.dropout > 0.0 and drop_rng is None:
            raise ContractError("training mode with dropout needs a dropout stream")
        self.params = params
        self.config = params.config
        self.vocab = vocab
        self.rally = rally
        self.observed = observed
        self.train = train
        self.drop_rng = drop_rng
        if player_indices is None:
            player_indices = {
                "a": vocab.player_index(rally.player_a),
                "b": vocab.player_index(rally.player_b),
            }
        self.player_col = {
            side: player_column(params, idx) for side, idx in player_indices.items()
        }
        self.graph = build_encoder_graph(rally.strokes[:observed])
        if self.config.complete_graph:
            self.graph.completeify()
        self.e_node: dict = {}
        self.ehat_node: dict = {}
        s_last = rally.strokes[observed - 1]
        self.last_loc = {"a": tuple(s_last.loc_a), "b": tuple(s_last.loc_b)}
        self._encode()

    # -- internals

    def _embed(self, side: str, loc) -> Tensor:
        e = embed_node(self.params, loc, self.player_col[side])
        if self.train and self.config.dropout > 0.0:
            e = T.dropout(e, self.config.dropout, self.drop_rng)
        return e

    def _gcn_rows(self) -> Tensor:
        """Relational GCN over the current graph; hidden states start from
        the persisted embeddings where they exist, else the initial ones."""
        g = self.graph
        rows = []
        for node in range(g.n_nodes):
            rows.append(self.ehat_node.get(node, self.e_node[node]))
        h = T.stack_rows(rows)
        return relational_gcn(self.params, g, h, train=self.train, drop_rng=self.drop_rng)

    def _style_matrix(self, side: str, upto: int) -> Tensor:
        """Style rows for steps 1..upto of one player.

        Steps with a persisted propagated embedding contribute it; steps
        without one (the newest nodes) contribute their initial
        embedding, the same rule the relational GCN uses.
        """
        rows = []
        for t in range(1, upto + 1):
            node = self.graph.node_id(side, t)
            rows.append(self.ehat_node.get(node, self.e_node[node]))
        return style_rows(
            self.params, T.stack_rows(rows), self.player_col[side],
            train=self.train, drop_rng=self.drop_rng,
        )

    def _fused_rows(self, upto: int, z_rows: Tensor, targets) -> dict:
        """Propagated embeddings for the (side, t) pairs in ``targets``."""
        if self.config.rgcn_pm_baseline:
            return {
                (side, t): T.row(z_rows, self.graph.node_id(side, t)) for side, t in targets
            }
        d = {"a": self._style_matrix("a", upto), "b": self._style_matrix("b", upto)}
        if self.config.no_player_player:
            d_prime = d
        else:
            dpa, dpb, _, _ = player_player_fusion(self.params, d["a"], d["b"])
            d_prime = {"a": dpa, "b": dpb}
        out = {}
        for side, t in targets:
            z_row = T.row(z_rows, self.graph.node_id(side, t))
            out[(side, t)] = player_rally_fusion(self.params, T.row(d_prime[side], t - 1), z_row)
        return out

    def _encode(self) -> None:
        strokes = self.rally.strokes
        for t in range(1, self.observed + 1):
            s = strokes[t - 1]
            self.e_node[self.graph.node_id("a", t)] = self._embed("a", s.loc_a)
            self.e_node[self.graph.node_id("b", t)] = self._embed("b", s.loc_b)
        z_rows = self._gcn_rows()
        if self.config.rgcn_pm_baseline:
            for node in range(self.graph.n_nodes):
                self.ehat_node[node] = T.row(z_rows, node)
            return
        # Styles are prefix-causal: step t's fused embedding sees only
        # strokes 1..t, matching what decoding would have produced.
        for t in range(1, self.observed + 1):
            fused = self._fused_rows(t, z_rows, [("a", t), ("b", t)])
            for key, value in fused.items():
                self.ehat_node[self.graph.node_id(*key)] = value

    # -- public stepping

    def decode_step(self, mode: str, sample_rng=None, shot_override: int | None = None) -> StepResult:
        """Advance one stroke; ``mode`` is "teacher" or "free".

        Teacher mode commits the recorded shot and feeds recorded
        locations forward; free mode commits the argmax shot (or
        ``shot_override``) and feeds sampled locations (or the means
        when no sampling stream is given).
        """
        if mode not in ("teacher", "free"):
            raise ContractError(f"mode must be 'teacher' or 'free', got {mode!r}")
        strokes = self.rally.strokes
        k = self.graph.length + 1
        if mode == "teacher" and len(strokes) < k:
            raise ContractError(f"rally ends at {len(strokes)}; cannot teacher-force stroke {k}")

        new_hitter = hitter(k)
        prev_hitter = hitter(k - 1)
        self.graph.decoder_begin_step()
        if self.config.complete_graph:
            self.graph.completeify()
        node_new = self.graph.node_id(new_hitter, k)
        self.e_node[node_new] = self._embed(new_hitter, self.last_loc[new_hitter])

        z_mid = self._gcn_rows()
        logits = predict_shot(
            self.params,
            self.ehat_node[self.graph.node_id(prev_hitter, k - 1)],
            T.row(z_mid, node_new),
            self.vocab.serve_classes(),
        )
        shot_probs = T.softmax(logits).data.copy()

        if mode == "teacher":
            committed = self.vocab.shot_class(strokes[k - 2].shot_type)
        elif shot_override is not None:
            if not 0 <= shot_override < N_SHOT_CLASSES:
                raise ContractError(f"shot class {shot_override} out of range")
            committed = int(shot_override)
        else:
            committed = int(np.argmax(logits.data))

        self.graph.decoder_commit_shot(RelationType.from_shot(self.vocab.class_name(committed)))
        if self.config.complete_graph:
            self.graph.completeify()
        node_prev_side = self.graph.node_id(prev_hitter, k)
        self.e_node[node_prev_side] = self._embed(prev_hitter, self.last_loc[prev_hitter])

        z_full = self._gcn_rows()
        fused = self._fused_rows(
            k, z_full, [("a", k - 1), ("b", k - 1), ("a", k), ("b", k)]
        )
        g_a, g_b = predict_locations(self.params, fused[("a", k)], fused[("b", k)])

        for key, value in fused.items():
            self.ehat_node[self.graph.node_id(*key)] = value
        self.graph.decoder_complete_step()

        if mode == "teacher":
            s = strokes[k - 1]
            next_a, next_b = tuple(s.loc_a), tuple(s.loc_b)
        elif sample_rng is not None:
            next_a = g_a.snapshot().sample(sample_rng)
            next_b = g_b.snapshot().sample(sample_rng)
        else:
            next_a = (g_a.mu_x.item(), g_a.mu_y.item())
            next_b = (g_b.mu_x.item(), g_b.mu_y.item())
        self.last_loc = {"a": next_a, "b": next_b}

        return StepResult(
            k=k,
            logits=logits,
            shot_probs=shot_probs,
            committed_class=committed,
            gaussian_a=g_a,
            gaussian_b=g_b,
            next_loc_a=next_a,
            next_loc_b=next_b,
        )


def teacher_forced_loss(params: ModelParams, vocab: Vocabulary, rally: Rally, observed: int,
                        *, train: bool = False, drop_rng=None,
                        player_indices: dict | None = None) -> tuple:
    """Loss over a full rally with recorded shots and positions fed forward.

    Returns (loss tensor, list of StepResult).  The rally must extend
    past the observed prefix.
    """
    if len(rally.strokes) <= observed:
        raise ContractError(
            f"rally {rally.rally_id!r} has no strokes to decode beyond {observed}"
        )
    session = DecodingSession(params, vocab, rally, observed, train=train, drop_rng=drop_rng,
                              player_indices=player_indices)
    results = []
    logits_list, targets, gaussians, locations = [], [], [], []
    for k in range(observed + 1, len(rally.strokes) + 1):
        res = session.decode_step("teacher")
        results.append(res)
        s = rally.strokes[k - 1]
        logits_list.append(res.logits)
        targets.append(vocab.shot_class(rally.strokes[k - 2].shot_type))
        gaussians.append((res.gaussian_a, res.gaussian_b))
        locations.append((tuple(s.loc_a), tuple(s.loc_b)))
    return total_loss(logits_list, targets, gaussians, locations), results
