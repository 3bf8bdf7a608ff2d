"""Player-movement graphs: one node per player per stroke, typed edges.

For each stroke transition t-1 -> t the graph carries three edges:

* a cross-side edge from the previous hitter's node at t-1 to the
  current hitter's node at t, typed by the shot that flew between them;
* a same-side "defend" edge tracking the previous hitter's move from
  hitting stance into defense;
* a same-side "return" edge tracking the current hitter's move from
  defense into the new hitting stance.

During decoding the graph grows in a fixed rhythm per predicted stroke:
begin (new hitter node + return edge), commit the predicted shot (new
defender node + defend and shot edges), then complete the step.  A
small phase machine enforces that rhythm.
"""

from __future__ import annotations

import enum

import numpy as np

from .data import SERVE_TYPES, SHOT_TYPES, Stroke, hitter
from .errors import ContractError, StateError

__all__ = [
    "RelationType",
    "SHOT_RELATIONS",
    "ALL_RELATIONS",
    "Phase",
    "PMGraph",
    "build_encoder_graph",
]


class RelationType(enum.Enum):
    """Edge labels: the ten shot types plus movement and dummy relations."""

    NET_SHOT = "net shot"
    LOB = "lob"
    DEFENSIVE_SHOT = "defensive shot"
    SMASH = "smash"
    DROP = "drop"
    PUSH_RUSH = "push/rush"
    SHORT_SERVICE = "short service"
    CLEAR = "clear"
    DRIVE = "drive"
    LONG_SERVICE = "long service"
    DEFEND = "defend"
    RETURN = "return"
    DUMMY = "dummy"

    @classmethod
    def from_shot(cls, shot_type: str) -> "RelationType":
        if shot_type not in SHOT_TYPES:
            raise ContractError(f"{shot_type!r} is not a shot type")
        return cls(shot_type)

    @property
    def is_shot(self) -> bool:
        return self.value in _SHOT_NAMES

    @property
    def is_serve(self) -> bool:
        return self.value in SERVE_TYPES


_SHOT_NAMES = frozenset(SHOT_TYPES)
SHOT_RELATIONS = tuple(RelationType(name) for name in SHOT_TYPES)
ALL_RELATIONS = tuple(RelationType)


class Phase(enum.Enum):
    """Decoder lifecycle of a graph."""

    READY = "ready"
    SHOT_PENDING = "shot_pending"
    LOCATION_PENDING = "location_pending"


class PMGraph:
    """Undirected multigraph over (side, stroke) nodes with typed edges."""

    def __init__(self) -> None:
        self.sides: list = []  # node_id -> "a" | "b"
        self.times: list = []  # node_id -> stroke number
        self.edges: list = []  # (node_id, node_id, RelationType)
        self.phase = Phase.READY
        self._index: dict = {}
        self._length = 0  # highest stroke number with at least one node
        self._dummy_pairs: set = set()

    # ------------------------------------------------------------ queries

    @property
    def n_nodes(self) -> int:
        return len(self.sides)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def length(self) -> int:
        """Highest stroke number present in the graph."""
        return self._length

    def has_node(self, side: str, t: int) -> bool:
        return (side, t) in self._index

    def node_id(self, side: str, t: int) -> int:
        try:
            return self._index[(side, t)]
        except KeyError:
            raise ContractError(f"no node for side {side!r} at stroke {t}") from None

    def edge_count_by_relation(self) -> dict:
        counts: dict = {}
        for _, _, rel in self.edges:
            counts[rel] = counts.get(rel, 0) + 1
        return counts

    def relations_present(self) -> tuple:
        seen = []
        for _, _, rel in self.edges:
            if rel not in seen:
                seen.append(rel)
        return tuple(seen)

    def adjacency(self, relation: RelationType) -> np.ndarray:
        """Symmetric integer adjacency (as float64) for one relation."""
        n = self.n_nodes
        a = np.zeros((n, n), dtype=np.float64)
        for i, j, rel in self.edges:
            if rel is relation:
                a[i, j] += 1.0
                a[j, i] += 1.0
        return a

    # ----------------------------------------------------------- mutation

    def _add_node(self, side: str, t: int) -> int:
        if side not in ("a", "b"):
            raise ContractError(f"side must be 'a' or 'b', got {side!r}")
        if t < 1:
            raise ContractError(f"stroke numbers are 1-based, got {t}")
        if (side, t) in self._index:
            raise ContractError(f"node ({side}, {t}) already exists")
        node_id = len(self.sides)
        self.sides.append(side)
        self.times.append(t)
        self._index[(side, t)] = node_id
        if t > self._length:
            self._length = t
        return node_id

    def _add_edge(self, i: int, j: int, rel: RelationType) -> None:
        n = self.n_nodes
        if not (0 <= i < n and 0 <= j < n):
            raise ContractError(f"edge endpoints ({i}, {j}) out of range for {n} nodes")
        self.edges.append((i, j, rel))

    # ------------------------------------------------------ decoder steps

    def decoder_begin_step(self) -> int:
        """Open stroke k = length + 1: new hitter node plus its return edge.

        Returns the stroke number k.  Requires a completed graph (phase
        READY) covering at least one stroke per side.
        """
        if self.phase is not Phase.READY:
            raise StateError(f"cannot begin a step while phase is {self.phase.value}")
        k = self._length + 1
        side = hitter(k)
        if not self.has_node(side, k - 1):
            raise StateError(f"cannot extend: node ({side}, {k - 1}) is missing")
        new_id = self._add_node(side, k)
        self._add_edge(self.node_id(side, k - 1), new_id, RelationType.RETURN)
        self.phase = Phase.SHOT_PENDING
        return k

    def decoder_commit_shot(self, shot: RelationType) -> int:
        """Commit the predicted shot for the open stroke k.

        Adds the defender node at k, its defend edge, and the cross-side
        shot edge from (hitter(k-1), k-1) to (hitter(k), k) typed by the
        committed shot.  Serves are never legal here: the open stroke is
        at least 2.  Returns the new node's id.
        """
        if self.phase is not Phase.SHOT_PENDING:
            raise StateError(f"cannot commit a shot while phase is {self.phase.value}")
        if not isinstance(shot, RelationType) or not shot.is_shot:
            raise ContractError(f"committed edge must be a shot relation, got {shot!r}")
        if shot.is_serve:
            raise ContractError(f"serve type {shot.value!r} cannot occur after stroke 1")
        k = self._length
        prev_side = hitter(k - 1)
        new_id = self._add_node(prev_side, k)
        self._add_edge(self.node_id(prev_side, k - 1), new_id, RelationType.DEFEND)
        self._add_edge(self.node_id(prev_side, k - 1), self.node_id(hitter(k), k), shot)
        self.phase = Phase.LOCATION_PENDING
        return new_id

    def decoder_complete_step(self) -> None:
        """Close the open stroke after locations were read off."""
        if self.phase is not Phase.LOCATION_PENDING:
            raise StateError(f"cannot complete a step while phase is {self.phase.value}")
        self.phase = Phase.READY

    # -------------------------------------------------------------- dummy

    def completeify(self) -> int:
        """Connect every unordered node pair with a dummy edge (idempotent).

        Returns how many dummy edges were added.  Used by the
        complete-graph model variant after every structural change.
        """
        added = 0
        n = self.n_nodes
        for i in range(n):
            for j in range(i + 1, n):
                if (i, j) not in self._dummy_pairs:
                    self._dummy_pairs.add((i, j))
                    self._add_edge(i, j, RelationType.DUMMY)
                    added += 1
        return added

    # ----------------------------------------------------------- serialize

    def serialize(self) -> str:
        """Canonical text form: sorted node and edge lines.

        Independent of insertion order, so a fully decoded graph and the
        encoder graph of the same rally serialize identically.
        """
        node_lines = sorted(f"node {s},{t}" for s, t in zip(self.sides, self.times))
        edge_lines = sorted(
            "edge {} {} {}".format(
                *sorted(
                    (
                        f"{self.sides[i]},{self.times[i]}",
                        f"{self.sides[j]},{self.times[j]}",
                    )
                ),
                rel.value,
            )
            for i, j, rel in self.edges
        )
        return "\n".join(node_lines + edge_lines)


def build_encoder_graph(strokes) -> PMGraph:
    """Build the graph for an observed prefix of strokes.

    Produces 2*tau nodes and 3*(tau-1) edges for tau strokes; edge t's
    shot label is the shot hit at stroke t-1 (the shuttle arriving at t).
    """
    strokes = list(strokes)
    tau = len(strokes)
    if tau < 1:
        raise ContractError("an encoder graph needs at least one stroke")
    for i, s in enumerate(strokes):
        if not isinstance(s, Stroke) or s.t != i + 1:
            raise ContractError(f"strokes must be numbered 1..{tau} in order")
    g = PMGraph()
    for t in range(1, tau + 1):
        g._add_node("a", t)
        g._add_node("b", t)
        if t >= 2:
            h_prev, h_cur = hitter(t - 1), hitter(t)
            shot = RelationType.from_shot(strokes[t - 2].shot_type)
            g._add_edge(g.node_id(h_prev, t - 1), g.node_id(h_prev, t), RelationType.DEFEND)
            g._add_edge(g.node_id(h_cur, t - 1), g.node_id(h_cur, t), RelationType.RETURN)
            g._add_edge(g.node_id(h_prev, t - 1), g.node_id(h_cur, t), shot)
    return g
