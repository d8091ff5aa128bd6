"""Friend exploration: UCB1-scored, beam-constrained tree search over the
social graph.

Each target user keeps B paths of up to L higher-order friends. At every
depth the candidate pool is the union, over beams, of the beam tail's unused
neighbors, each scored by the beam's running total plus the neighbor's UCB1
value. The B best entries are popped greedily; a beam extends at most once
per depth and a node joins at most one beam per depth. Selection counts N
grow by 1/B per path membership, and exploitation values Q come either from
the per-user running mean of recommendation F1 or from an external reward
table (PageRank / payout)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .socialgraph import RewardTable, SocialGraph

UserId = str

STRATEGIES = ("rs-f1", "spr", "dpr", "payout")
INIT_MODES = ("random_select", "random_walk")


@dataclass
class ExplorationState:
    """Mutable per-stream bookkeeping: selection counts, exploitation signals,
    and the current paths of every user."""

    lam: float = 1.0
    strategy: str = "rs-f1"
    n_visits: dict[UserId, float] = field(default_factory=dict)
    q_sum: dict[UserId, float] = field(default_factory=dict)
    q_count: dict[UserId, int] = field(default_factory=dict)
    paths: dict[UserId, list[list[UserId]]] = field(default_factory=dict)

    def visits(self, u: UserId) -> float:
        return self.n_visits.get(u, 0.0)

    def exploit(self, u: UserId) -> float:
        """Running mean of the signals recorded for `u`; 0 before the first."""
        c = self.q_count.get(u, 0)
        return self.q_sum.get(u, 0.0) / c if c else 0.0

    def reward_table(self) -> RewardTable:
        return RewardTable({u: self.exploit(u) for u in self.q_count}, source="RS-F1")

    def save(self, path: str | Path, config: dict | None = None) -> None:
        """Line-delimited checkpoint enabling warm restart mid-stream.

        `Q` is the current exploitation mean; `Qn` carries the signal count a
        running mean cannot be resumed without. An optional first record
        embeds the run config for auditability.
        """
        users = sorted(set(self.n_visits) | set(self.q_count) | set(self.paths))
        with open(path, "w") as fh:
            if config is not None:
                fh.write(json.dumps({"config": config}, sort_keys=True) + "\n")
            for u in users:
                rec = {
                    "user": u,
                    "N": self.visits(u),
                    "Q": self.exploit(u),
                    "Qn": self.q_count.get(u, 0),
                    "paths": self.paths.get(u, []),
                }
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def load(cls, path: str | Path, lam: float = 1.0, strategy: str = "rs-f1") -> "ExplorationState":
        state = cls(lam=lam, strategy=strategy)
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if "user" not in rec:
                    continue
                u = rec["user"]
                if rec["N"]:
                    state.n_visits[u] = float(rec["N"])
                qn = int(rec.get("Qn", 0))
                if qn:
                    state.q_count[u] = qn
                    state.q_sum[u] = float(rec["Q"]) * qn
                if rec.get("paths"):
                    state.paths[u] = [list(p) for p in rec["paths"]]
        return state


@dataclass(frozen=True)
class FriendSelection:
    """B paths for one owner; each path starts at the owner."""

    owner: UserId
    paths: tuple[tuple[UserId, ...], ...]

    def friend_lists(self) -> list[list[UserId]]:
        """Per-path friends (owner stripped), in path order."""
        return [list(p[1:]) for p in self.paths]

    def flattened(self) -> list[UserId]:
        """All friends across paths as one multiset, in beam-then-path order."""
        return [v for p in self.paths for v in p[1:]]


def exploration_utility(parent: UserId, v: UserId, state: ExplorationState) -> float:
    """sqrt(ln N(parent) / (N(v) + 1)); 0 while the parent has been selected
    fewer than once (no confidence signal yet)."""
    n_parent = state.visits(parent)
    if n_parent < 1.0:
        return 0.0
    return math.sqrt(math.log(n_parent) / (state.visits(v) + 1.0))


def ucb1_score(v: UserId, parent: UserId, state: ExplorationState, rewards: RewardTable) -> float:
    """Exploitation value plus lam-weighted exploration utility."""
    return rewards.get(v) + state.lam * exploration_utility(parent, v, state)


def select_friends(
    u: UserId,
    B: int,
    L: int,
    g: SocialGraph,
    state: ExplorationState,
    rewards: RewardTable,
) -> FriendSelection:
    """Grow B beams to depth at most L.

    Per depth: pool every beam tail's neighbors not already on that beam,
    scored by beam total + UCB1; pop entries best-first (ties: lower user id,
    then lower beam index), extending each beam at most once and using each
    node at most once per depth. A beam whose tail has no unused neighbors
    keeps its shorter path. Reads only; counts are updated separately by
    `record_selection`.
    """
    if B < 1 or L < 1:
        raise ValueError(f"B and L must be >= 1, got B={B} L={L}")
    g.neighbors(u)  # raises for unknown users
    paths: list[list[UserId]] = [[u] for _ in range(B)]
    members: list[set[UserId]] = [{u} for _ in range(B)]
    totals = [0.0] * B

    for _depth in range(L):
        pool: list[tuple[float, UserId, int]] = []
        for b in range(B):
            tail = paths[b][-1]
            for v in g.neighbors(tail):
                if v not in members[b]:
                    pool.append((totals[b] + ucb1_score(v, tail, state, rewards), v, b))
        if not pool:
            break
        pool.sort(key=lambda e: (-e[0], e[1], e[2]))
        extended: set[int] = set()
        taken: set[UserId] = set()
        for score, v, b in pool:
            if b in extended or v in taken:
                continue
            paths[b].append(v)
            members[b].add(v)
            totals[b] = score
            extended.add(b)
            taken.add(v)
            if len(extended) == B:
                break

    return FriendSelection(owner=u, paths=tuple(tuple(p) for p in paths))


def record_selection(sel: FriendSelection, state: ExplorationState) -> None:
    """Credit every path member (owner excluded) 1/B per membership."""
    share = 1.0 / len(sel.paths)
    for v in sel.flattened():
        state.n_visits[v] = state.visits(v) + share


def update_exploitation(u: UserId, signal: float, state: ExplorationState) -> None:
    """Fold one per-day recommendation-F1 signal into u's running mean."""
    state.q_sum[u] = state.q_sum.get(u, 0.0) + signal
    state.q_count[u] = state.q_count.get(u, 0) + 1


def init_paths(
    u: UserId,
    B: int,
    L: int,
    mode: str = "random_select",
    g: SocialGraph | None = None,
    seed: int | None = None,
) -> list[list[UserId]]:
    """Seed B starting paths for `u` before any search has run.

    random_select draws L distinct users uniformly from the whole graph (no
    edge constraint); random_walk takes up to L steps over the graph, never
    stepping back onto the owner.
    """
    if mode not in INIT_MODES:
        raise ValueError(f"unknown init mode {mode!r}; expected one of {INIT_MODES}")
    if g is None:
        raise ValueError("init_paths requires the social graph")
    rng = np.random.default_rng(seed)
    others = [v for v in sorted(g.users) if v != u]
    paths = []
    for _ in range(B):
        path = [u]
        if mode == "random_select":
            k = min(L, len(others))
            if k:
                pick = rng.choice(len(others), size=k, replace=False)
                path.extend(others[i] for i in pick)
        else:
            for _step in range(L):
                candidates = [v for v in g.neighbors(path[-1]) if v != u]
                if not candidates:
                    break
                path.append(candidates[int(rng.integers(len(candidates)))])
        paths.append(path)
    return paths
