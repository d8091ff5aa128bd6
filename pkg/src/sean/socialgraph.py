"""Social graph storage and the reward sources used for friend exploitation:
static PageRank over the follow graph, dynamic PageRank over each day's
consumer->creator activity edges, and cumulative payouts.

Graph file: TSV `src<TAB>dst` directed edges.
Payout file: TSV `user<TAB>day<TAB>payout`.
Graphs and reward tables are immutable snapshots; concurrent readers are safe.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

import numpy as np

UserId = str

DEFAULT_DAMPING = 0.9
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200


class SocialGraph:
    """Directed follow graph with deterministic (insertion-ordered) neighbor
    lists, deduplicated and free of self-loops."""

    def __init__(self, adjacency: dict[UserId, list[UserId]]):
        self._adj: dict[UserId, tuple[UserId, ...]] = {}
        seen: dict[UserId, None] = dict.fromkeys(adjacency)
        for u, nbrs in adjacency.items():
            kept: dict[UserId, None] = {}
            for v in nbrs:
                if v != u:
                    kept.setdefault(v, None)
                    seen.setdefault(v, None)
            self._adj[u] = tuple(kept)
        for v in seen:
            self._adj.setdefault(v, ())

    @classmethod
    def from_edges(cls, edges) -> "SocialGraph":
        adj: dict[UserId, list[UserId]] = {}
        for src, dst in edges:
            adj.setdefault(src, []).append(dst)
            adj.setdefault(dst, [])
        return cls(adj)

    @property
    def users(self) -> tuple[UserId, ...]:
        return tuple(self._adj)

    @property
    def n(self) -> int:
        return len(self._adj)

    def __contains__(self, u: UserId) -> bool:
        return u in self._adj

    def neighbors(self, u: UserId) -> tuple[UserId, ...]:
        try:
            return self._adj[u]
        except KeyError:
            raise KeyError(f"unknown user {u!r}") from None


def load_graph(path: str | Path) -> SocialGraph:
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ValueError(f"{path}:{lineno}: expected `src<TAB>dst`")
            edges.append((parts[0], parts[1]))
    return SocialGraph.from_edges(edges)


@dataclass(frozen=True)
class RewardTable:
    """Per-user exploitation values; PageRank-sourced tables sum to 1."""

    values: dict[UserId, float]
    source: str

    def get(self, u: UserId) -> float:
        return self.values.get(u, 0.0)

    def save_tsv(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for u in sorted(self.values):
                fh.write(f"{u}\t{self.values[u]!r}\n")


def _pagerank(
    nodes: tuple[UserId, ...],
    edges: list[tuple[UserId, UserId]],
    damping: float,
    tol: float,
    max_iter: int,
) -> dict[UserId, float]:
    """Power iteration with uniform teleport and uniform dangling-mass
    redistribution, stopping when the L1 change drops below `tol`."""
    if not 0 < damping < 1:
        raise ValueError(f"damping must be in (0, 1), got {damping}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    n = len(nodes)
    if n == 0:
        raise ValueError("pagerank of an empty graph")
    index = {u: i for i, u in enumerate(nodes)}
    src = np.asarray([index[a] for a, _ in edges], dtype=np.intp)
    dst = np.asarray([index[b] for _, b in edges], dtype=np.intp)
    outdeg = np.bincount(src, minlength=n).astype(np.float64)
    dangling = outdeg == 0
    inv_out = np.zeros(n)
    inv_out[~dangling] = 1.0 / outdeg[~dangling]

    v = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        flow = v[src] * inv_out[src]
        new = (1.0 - damping) / n + damping * (
            np.bincount(dst, weights=flow, minlength=n) + v[dangling].sum() / n
        )
        delta = np.abs(new - v).sum()
        v = new
        if delta < tol:
            break
    return {u: float(v[i]) for u, i in index.items()}


def static_pagerank(
    g: SocialGraph,
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> RewardTable:
    """PageRank over the full follow graph, computed once per stream."""
    nodes = g.users
    edges = [(u, v) for u in nodes for v in g.neighbors(u)]
    return RewardTable(_pagerank(nodes, edges, damping, tol, max_iter), source="SPR")


class ActivityNetwork:
    """Per-day consumer->creator edges derived from that day's interactions.
    Parallel interactions collapse to a single edge."""

    def __init__(self, users: tuple[UserId, ...], edges_by_day: dict[int, tuple[tuple[UserId, UserId], ...]]):
        self.users = users
        self._edges_by_day = edges_by_day

    @classmethod
    def from_logs(cls, logs, docs, users: tuple[UserId, ...]) -> "ActivityNetwork":
        edges_by_day = {}
        for day, day_logs in logs.by_day.items():
            seen: dict[tuple[UserId, UserId], None] = {}
            for log in day_logs:
                creator = docs.creator_of(log.doc_id)
                if creator != log.user:
                    seen.setdefault((log.user, creator), None)
            edges_by_day[day] = tuple(seen)
        return cls(users, edges_by_day)

    def edges(self, day: int) -> tuple[tuple[UserId, UserId], ...]:
        return self._edges_by_day.get(day, ())


def dynamic_pagerank(
    day: int,
    activity: ActivityNetwork,
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> RewardTable:
    """PageRank over one day's activity edges; uniform on days without any."""
    edges = list(activity.edges(day))
    n = len(activity.users)
    if n == 0:
        raise ValueError("activity network has no users")
    if not edges:
        return RewardTable({u: 1.0 / n for u in activity.users}, source="DPR")
    return RewardTable(_pagerank(activity.users, edges, damping, tol, max_iter), source="DPR")


class PayoutTable:
    """Per-user payout series with prefix sums for cumulative queries."""

    def __init__(self, records: dict[UserId, list[tuple[int, float]]]):
        self._days: dict[UserId, list[int]] = {}
        self._cum: dict[UserId, list[float]] = {}
        for u, recs in records.items():
            recs = sorted(recs)
            days, cum, total = [], [], 0.0
            for day, amount in recs:
                total += amount
                days.append(day)
                cum.append(total)
            self._days[u] = days
            self._cum[u] = cum

    def payout(self, u: UserId, day: int, window_days: int | None = None) -> float:
        """Cumulative payout of `u` up to and including `day` (optionally only
        over the trailing `window_days`). Unknown users earn 0."""
        days = self._days.get(u)
        if not days:
            return 0.0
        hi = bisect_right(days, day)
        if hi == 0:
            return 0.0
        total = self._cum[u][hi - 1]
        if window_days is not None:
            lo = bisect_right(days, day - window_days)
            if lo > 0:
                total -= self._cum[u][lo - 1]
        return total

    def table(self, users, day: int, window_days: int | None = None) -> RewardTable:
        return RewardTable(
            {u: self.payout(u, day, window_days) for u in users}, source="Payout"
        )


def load_payouts(path: str | Path) -> PayoutTable:
    records: dict[UserId, list[tuple[int, float]]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected `user<TAB>day<TAB>payout`")
            user, day_s, amount_s = parts
            try:
                day, amount = int(day_s), float(amount_s)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if amount < 0 or not np.isfinite(amount):
                raise ValueError(f"{path}:{lineno}: payout must be finite and >= 0")
            records.setdefault(user, []).append((day, amount))
    return PayoutTable(records)
