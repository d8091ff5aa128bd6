"""Streaming trainer: binary cross-entropy over averaged-path predictions,
day-by-day protocol (train on day t with a 9:1 split, test on day t+1,
warm-starting parameters), and the feedback loop that folds per-user
validation F1 back into the explorer's exploitation values."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import corpus, metrics
from .explorer import (
    ExplorationState,
    FriendSelection,
    init_paths,
    record_selection,
    select_friends,
    update_exploitation,
)
from .seanet import ModelDims, ModelOptions, SeanNet, SeanParams, init_params
from .socialgraph import ActivityNetwork, RewardTable, dynamic_pagerank, static_pagerank

PROB_EPS = 1e-7

MCTS_STRATEGIES = ("rs-f1", "spr", "dpr", "payout")
RANDOM_STRATEGIES = ("random-select", "random-walk")


@dataclass
class RunConfig:
    """Everything a stream run needs; defaults follow the reference setup."""

    days: int | None = None
    epochs_per_day: int = 3
    batch_size: int = 128
    lr: float = 1e-3
    beam_width: int = 3
    depth: int = 10
    lam: float = 1.0
    strategy: str = "rs-f1"
    seed: int = 0
    threshold: float = 0.5
    split_ratio: float = 0.9
    hidden: int = 64
    filters: int = 50
    windows: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    dropout: float = 0.2
    leaky_slope: float = 0.01
    social: str = "attention"  # attention | mean | none
    one_hop: bool = False
    use_cnn: bool = True
    use_gru: bool = True
    init_mode: str = "random_select"
    neg_cap_per_user_day: int | None = None
    payout_window_days: int | None = None
    warm_start: bool = True
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_sentences: int = 30
    max_tokens: int = 100
    resume_state: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["windows"] = list(self.windows)
        return d

    def validate(self) -> None:
        if self.strategy not in MCTS_STRATEGIES + RANDOM_STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.social not in ("attention", "mean", "none"):
            raise ValueError(f"unknown social mode {self.social!r}")
        if self.epochs_per_day < 1 or self.batch_size < 1:
            raise ValueError("epochs_per_day and batch_size must be >= 1")
        if self.beam_width < 1 or self.depth < 1:
            raise ValueError("beam_width and depth must be >= 1")


@dataclass
class DailyReport:
    """Metrics for one test day; None marks a metric undefined that day."""

    day: int
    n_samples: int
    n_positive: int
    auc: float | None
    f1: float | None
    gini: float | None
    cc: float | None
    impressions: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "day": self.day,
                "n_samples": self.n_samples,
                "n_positive": self.n_positive,
                "auc": self.auc,
                "f1": self.f1,
                "gini": self.gini,
                "cc": self.cc,
                "impressions": {k: self.impressions[k] for k in sorted(self.impressions)},
            },
            sort_keys=True,
        )


def bce_loss(p: float, y: int) -> float:
    """Binary cross-entropy with p clamped to [1e-7, 1 - 1e-7]."""
    pc = min(max(p, PROB_EPS), 1.0 - PROB_EPS)
    return -(y * math.log(pc) + (1 - y) * math.log(1.0 - pc))


def bce_grad(p: float, y: int) -> float:
    """dLoss/dp for one sample; 0 in the clamped region."""
    if p <= PROB_EPS or p >= 1.0 - PROB_EPS:
        return 0.0
    return (p - y) / (p * (1.0 - p))


def batch_bce(preds, labels) -> float:
    """Mean BCE over a batch."""
    return float(np.mean([bce_loss(p, y) for p, y in zip(preds, labels, strict=True)]))


class Adam:
    """Adaptive-moment gradient descent over a named tensor dict."""

    def __init__(self, params: SeanParams, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.tensors.items()}

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.b1**self.t
        bc2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            m = self.m[k]
            v = self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            tensors[k] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def _seed_for(base: int, *parts) -> int:
    keys = [base]
    for p in parts:
        keys.append(p if isinstance(p, int) else zlib.crc32(str(p).encode()))
    return int(np.random.SeedSequence(keys).generate_state(1)[0])


def _select_for_user(
    u: str,
    world: corpus.World,
    state: ExplorationState,
    config: RunConfig,
    rewards: RewardTable,
    day: int,
    eval_mode: bool = False,
) -> FriendSelection:
    if config.social == "none":
        return FriendSelection(owner=u, paths=((u,),))
    if config.one_hop:
        return FriendSelection(owner=u, paths=((u,) + world.graph.neighbors(u),))
    if config.strategy in RANDOM_STRATEGIES:
        mode = "random_select" if config.strategy == "random-select" else "random_walk"
        seed = _seed_for(config.seed, "sel-eval" if eval_mode else "sel", day, u)
        paths = init_paths(u, config.beam_width, config.depth, mode, world.graph, seed)
        return FriendSelection(owner=u, paths=tuple(tuple(p) for p in paths))
    return select_friends(u, config.beam_width, config.depth, world.graph, state, rewards)


def _friend_idx_lists(sel: FriendSelection, user_index: dict[str, int]) -> list[list[int]]:
    return [[user_index[v] for v in path[1:]] for path in sel.paths]


def day_reward_table(
    world: corpus.World,
    state: ExplorationState,
    config: RunConfig,
    day: int,
    spr_table: RewardTable | None,
    activity: ActivityNetwork | None,
) -> RewardTable:
    if config.strategy == "rs-f1":
        return state.reward_table()
    if config.strategy == "spr":
        assert spr_table is not None
        return spr_table
    if config.strategy == "dpr":
        assert activity is not None
        return dynamic_pagerank(day, activity)
    if config.strategy == "payout":
        return world.payouts.table(world.users, day, config.payout_window_days)
    return RewardTable({}, source="none")


def train_day(
    t: int,
    world: corpus.World,
    net: SeanNet,
    opt: Adam,
    state: ExplorationState,
    config: RunConfig,
    rewards: RewardTable,
) -> dict:
    """One day of the protocol: select friends per user, train on the day's
    9:1 train split with averaged-path forwards, then score the held-out split
    per user and feed F1 signals to the explorer (rs-f1 strategy)."""
    samples = corpus.build_day_samples(
        t, world.logs, world.graph, seed=_seed_for(config.seed, "samples", t),
        neg_cap_per_user_day=config.neg_cap_per_user_day,
    )
    stats = {"day": t, "n_train": 0, "n_val": 0, "epoch_losses": [], "n_pos": 0}
    if not samples:
        return stats
    train, val = corpus.split_train_val(
        samples, config.split_ratio, seed=_seed_for(config.seed, "split", t)
    )
    stats["n_train"], stats["n_val"] = len(train), len(val)
    stats["n_pos"] = sum(s.label for s in samples)

    users_today = sorted({s.user for s in samples})
    sel_cache: dict[str, list[list[int]]] = {}
    for u in users_today:
        sel = _select_for_user(u, world, state, config, rewards, t)
        state.paths[u] = [list(p) for p in sel.paths]
        if config.strategy in MCTS_STRATEGIES and config.social != "none" and not config.one_hop:
            record_selection(sel, state)
        sel_cache[u] = _friend_idx_lists(sel, world.user_index)

    drop_rng = np.random.default_rng(_seed_for(config.seed, "dropout", t))
    for epoch in range(config.epochs_per_day):
        order = np.random.default_rng(_seed_for(config.seed, "order", t, epoch)).permutation(
            len(train)
        )
        losses = []
        for start in range(0, len(train), config.batch_size):
            batch = [train[i] for i in order[start : start + config.batch_size]]
            grads = net.params.zero_grads()
            batch_loss = 0.0
            for s in batch:
                uidx = world.user_index[s.user]
                p, cache = net.forward(uidx, sel_cache[s.user], world.docs.get(s.doc_id), rng=drop_rng)
                batch_loss += bce_loss(p, s.label)
                net.backward(cache, bce_grad(p, s.label) / len(batch), grads)
            opt.step(net.params.tensors, grads)
            losses.append(batch_loss / len(batch))
        stats["epoch_losses"].append(float(np.mean(losses)) if losses else None)

    if config.strategy == "rs-f1" and val:
        by_user: dict[str, list] = {}
        for s in val:
            by_user.setdefault(s.user, []).append(s)
        for u in sorted(by_user):
            group = by_user[u]
            preds = [
                net.predict(world.user_index[u], sel_cache[u], world.docs.get(s.doc_id))
                for s in group
            ]
            signal = metrics.f1(preds, [s.label for s in group], config.threshold)
            if signal is not None:
                update_exploitation(u, signal, state)
    return stats


def evaluate_day(
    t: int,
    world: corpus.World,
    net: SeanNet,
    state: ExplorationState,
    config: RunConfig,
    rewards: RewardTable,
) -> DailyReport:
    """Score day t's samples with read-only friend selection (no visit count
    or exploitation updates) and compute the day's metrics."""
    samples = corpus.build_day_samples(
        t, world.logs, world.graph, seed=_seed_for(config.seed, "samples", t),
        neg_cap_per_user_day=config.neg_cap_per_user_day,
    )
    if not samples:
        return DailyReport(t, 0, 0, None, None, None, None, {})

    sel_cache: dict[str, list[list[int]]] = {}
    preds, labels, triples = [], [], []
    for s in samples:
        if s.user not in sel_cache:
            sel = _select_for_user(s.user, world, state, config, rewards, t, eval_mode=True)
            sel_cache[s.user] = _friend_idx_lists(sel, world.user_index)
        p = net.predict(world.user_index[s.user], sel_cache[s.user], world.docs.get(s.doc_id))
        preds.append(p)
        labels.append(s.label)
        triples.append((s.user, s.doc_id, p))

    f1_day = metrics.f1(preds, labels, config.threshold)
    auc_day = metrics.auc(preds, labels)
    ledger = metrics.record_impressions(triples, world.docs, config.threshold)
    gini_day = metrics.gini(ledger.values()) if ledger.counts else None
    cc_day = metrics.cc(f1_day, gini_day) if f1_day is not None and gini_day is not None else None
    return DailyReport(
        t, len(samples), sum(labels), auc_day, f1_day, gini_day, cc_day, dict(ledger.counts)
    )


def summarize(reports: list[DailyReport]) -> dict:
    """Stream-level aggregates: per-metric means over non-null days, plus the
    Gini of cumulative impressions over the whole test period."""

    def mean_of(key):
        vals = [getattr(r, key) for r in reports if getattr(r, key) is not None]
        return float(np.mean(vals)) if vals else None

    cum = metrics.ImpressionLedger()
    for r in reports:
        cum.merge(metrics.ImpressionLedger(r.impressions))
    gini_cum = metrics.gini(cum.values()) if cum.counts else None
    avg_f1 = mean_of("f1")
    summary = {
        "n_test_days": len(reports),
        "n_null_days": sum(1 for r in reports if r.f1 is None),
        "n_samples": sum(r.n_samples for r in reports),
        "n_positive": sum(r.n_positive for r in reports),
        "avg_auc": mean_of("auc"),
        "avg_f1": avg_f1,
        "avg_gini_daily": mean_of("gini"),
        "avg_cc_daily": mean_of("cc"),
        "gini_cumulative": gini_cum,
        "cc_stream": (
            metrics.cc(avg_f1, gini_cum) if avg_f1 is not None and gini_cum is not None else None
        ),
        "total_impressions": cum.total(),
    }
    return summary


def run_stream(world: corpus.World, config: RunConfig, out_dir: str | Path | None = None):
    """Run the full day-by-day protocol and return (reports, summary).

    Day t is trained, day t+1 scored, for every t with a successor inside the
    configured horizon. With `warm_start` (default) parameters carry over
    between days; otherwise they are re-initialized daily.
    """
    config.validate()
    T = world.n_days if config.days is None else min(config.days, world.n_days)
    if T < 2:
        raise ValueError(f"stream needs >= 2 days, got {T}")

    dims = ModelDims(
        n_users=len(world.users),
        embed_dim=world.vocab.dim,
        hidden=config.hidden,
        filters=config.filters,
        windows=tuple(config.windows),
    )
    options = ModelOptions(
        use_cnn=config.use_cnn,
        use_gru=config.use_gru,
        social="mean" if config.social == "mean" else "attention",
        dropout=config.dropout,
        leaky_slope=config.leaky_slope,
    )
    params = init_params(_seed_for(config.seed, "params"), dims, options)
    net = SeanNet(params, world.vocab)
    opt = Adam(params, config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps)

    if config.resume_state:
        state = ExplorationState.load(config.resume_state, lam=config.lam, strategy=config.strategy)
    else:
        state = ExplorationState(lam=config.lam, strategy=config.strategy)
        if config.social != "none" and not config.one_hop:
            for i, u in enumerate(world.users):
                paths = init_paths(
                    u, config.beam_width, config.depth, config.init_mode, world.graph,
                    seed=_seed_for(config.seed, "init", i),
                )
                state.paths[u] = paths
                record_selection(
                    FriendSelection(owner=u, paths=tuple(tuple(p) for p in paths)), state
                )

    spr_table = static_pagerank(world.graph) if config.strategy == "spr" else None
    activity = (
        ActivityNetwork.from_logs(world.logs, world.docs, world.users)
        if config.strategy == "dpr"
        else None
    )

    reports: list[DailyReport] = []
    day_stats: list[dict] = []
    for t in range(T - 1):
        if not config.warm_start and t > 0:
            params = init_params(_seed_for(config.seed, "params"), dims, options)
            net = SeanNet(params, world.vocab)
            opt = Adam(params, config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps)
        rewards = day_reward_table(world, state, config, t, spr_table, activity)
        day_stats.append(train_day(t, world, net, opt, state, config, rewards))
        rewards = day_reward_table(world, state, config, t, spr_table, activity)
        reports.append(evaluate_day(t + 1, world, net, state, config, rewards))

    summary = summarize(reports)
    summary["n_train_days"] = T - 1
    if out_dir is not None:
        write_artifacts(Path(out_dir), config, reports, summary, state, net.params, day_stats)
    return reports, summary


# ----- artifacts -----

def _config_line(config: RunConfig) -> str:
    return json.dumps(config.to_dict(), sort_keys=True)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_artifacts(
    out_dir: Path,
    config: RunConfig,
    reports: list[DailyReport],
    summary: dict,
    state: ExplorationState,
    params: SeanParams,
    day_stats: list[dict],
) -> None:
    """Emit the run's full artifact set; every file embeds the resolved
    config so results remain auditable."""
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = _config_line(config)

    (out_dir / "config.json").write_text(cfg + "\n")

    with open(out_dir / "reports.jsonl", "w") as fh:
        fh.write(json.dumps({"config": config.to_dict()}, sort_keys=True) + "\n")
        for r in reports:
            fh.write(r.to_json() + "\n")

    cols = ["day", "n_samples", "n_positive", "auc", "f1", "gini", "cc"]
    with open(out_dir / "daily.csv", "w") as fh:
        fh.write(f"# config: {cfg}\n")
        fh.write(",".join(cols) + "\n")
        for r in reports:
            fh.write(",".join(_fmt(getattr(r, c)) for c in cols) + "\n")

    keys = sorted(summary)
    with open(out_dir / "summary.csv", "w") as fh:
        fh.write(f"# config: {cfg}\n")
        fh.write(",".join(keys) + "\n")
        fh.write(",".join(_fmt(summary[k]) for k in keys) + "\n")

    cum = metrics.ImpressionLedger()
    for r in reports:
        cum.merge(metrics.ImpressionLedger(r.impressions))
    with open(out_dir / "impressions.tsv", "w") as fh:
        fh.write(f"# config: {cfg}\n")
        for creator in sorted(cum.counts):
            fh.write(f"{creator}\t{cum.counts[creator]}\n")

    state.save(out_dir / "explorer_state.jsonl", config=config.to_dict())
    params.save(out_dir / "params.npz")

    with open(out_dir / "train_log.jsonl", "w") as fh:
        fh.write(json.dumps({"config": config.to_dict()}, sort_keys=True) + "\n")
        for st in day_stats:
            fh.write(json.dumps(st, sort_keys=True) + "\n")
