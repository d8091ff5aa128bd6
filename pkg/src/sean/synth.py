"""Seeded synthetic worlds: a homophilous follow graph over consumers and
creators with latent topics, topical documents drawn from Zipf token
distributions, comment logs driven by topic match (own topic, or a friend's
topic at damped probability), payouts proportional to received comments, and
topic-clustered unit-vector token embeddings.

Creators follow only creators, so they never produce negative samples (they
comment on nothing); consumers follow a homophily-weighted mix of consumers
and creators. A fraction of consumers is low-activity, which leaves their
reading history thin and their friends informative.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np


@dataclass
class WorldConfig:
    n_consumers: int = 300
    n_creators: int = 200
    n_days: int = 20
    topics: int = 4
    homophily: float = 0.8
    docs_per_day: int = 12
    vocab_per_topic: int = 80
    shared_vocab: int = 40
    read_prob_own_topic: float = 0.65
    read_prob_other_topic: float = 0.02
    friend_topic_damping: float = 0.5
    sentences_per_doc: tuple[int, int] = (3, 5)
    tokens_per_sentence: tuple[int, int] = (8, 16)
    consumer_out_degree: tuple[int, int] = (4, 12)
    creator_out_degree: tuple[int, int] = (1, 4)
    creator_follow_frac: float = 0.4
    low_activity_frac: float = 0.3
    low_activity_scale: float = 0.35
    staggered_entry_frac: float = 0.5
    entry_span_frac: float = 0.6
    embed_dim: int = 16
    zipf_exponent: float = 1.05
    shared_token_prob: float = 0.25
    cross_topic_token_prob: float = 0.15
    embed_noise: float = 0.6
    payout_per_comment: float = 0.05
    payout_noise: float = 0.02
    seed: int = 0

    def validate(self) -> None:
        for name in ("n_consumers", "n_creators", "n_days", "topics", "docs_per_day",
                     "vocab_per_topic", "embed_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("homophily", "read_prob_own_topic", "read_prob_other_topic",
                     "friend_topic_damping", "creator_follow_frac", "low_activity_frac",
                     "low_activity_scale", "shared_token_prob", "cross_topic_token_prob",
                     "staggered_entry_frac", "entry_span_frac"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        for name in ("sentences_per_doc", "tokens_per_sentence",
                     "consumer_out_degree", "creator_out_degree"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ValueError(f"{name} must be an ordered range of positives")

    def to_dict(self) -> dict:
        d = asdict(self)
        for name in ("sentences_per_doc", "tokens_per_sentence",
                     "consumer_out_degree", "creator_out_degree"):
            d[name] = list(d[name])
        return d


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _zipf_weights(n: int, exponent: float) -> np.ndarray:
    w = (np.arange(1, n + 1, dtype=np.float64)) ** (-exponent)
    return w / w.sum()


def generate_world(cfg: WorldConfig, out_dir: str | Path) -> dict:
    """Write documents/interactions/graph/payouts/embeddings (+ meta.json)
    into out_dir. Byte-identical for identical configs."""
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)

    consumers = [f"c{i:04d}" for i in range(cfg.n_consumers)]
    creators = [f"k{i:04d}" for i in range(cfg.n_creators)]
    topic_of = {u: i % cfg.topics for i, u in enumerate(consumers)}
    topic_of.update({u: i % cfg.topics for i, u in enumerate(creators)})
    consumers_by_topic = [[u for u in consumers if topic_of[u] == t] for t in range(cfg.topics)]
    creators_by_topic = [[u for u in creators if topic_of[u] == t] for t in range(cfg.topics)]

    # follow graph
    def draw_edges(u: str, degree: int, pools) -> list[str]:
        chosen: list[str] = []
        seen = {u}
        tries = 0
        while len(chosen) < degree and tries < degree * 20:
            tries += 1
            creator_pool, consumer_pool = pools
            pool_pair = creator_pool if rng.random() < cfg.creator_follow_frac else consumer_pool
            same_topic, everyone = pool_pair
            pool = same_topic if rng.random() < cfg.homophily else everyone
            if not pool:
                continue
            v = pool[int(rng.integers(len(pool)))]
            if v not in seen:
                seen.add(v)
                chosen.append(v)
        return chosen

    edges: list[tuple[str, str]] = []
    lo, hi = cfg.consumer_out_degree
    for u in consumers:
        t = topic_of[u]
        pools = (
            (creators_by_topic[t], creators),
            ([c for c in consumers_by_topic[t] if c != u], consumers),
        )
        for v in draw_edges(u, int(rng.integers(lo, hi + 1)), pools):
            edges.append((u, v))
    lo, hi = cfg.creator_out_degree
    for u in creators:
        t = topic_of[u]
        pools = (
            ([c for c in creators_by_topic[t] if c != u], creators),
            ([c for c in creators_by_topic[t] if c != u], creators),
        )
        for v in draw_edges(u, int(rng.integers(lo, hi + 1)), pools):
            edges.append((u, v))

    out_neighbors: dict[str, list[str]] = {u: [] for u in consumers + creators}
    for a, b in edges:
        out_neighbors[a].append(b)
    friend_topics = {u: sorted({topic_of[v] for v in vs}) for u, vs in out_neighbors.items()}

    # vocabulary and embeddings
    topic_tokens = [
        [f"t{t}w{i:03d}" for i in range(cfg.vocab_per_topic)] for t in range(cfg.topics)
    ]
    shared_tokens = [f"shw{i:03d}" for i in range(cfg.shared_vocab)]
    centers = [_unit(rng.standard_normal(cfg.embed_dim)) for _ in range(cfg.topics)]
    embeddings: dict[str, np.ndarray] = {}
    for t, toks in enumerate(topic_tokens):
        for tok in toks:
            embeddings[tok] = _unit(centers[t] + cfg.embed_noise * rng.standard_normal(cfg.embed_dim))
    for tok in shared_tokens:
        embeddings[tok] = _unit(rng.standard_normal(cfg.embed_dim))
    topic_weights = _zipf_weights(cfg.vocab_per_topic, cfg.zipf_exponent)
    shared_weights = _zipf_weights(max(cfg.shared_vocab, 1), cfg.zipf_exponent)

    def draw_token(topic: int) -> str:
        # mixed-content documents: a shared and a cross-topic minority keep
        # user-conditioned attention informative on every document
        if cfg.shared_vocab and rng.random() < cfg.shared_token_prob:
            return shared_tokens[int(rng.choice(cfg.shared_vocab, p=shared_weights))]
        if cfg.topics > 1 and rng.random() < cfg.cross_topic_token_prob:
            other = int(rng.integers(cfg.topics - 1))
            if other >= topic:
                other += 1
            return topic_tokens[other][int(rng.choice(cfg.vocab_per_topic, p=topic_weights))]
        return topic_tokens[topic][int(rng.choice(cfg.vocab_per_topic, p=topic_weights))]

    # documents
    docs = []
    s_lo, s_hi = cfg.sentences_per_doc
    t_lo, t_hi = cfg.tokens_per_sentence
    for day in range(cfg.n_days):
        for i in range(cfg.docs_per_day):
            creator = creators[int(rng.integers(cfg.n_creators))]
            topic = topic_of[creator]
            sentences = [
                [draw_token(topic) for _ in range(int(rng.integers(t_lo, t_hi + 1)))]
                for _ in range(int(rng.integers(s_lo, s_hi + 1)))
            ]
            docs.append(
                {"doc_id": f"d{day:03d}_{i:03d}", "creator": creator, "day": day,
                 "sentences": sentences, "topic": topic}
            )

    # interactions
    activity = {
        u: (cfg.low_activity_scale if rng.random() < cfg.low_activity_frac else 1.0)
        for u in consumers
    }
    # staggered onboarding: a slice of consumers starts commenting mid-stream,
    # so their own history is thin while their friends' is not
    entry_span = max(1, int(cfg.entry_span_frac * cfg.n_days))
    entry_day = {
        u: (int(rng.integers(1, entry_span + 1)) if rng.random() < cfg.staggered_entry_frac else 0)
        for u in consumers
    }
    logs = []
    for day in range(cfg.n_days):
        day_docs = [d for d in docs if d["day"] == day]
        for u in consumers:
            if day < entry_day[u]:
                continue
            own = topic_of[u]
            ftopics = friend_topics[u]
            for d in day_docs:
                if d["topic"] == own:
                    p = cfg.read_prob_own_topic
                elif d["topic"] in ftopics:
                    p = cfg.read_prob_own_topic * cfg.friend_topic_damping
                else:
                    p = cfg.read_prob_other_topic
                if rng.random() < p * activity[u]:
                    logs.append({"day": day, "user": u, "doc_id": d["doc_id"]})

    # payouts proportional to received comments, plus noise
    creator_of = {d["doc_id"]: d["creator"] for d in docs}
    payouts = []
    for day in range(cfg.n_days):
        counts: dict[str, int] = {}
        for log in logs:
            if log["day"] == day:
                c = creator_of[log["doc_id"]]
                counts[c] = counts.get(c, 0) + 1
        for c in sorted(counts):
            amount = max(
                0.0, cfg.payout_per_comment * counts[c] + rng.normal(0.0, cfg.payout_noise)
            )
            if amount > 0:
                payouts.append((c, day, amount))

    # emit files
    with open(out_dir / "documents.jsonl", "w") as fh:
        for d in docs:
            fh.write(json.dumps({k: d[k] for k in ("doc_id", "creator", "day", "sentences")}) + "\n")
    with open(out_dir / "interactions.jsonl", "w") as fh:
        for log in logs:
            fh.write(json.dumps(log) + "\n")
    with open(out_dir / "graph.tsv", "w") as fh:
        for a, b in edges:
            fh.write(f"{a}\t{b}\n")
    with open(out_dir / "payouts.tsv", "w") as fh:
        for c, day, amount in payouts:
            fh.write(f"{c}\t{day}\t{amount!r}\n")
    with open(out_dir / "embeddings.txt", "w") as fh:
        for tok in sorted(embeddings):
            vec = " ".join(repr(float(x)) for x in embeddings[tok])
            fh.write(f"{tok} {vec}\n")

    stats = {
        "n_users": cfg.n_consumers + cfg.n_creators,
        "n_edges": len(edges),
        "n_docs": len(docs),
        "n_logs": len(logs),
        "n_payout_rows": len(payouts),
        "avg_tokens_per_doc": float(
            np.mean([sum(len(s) for s in d["sentences"]) for d in docs])
        ),
    }
    meta = {
        "config": cfg.to_dict(),
        "stats": stats,
        "user_topics": {u: topic_of[u] for u in sorted(topic_of)},
        "doc_topics": {d["doc_id"]: d["topic"] for d in docs},
        "entry_days": {u: entry_day[u] for u in sorted(entry_day)},
    }
    with open(out_dir / "meta.json", "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=0)
        fh.write("\n")
    return meta
