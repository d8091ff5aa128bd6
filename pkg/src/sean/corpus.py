"""Data model and ingestion: documents, interaction logs, vocabulary with
pre-trained embeddings, and daily sample construction.

File formats (all line-delimited, streamable day by day):
  documents.jsonl     {"doc_id", "creator", "day", "sentences": [["tok", ...], ...]}
  interactions.jsonl  {"day", "user", "doc_id"}
  embeddings.txt      `token v1 ... vD` per line, space-separated decimals
Graph and payout files are handled by :mod:`sean.socialgraph`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .socialgraph import PayoutTable, SocialGraph, load_graph, load_payouts

UserId = str
DocId = str

DEFAULT_MAX_SENTENCES = 30
DEFAULT_MAX_TOKENS = 100


class ParseError(ValueError):
    """A dataset file is malformed; the message names the offending line."""


class FormatError(ValueError):
    """A dataset file is self-inconsistent (e.g. ragged embedding widths)."""


@dataclass(frozen=True)
class Document:
    doc_id: DocId
    creator: UserId
    day: int
    sentences: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class InteractionLog:
    day: int
    user: UserId
    doc_id: DocId
    kind: str = "comment"


@dataclass(frozen=True)
class Sample:
    """One labeled (user, document) pair for a given day."""

    user: UserId
    doc_id: DocId
    label: int
    day: int


class DocumentStore:
    """Immutable id -> Document map; safe to share across readers."""

    def __init__(self, docs: dict[DocId, Document]):
        self._docs = docs

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: DocId) -> bool:
        return doc_id in self._docs

    def __iter__(self):
        return iter(self._docs.values())

    def get(self, doc_id: DocId) -> Document:
        try:
            return self._docs[doc_id]
        except KeyError:
            raise KeyError(f"unknown doc_id {doc_id!r}") from None

    def creator_of(self, doc_id: DocId) -> UserId:
        return self.get(doc_id).creator

    @property
    def n_days(self) -> int:
        return 1 + max((d.day for d in self._docs.values()), default=-1)

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for doc in self._docs.values():
                rec = {
                    "doc_id": doc.doc_id,
                    "creator": doc.creator,
                    "day": doc.day,
                    "sentences": [list(s) for s in doc.sentences],
                }
                fh.write(json.dumps(rec) + "\n")


def _truncate(sentences: list[list[str]], max_sentences: int, max_tokens: int):
    kept = sentences[:max_sentences]
    return tuple(tuple(s[:max_tokens]) for s in kept)


def load_documents(
    path: str | Path,
    max_sentences: int = DEFAULT_MAX_SENTENCES,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> DocumentStore:
    """Load a documents.jsonl file, truncating to the first `max_sentences`
    sentences and the first `max_tokens` tokens per sentence."""
    docs: dict[DocId, Document] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                doc_id = str(rec["doc_id"])
                creator = str(rec["creator"])
                day = int(rec["day"])
                sentences = rec["sentences"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed document record: {exc}") from None
            if day < 0:
                raise ParseError(f"{path}:{lineno}: negative day {day}")
            if not isinstance(sentences, list) or not sentences:
                raise ParseError(f"{path}:{lineno}: document has no sentences")
            for s in sentences:
                if not isinstance(s, list) or not s:
                    raise ParseError(f"{path}:{lineno}: empty sentence")
                if any(not isinstance(t, str) or not t for t in s):
                    raise ParseError(f"{path}:{lineno}: empty or non-string token")
            if doc_id in docs:
                raise ParseError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
            docs[doc_id] = Document(
                doc_id, creator, day, _truncate(sentences, max_sentences, max_tokens)
            )
    return DocumentStore(docs)


class Vocabulary:
    """Token -> row index map over an embedding matrix.

    Index 0 is reserved for out-of-vocabulary tokens and maps to the zero
    vector; every other row holds the pre-trained embedding of one token that
    occurs both in the corpus and in the embeddings file.
    """

    def __init__(self, index: dict[str, int], matrix: np.ndarray):
        self._index = index
        self.matrix = matrix

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def lookup(self, token: str) -> int:
        return self._index.get(token, 0)

    def embed(self, tokens) -> np.ndarray:
        """Stack token embeddings into a (len(tokens), dim) matrix."""
        idx = [self._index.get(t, 0) for t in tokens]
        return self.matrix[idx]


def build_vocab(docs: DocumentStore, embeddings_path: str | Path) -> Vocabulary:
    """Intersect the corpus tokens with a pre-trained embeddings file.

    Tokens absent from the file map to index 0 (the zero vector).
    """
    corpus_tokens = set()
    for doc in docs:
        for sent in doc.sentences:
            corpus_tokens.update(sent)

    index: dict[str, int] = {}
    rows: list[np.ndarray] = []
    dim: int | None = None
    with open(embeddings_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise FormatError(f"{embeddings_path}:{lineno}: no vector values")
            elif len(values) != dim:
                raise FormatError(
                    f"{embeddings_path}:{lineno}: vector width {len(values)} != {dim}"
                )
            if token in corpus_tokens and token not in index:
                try:
                    vec = np.asarray([float(v) for v in values], dtype=np.float64)
                except ValueError as exc:
                    raise FormatError(f"{embeddings_path}:{lineno}: {exc}") from None
                if not np.all(np.isfinite(vec)):
                    raise FormatError(f"{embeddings_path}:{lineno}: non-finite embedding")
                index[token] = len(rows) + 1
                rows.append(vec)
    if dim is None:
        dim = 0
    matrix = np.zeros((len(rows) + 1, dim), dtype=np.float64)
    for i, vec in enumerate(rows, start=1):
        matrix[i] = vec
    return Vocabulary(index, matrix)


@dataclass
class InteractionLogs:
    """All interaction logs grouped by day. `n_days` is the dataset duration
    (documents and logs both bound it)."""

    by_day: dict[int, tuple[InteractionLog, ...]]
    n_days: int

    def on_day(self, day: int) -> tuple[InteractionLog, ...]:
        return self.by_day.get(day, ())


def load_interactions(path: str | Path, docs: DocumentStore) -> InteractionLogs:
    by_day: dict[int, list[InteractionLog]] = {}
    max_day = docs.n_days - 1
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                day = int(rec["day"])
                user = str(rec["user"])
                doc_id = str(rec["doc_id"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed interaction record: {exc}") from None
            if day < 0:
                raise ParseError(f"{path}:{lineno}: negative day {day}")
            if doc_id not in docs:
                raise ParseError(f"{path}:{lineno}: unknown doc_id {doc_id!r}")
            by_day.setdefault(day, []).append(InteractionLog(day, user, doc_id))
            max_day = max(max_day, day)
    return InteractionLogs({d: tuple(v) for d, v in by_day.items()}, n_days=max_day + 1)


def build_day_samples(
    day: int,
    logs: InteractionLogs,
    graph: SocialGraph,
    seed: int | None = None,
    neg_cap_per_user_day: int | None = None,
) -> list[Sample]:
    """Construct one day's labeled samples.

    Positives are every (user, doc) comment pair of the day. Negatives are
    pairs (u, d) where u did not respond to d but at least one of u's graph
    neighbors did that day. Negatives are not subsampled unless
    `neg_cap_per_user_day` is set (seeded-uniform cap per user).
    """
    if not 0 <= day < logs.n_days:
        raise ValueError(f"day {day} outside dataset range [0, {logs.n_days})")

    responded: dict[UserId, set[DocId]] = {}
    for log in logs.on_day(day):
        if log.user not in graph:
            raise ValueError(f"user {log.user!r} appears in logs but not in graph")
        responded.setdefault(log.user, set()).add(log.doc_id)

    positives = sorted((u, d) for u, ds in responded.items() for d in ds)
    samples = [Sample(u, d, 1, day) for u, d in positives]

    rng = np.random.default_rng(seed)
    for u in graph.users:
        friend_docs: set[DocId] = set()
        for v in graph.neighbors(u):
            friend_docs.update(responded.get(v, ()))
        negatives = sorted(friend_docs - responded.get(u, set()))
        if neg_cap_per_user_day is not None and len(negatives) > neg_cap_per_user_day:
            pick = rng.choice(len(negatives), size=neg_cap_per_user_day, replace=False)
            negatives = [negatives[i] for i in sorted(pick)]
        samples.extend(Sample(u, d, 0, day) for d in negatives)

    if seed is not None:
        order = np.random.default_rng(seed + 1).permutation(len(samples))
        samples = [samples[i] for i in order]
    return samples


def split_train_val(samples: list[Sample], ratio: float, seed: int | None = None):
    """Disjoint shuffle-split; the train share is within one sample of `ratio`."""
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    if not samples:
        return [], []
    order = np.random.default_rng(seed).permutation(len(samples))
    n_train = int(len(samples) * ratio + 0.5)
    train = [samples[i] for i in order[:n_train]]
    val = [samples[i] for i in order[n_train:]]
    return train, val


@dataclass
class World:
    """A full dataset snapshot: documents, logs, graph, payouts, vocabulary."""

    docs: DocumentStore
    logs: InteractionLogs
    graph: SocialGraph
    payouts: PayoutTable
    vocab: Vocabulary
    n_days: int
    users: tuple[UserId, ...] = field(default=())
    user_index: dict[UserId, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.users:
            self.users = tuple(sorted(self.graph.users))
        if not self.user_index:
            self.user_index = {u: i for i, u in enumerate(self.users)}


def load_world(
    data_dir: str | Path,
    max_sentences: int = DEFAULT_MAX_SENTENCES,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> World:
    """Load the five dataset files from `data_dir` and cross-check them."""
    data_dir = Path(data_dir)
    docs = load_documents(data_dir / "documents.jsonl", max_sentences, max_tokens)
    graph = load_graph(data_dir / "graph.tsv")
    logs = load_interactions(data_dir / "interactions.jsonl", docs)
    for day_logs in logs.by_day.values():
        for log in day_logs:
            if log.user not in graph:
                raise ParseError(f"interaction user {log.user!r} missing from graph")
    payouts = load_payouts(data_dir / "payouts.tsv")
    vocab = build_vocab(docs, data_dir / "embeddings.txt")
    return World(docs, logs, graph, payouts, vocab, n_days=logs.n_days)
