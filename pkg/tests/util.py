"""Independent oracles and small builders shared across the test suite.

Everything here is deliberately written as plain loops/dense algebra, separate
from the library's implementations, so tests compare two routes to the same
answer."""

from __future__ import annotations

import math

import numpy as np

from sean import corpus, seanet
from sean.socialgraph import SocialGraph


# ----- builders -----

def make_vocab(n_tokens: int = 12, dim: int = 6, seed: int = 0) -> corpus.Vocabulary:
    rng = np.random.default_rng(seed)
    matrix = np.vstack([np.zeros(dim), rng.standard_normal((n_tokens, dim))])
    return corpus.Vocabulary({f"t{i}": i + 1 for i in range(n_tokens)}, matrix)


def make_doc(doc_id="d0", creator="k0", day=0, sentences=(("t0", "t1", "t2", "t3", "t4"), ("t5", "t6", "t7", "t8", "t9"))):
    return corpus.Document(doc_id, creator, day, tuple(tuple(s) for s in sentences))


def two_hop_demo_graph() -> SocialGraph:
    """Node 1 follows 2,3,4,5; node 3 leads to 6,7; node 4 leads to 8,9."""
    return SocialGraph.from_edges(
        [("1", "2"), ("1", "3"), ("1", "4"), ("1", "5"),
         ("3", "6"), ("3", "7"), ("4", "8"), ("4", "9")]
    )


# ----- pagerank oracle -----

def dense_pagerank_oracle(nodes, edges, damping: float, iters: int = 800) -> dict:
    """Dense-matrix power iteration, dangling columns spread uniformly."""
    n = len(nodes)
    idx = {u: i for i, u in enumerate(nodes)}
    out = np.zeros(n)
    for a, _ in edges:
        out[idx[a]] += 1
    M = np.zeros((n, n))
    for a, b in edges:
        M[idx[b], idx[a]] += 1.0 / out[idx[a]]
    for j in range(n):
        if out[j] == 0:
            M[:, j] = 1.0 / n
    A = damping * M + (1.0 - damping) / n
    v = np.full(n, 1.0 / n)
    for _ in range(iters):
        v = A @ v
    return {u: float(v[idx[u]]) for u in nodes}


# ----- ranking / inequality oracles -----

def auc_pairs_oracle(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    if not pos or not neg:
        return None
    pos = np.asarray(pos)[:, None]
    neg = np.asarray(neg)[None, :]
    wins = (pos > neg).sum()
    ties = (pos == neg).sum()
    return float((wins + 0.5 * ties) / (pos.size * neg.size))


def gini_mad_oracle(values) -> float:
    """Mean-absolute-difference form: sum_ij |x_i - x_j| / (2 n sum(x))."""
    x = np.asarray(values, dtype=np.float64)
    n = len(x)
    return float(np.abs(x[:, None] - x[None, :]).sum() / (2.0 * n * x.sum()))


# ----- beam recurrence oracle -----

def beam_oracle(graph: SocialGraph, owner: str, B: int, L: int, n_visits: dict, q: dict, lam: float):
    """Literal pool-materializing simulation of the beam recurrence.

    Scores are frozen (no count updates): score(parent, v) =
    Q(v) + lam * sqrt(ln N(parent) / (N(v) + 1)), the log term zeroed while
    N(parent) < 1. Per depth, pop entries best-first (ties: lower node id then
    lower beam index); a beam extends at most once and a node joins at most
    one beam per depth; candidates already on the same beam are excluded.
    """

    def score(parent, v):
        npar = n_visits.get(parent, 0.0)
        util = 0.0 if npar < 1.0 else math.sqrt(math.log(npar) / (n_visits.get(v, 0.0) + 1.0))
        return q.get(v, 0.0) + lam * util

    paths = [[owner] for _ in range(B)]
    totals = [0.0] * B
    for _depth in range(L):
        pool = []
        for b in range(B):
            tail = paths[b][-1]
            for v in graph.neighbors(tail):
                if v in paths[b]:
                    continue
                pool.append([totals[b] + score(tail, v), v, b])
        if not pool:
            break
        done, used = [], []
        while pool:
            best = pool[0]
            for entry in pool[1:]:
                if entry[0] > best[0] or (
                    entry[0] == best[0]
                    and (entry[1] < best[1] or (entry[1] == best[1] and entry[2] < best[2]))
                ):
                    best = entry
            pool.remove(best)
            s, v, b = best
            if b in done or v in used:
                continue
            paths[b].append(v)
            totals[b] = s
            done.append(b)
            used.append(v)
    return paths


# ----- gradient checking -----

def kink_margin(net: seanet.SeanNet, cache: dict) -> float:
    """Smallest |pre-activation| across the relu/LeakyReLU kinks touched by a
    forward pass; central differences are only a valid oracle away from them."""
    margins = [np.inf]
    params = net.params
    if params.options.use_cnn:
        static = cache["static"]
        for per_kernel in static["im2col"]:
            for k, X in enumerate(per_kernel):
                pre = X @ params[f"conv{k}.K"] + params[f"conv{k}.b"]
                margins.append(np.abs(pre).min())
    for pc in cache["paths"]:
        for key in ("ctx_w", "ctx_s"):
            raw = pc[key]["logits"]
            if raw is not None:
                margins.append(np.abs(raw).min())
    return float(min(margins))


def gradcheck(net: seanet.SeanNet, user_idx: int, paths, doc, y: int, eps: float = 1e-4):
    """Central finite differences on the BCE loss for every tensor entry.

    Returns (max relative error, kink margin of the base forward)."""
    from sean import trainer

    def loss():
        p, _ = net.forward(user_idx, paths, doc)
        return trainer.bce_loss(p, y)

    p, cache = net.forward(user_idx, paths, doc)
    margin = kink_margin(net, cache)
    grads = net.params.zero_grads()
    net.backward(cache, trainer.bce_grad(p, y), grads)

    worst = 0.0
    for name, tensor in net.params.tensors.items():
        flat = tensor.ravel()
        gflat = grads[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss()
            flat[i] = orig - eps
            lm = loss()
            flat[i] = orig
            fd = (lp - lm) / (2.0 * eps)
            a = gflat[i]
            denom = max(abs(a), abs(fd))
            if denom > 1e-6:
                worst = max(worst, abs(a - fd) / denom)
    return worst, margin


# ----- scalar GRU oracle -----

def gru_scalar_oracle(W, U, b, xs, hidden: int):
    """Step-by-step GRU with explicit index loops (no vectorization)."""

    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    def dot(row, vec):
        return sum(row[j] * vec[j] for j in range(len(vec)))

    h = [0.0] * hidden
    outs = []
    for x in xs:
        z = [sig(dot(W[i], x) + b[i] + dot(U[i], h)) for i in range(hidden)]
        r = [sig(dot(W[hidden + i], x) + b[hidden + i] + dot(U[hidden + i], h)) for i in range(hidden)]
        rh = [r[i] * h[i] for i in range(hidden)]
        hc = [
            math.tanh(dot(W[2 * hidden + i], x) + b[2 * hidden + i] + dot(U[2 * hidden + i], rh))
            for i in range(hidden)
        ]
        h = [(1.0 - z[i]) * h[i] + z[i] * hc[i] for i in range(hidden)]
        outs.append(list(h))
    return outs
