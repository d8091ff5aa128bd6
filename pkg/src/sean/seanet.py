"""The neural scorer.

Pipeline per (user, friend path, document):
  word level      fixed pre-trained embeddings -> per-window CNN features ->
                  user-conditioned soft attention -> sentence vector
  sentence level  bidirectional GRU -> user-conditioned soft attention ->
                  document vector
  user level      the word/sentence query vectors are built by attending over
                  the user's own embedding plus the explored friends'
                  embeddings (LeakyReLU-scored softmax)
  head            sigmoid over a dense scalar logit

A selection carries B paths; forward runs the attention pipeline once per
path and averages the B probabilities. Gradients are exact and analytic for
every trainable tensor (embeddings are fixed inputs and get none).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_HIDDEN = 64
DEFAULT_FILTERS = 50
DEFAULT_WINDOWS = (1, 2, 3, 4, 5, 6)
DEFAULT_DROPOUT = 0.2
DEFAULT_LEAKY_SLOPE = 0.01


@dataclass(frozen=True)
class ModelDims:
    n_users: int
    embed_dim: int
    hidden: int = DEFAULT_HIDDEN
    filters: int = DEFAULT_FILTERS
    windows: tuple[int, ...] = DEFAULT_WINDOWS


@dataclass(frozen=True)
class ModelOptions:
    """Architecture switches; the defaults are the full model."""

    use_cnn: bool = True
    use_gru: bool = True
    social: str = "attention"  # "attention" or "mean" (uniform over self+friends)
    dropout: float = DEFAULT_DROPOUT
    leaky_slope: float = DEFAULT_LEAKY_SLOPE


def _xavier(rng: np.random.Generator, shape: tuple[int, ...], n_in: int, n_out: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / (n_in + n_out)), size=shape)


class SeanParams:
    """All trainable tensors, keyed by name. Checkpoints round-trip
    bit-exactly through ``save``/``load``."""

    def __init__(self, dims: ModelDims, options: ModelOptions, tensors: dict[str, np.ndarray]):
        self.dims = dims
        self.options = options
        self.tensors = tensors

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    @property
    def seq_in_dim(self) -> int:
        if self.options.use_cnn:
            return len(self.dims.windows) * self.dims.filters
        return self.dims.embed_dim

    def save(self, path: str | Path) -> None:
        meta = {
            "dims": {
                "n_users": self.dims.n_users,
                "embed_dim": self.dims.embed_dim,
                "hidden": self.dims.hidden,
                "filters": self.dims.filters,
                "windows": list(self.dims.windows),
            },
            "options": {
                "use_cnn": self.options.use_cnn,
                "use_gru": self.options.use_gru,
                "social": self.options.social,
                "dropout": self.options.dropout,
                "leaky_slope": self.options.leaky_slope,
            },
        }
        arrays = dict(self.tensors)
        arrays["__meta__"] = np.frombuffer(
            json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8
        )
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path: str | Path) -> "SeanParams":
        with np.load(path) as data:
            meta = json.loads(bytes(data["__meta__"]).decode())
            tensors = {k: data[k].copy() for k in data.files if k != "__meta__"}
        d = meta["dims"]
        o = meta["options"]
        dims = ModelDims(d["n_users"], d["embed_dim"], d["hidden"], d["filters"], tuple(d["windows"]))
        options = ModelOptions(o["use_cnn"], o["use_gru"], o["social"], o["dropout"], o["leaky_slope"])
        return cls(dims, options, tensors)


def init_params(seed: int, dims: ModelDims, options: ModelOptions = ModelOptions()) -> SeanParams:
    """Xavier-normal weights, standard-normal user embedding tables, zero
    biases. Creation order is fixed, so a seed pins every bit."""
    rng = np.random.default_rng(seed)
    h, r, D = dims.hidden, dims.filters, dims.embed_dim
    t: dict[str, np.ndarray] = {}
    t["emb_word"] = rng.standard_normal((dims.n_users, h))
    t["emb_sent"] = rng.standard_normal((dims.n_users, h))
    if options.use_cnn:
        for k, g in enumerate(dims.windows):
            t[f"conv{k}.K"] = _xavier(rng, (g * D, r), g * D, r)
            t[f"conv{k}.b"] = np.zeros(r)
        t["word_attn.W"] = _xavier(rng, (h, r), r, h)
        t["word_attn.b"] = np.zeros(h)
    in_dim = len(dims.windows) * r if options.use_cnn else D
    if options.use_gru:
        for name in ("gru_fwd", "gru_bwd"):
            t[f"{name}.W"] = _xavier(rng, (3 * h, in_dim), in_dim, h)
            t[f"{name}.U"] = _xavier(rng, (3 * h, h), h, h)
            t[f"{name}.b"] = np.zeros(3 * h)
    t["sent_attn.W"] = _xavier(rng, (h, 2 * h), 2 * h, h)
    t["sent_attn.b"] = np.zeros(h)
    for name in ("social_word", "social_sent"):
        t[f"{name}.Wy"] = _xavier(rng, (h, h), h, h)
        t[f"{name}.w"] = _xavier(rng, (2 * h,), 2 * h, 1)
    t["head.w"] = _xavier(rng, (2 * h,), 2 * h, 1)
    t["head.b"] = np.zeros(1)
    return SeanParams(dims, options, t)


def softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max())
    return e / e.sum()


def _softmax_backward(alpha: np.ndarray, dalpha: np.ndarray) -> np.ndarray:
    return alpha * (dalpha - float(alpha @ dalpha))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class UserContext:
    """Socialized query vectors plus the friend-attention weights that built
    them (index 0 is the user's own embedding)."""

    x_word: np.ndarray
    x_sent: np.ndarray
    alpha_word: np.ndarray
    alpha_sent: np.ndarray


@dataclass
class DocEncoding:
    """Intermediate document representation for one path."""

    sentence_vectors: list[np.ndarray]
    word_attention: list[list[np.ndarray]]  # per sentence, per kernel
    states: np.ndarray  # (I, 2h)
    sentence_attention: np.ndarray  # (I,)
    doc_vector: np.ndarray  # (2h,)


class SeanNet:
    """Forward/backward engine binding parameters to a vocabulary.

    Forward evaluation is pure given (params, inputs); backward accumulates
    into a caller-owned gradient dict so batch workers can merge by sum.
    """

    def __init__(self, params: SeanParams, vocab):
        self.params = params
        self.vocab = vocab
        self._static: dict[str, dict] = {}  # doc_id -> parameter-independent arrays

    # ----- static (parameter-independent) document features -----

    def _doc_static(self, doc) -> dict:
        cached = self._static.get(doc.doc_id)
        if cached is not None:
            return cached
        if not doc.sentences:
            raise ValueError(f"document {doc.doc_id!r} has no sentences")
        emb = [self.vocab.embed(s) for s in doc.sentences]
        entry: dict = {"emb": emb}
        if self.params.options.use_cnn:
            D = self.params.dims.embed_dim
            windows = self.params.dims.windows
            cols: list[list[np.ndarray]] = []
            for E in emb:
                per_kernel = []
                for g in windows:
                    J = E.shape[0]
                    Ep = E if J >= g else np.vstack([E, np.zeros((g - J, D))])
                    P = Ep.shape[0] - g + 1
                    X = np.empty((P, g * D))
                    for j in range(P):
                        X[j] = Ep[j : j + g].ravel()
                    per_kernel.append(X)
                cols.append(per_kernel)
            entry["im2col"] = cols
        else:
            entry["mean_emb"] = [E.mean(axis=0) for E in emb]
        self._static[doc.doc_id] = entry
        return entry

    # ----- shared (path-independent but parameter-dependent) features -----

    def _encode_shared(self, static: dict) -> dict:
        t = self.params.tensors
        if not self.params.options.use_cnn:
            return {"s_base": static["mean_emb"]}
        Ww, bw = t["word_attn.W"], t["word_attn.b"]
        feats, projs, masks = [], [], []
        for per_kernel in static["im2col"]:
            fs, qs, ms = [], [], []
            for k, X in enumerate(per_kernel):
                pre = X @ t[f"conv{k}.K"] + t[f"conv{k}.b"]
                mask = pre > 0
                f = np.where(mask, pre, 0.0)
                q = np.tanh(f @ Ww.T + bw)
                fs.append(f)
                qs.append(q)
                ms.append(mask)
            feats.append(fs)
            projs.append(qs)
            masks.append(ms)
        return {"f": feats, "q": projs, "relu": masks}

    # ----- social attention -----

    def _social(self, level: str, user_idx: int, friends: list[int]) -> dict:
        t = self.params.tensors
        emb = t["emb_word"] if level == "word" else t["emb_sent"]
        Wy = t[f"social_{level}.Wy"]
        w = t[f"social_{level}.w"]
        idx = [user_idx] + list(friends)
        Y = emb[idx]
        M = Y @ Wy.T
        h = self.params.dims.hidden
        if self.params.options.social == "mean":
            alpha = np.full(len(idx), 1.0 / len(idx))
            cache = {"idx": idx, "Y": Y, "M": M, "alpha": alpha, "logits": None}
        else:
            raw = M[0] @ w[:h] + M @ w[h:]
            slope = self.params.options.leaky_slope
            e = np.where(raw > 0, raw, slope * raw)
            alpha = softmax(e)
            cache = {"idx": idx, "Y": Y, "M": M, "alpha": alpha, "logits": raw}
        cache["x"] = M.T @ alpha
        return cache

    def _social_backward(self, level: str, cache: dict, dx: np.ndarray, grads) -> None:
        t = self.params.tensors
        Wy = t[f"social_{level}.Wy"]
        w = t[f"social_{level}.w"]
        h = self.params.dims.hidden
        M, Y, alpha = cache["M"], cache["Y"], cache["alpha"]
        dM = np.outer(alpha, dx)
        if self.params.options.social != "mean":
            dalpha = M @ dx
            de = _softmax_backward(alpha, dalpha)
            raw = cache["logits"]
            slope = self.params.options.leaky_slope
            dl = de * np.where(raw > 0, 1.0, slope)
            grads[f"social_{level}.w"][:h] += dl.sum() * M[0]
            grads[f"social_{level}.w"][h:] += M.T @ dl
            dM[0] += dl.sum() * w[:h]
            dM += np.outer(dl, w[h:])
        grads[f"social_{level}.Wy"] += dM.T @ Y
        dY = dM @ Wy
        emb_name = "emb_word" if level == "word" else "emb_sent"
        np.add.at(grads[emb_name], cache["idx"], dY)

    # ----- GRU -----

    def _gru_run(self, name: str, xs: list[np.ndarray]):
        t = self.params.tensors
        W, U, b = t[f"{name}.W"], t[f"{name}.U"], t[f"{name}.b"]
        h = self.params.dims.hidden
        state = np.zeros(h)
        outs, caches = [], []
        for x in xs:
            a = W @ x + b
            z = _sigmoid(a[:h] + U[:h] @ state)
            r = _sigmoid(a[h : 2 * h] + U[h : 2 * h] @ state)
            rh = r * state
            hc = np.tanh(a[2 * h :] + U[2 * h :] @ rh)
            new = (1.0 - z) * state + z * hc
            caches.append((x, state, z, r, rh, hc))
            outs.append(new)
            state = new
        return outs, caches

    def _gru_backward(self, name: str, caches, douts: list[np.ndarray], grads) -> list[np.ndarray]:
        t = self.params.tensors
        W, U = t[f"{name}.W"], t[f"{name}.U"]
        h = self.params.dims.hidden
        gW, gU, gb = grads[f"{name}.W"], grads[f"{name}.U"], grads[f"{name}.b"]
        carry = np.zeros(h)
        dxs = [None] * len(caches)
        for i in range(len(caches) - 1, -1, -1):
            x, h_prev, z, r, rh, hc = caches[i]
            dh = douts[i] + carry
            dz = dh * (hc - h_prev)
            dhc = dh * z
            dh_prev = dh * (1.0 - z)
            dah = dhc * (1.0 - hc * hc)
            gU[2 * h :] += np.outer(dah, rh)
            drh = U[2 * h :].T @ dah
            dr = drh * h_prev
            dh_prev += drh * r
            daz = dz * z * (1.0 - z)
            dar = dr * r * (1.0 - r)
            dazr = np.concatenate([daz, dar])
            gU[: 2 * h] += np.outer(dazr, h_prev)
            dh_prev += U[: 2 * h].T @ dazr
            da = np.concatenate([dazr, dah])
            gW += np.outer(da, x)
            gb += da
            dxs[i] = W.T @ da
            carry = dh_prev
        return dxs

    # ----- per-path document pipeline -----

    def _path_forward(self, shared: dict, ctx_w: dict, ctx_s: dict, rng) -> dict:
        opts = self.params.options
        t = self.params.tensors
        h = self.params.dims.hidden
        cache: dict = {"ctx_w": ctx_w, "ctx_s": ctx_s}

        if opts.use_cnn:
            s_list, alphas = [], []
            x_w = ctx_w["x"]
            for fs, qs in zip(shared["f"], shared["q"]):
                parts, al = [], []
                for f, q in zip(fs, qs):
                    a = softmax(q @ x_w)
                    parts.append(f.T @ a)
                    al.append(a)
                s_list.append(np.concatenate(parts))
                alphas.append(al)
            cache["word_alpha"] = alphas
        else:
            s_list = [s.copy() for s in shared["s_base"]]
        cache["s"] = s_list

        if rng is not None and opts.dropout > 0:
            keep = 1.0 - opts.dropout
            smask = [
                (rng.random(s.shape) < keep).astype(np.float64) / keep for s in s_list
            ]
            s_in = [s * m for s, m in zip(s_list, smask)]
            cache["s_mask"] = smask
        else:
            s_in = s_list
        cache["s_in"] = s_in

        if opts.use_gru:
            f_outs, f_caches = self._gru_run("gru_fwd", s_in)
            b_outs, b_caches = self._gru_run("gru_bwd", s_in[::-1])
            b_outs = b_outs[::-1]
            H = np.stack([np.concatenate([f, b]) for f, b in zip(f_outs, b_outs)])
            cache["gru"] = (f_caches, b_caches)
        else:
            H = np.zeros((len(s_in), 2 * h))
            w = min(s_in[0].shape[0], 2 * h)
            for i, s in enumerate(s_in):
                H[i, :w] = s[:w]
            cache["pad_width"] = w
        cache["H"] = H

        qs = np.tanh(H @ t["sent_attn.W"].T + t["sent_attn.b"])
        beta = softmax(qs @ ctx_s["x"])
        d = H.T @ beta
        cache["qs"], cache["beta"], cache["d"] = qs, beta, d

        if rng is not None and opts.dropout > 0:
            keep = 1.0 - opts.dropout
            dmask = (rng.random(d.shape) < keep).astype(np.float64) / keep
            d_in = d * dmask
            cache["d_mask"] = dmask
        else:
            d_in = d
        cache["d_in"] = d_in

        z = float(t["head.w"] @ d_in + t["head.b"][0])
        cache["z"] = z
        cache["p"] = float(_sigmoid(z))
        return cache

    def _path_backward(self, shared: dict, cache: dict, dp: float, grads, acc: dict) -> None:
        opts = self.params.options
        t = self.params.tensors
        p = cache["p"]
        dz = dp * p * (1.0 - p)
        d_in = cache["d_in"]
        grads["head.w"] += dz * d_in
        grads["head.b"][0] += dz
        dd = dz * t["head.w"]
        if "d_mask" in cache:
            dd = dd * cache["d_mask"]

        H, qs, beta = cache["H"], cache["qs"], cache["beta"]
        ctx_s, ctx_w = cache["ctx_s"], cache["ctx_w"]
        dbeta = H @ dd
        dH = np.outer(beta, dd)
        dlog = _softmax_backward(beta, dbeta)
        dx_s = qs.T @ dlog
        dqs = np.outer(dlog, ctx_s["x"])
        da = dqs * (1.0 - qs * qs)
        grads["sent_attn.W"] += da.T @ H
        grads["sent_attn.b"] += da.sum(axis=0)
        dH += da @ t["sent_attn.W"]

        if opts.use_gru:
            h = self.params.dims.hidden
            f_caches, b_caches = cache["gru"]
            I = H.shape[0]
            df = [dH[i, :h] for i in range(I)]
            db = [dH[i, h:] for i in range(I)]
            dxs_f = self._gru_backward("gru_fwd", f_caches, df, grads)
            dxs_b = self._gru_backward("gru_bwd", b_caches, db[::-1], grads)
            dxs_b = dxs_b[::-1]
            ds_in = [a + b for a, b in zip(dxs_f, dxs_b)]
        else:
            w = cache["pad_width"]
            ds_in = []
            for i, s in enumerate(cache["s_in"]):
                ds = np.zeros_like(s)
                ds[:w] = dH[i, :w]
                ds_in.append(ds)

        if "s_mask" in cache:
            ds_list = [d * m for d, m in zip(ds_in, cache["s_mask"])]
        else:
            ds_list = ds_in

        dx_w = np.zeros_like(ctx_w["x"])
        if opts.use_cnn:
            r = self.params.dims.filters
            x_w = ctx_w["x"]
            for i, ds in enumerate(ds_list):
                for k, alpha in enumerate(cache["word_alpha"][i]):
                    ds_k = ds[k * r : (k + 1) * r]
                    f = shared["f"][i][k]
                    q = shared["q"][i][k]
                    dalpha = f @ ds_k
                    acc["df"][i][k] += np.outer(alpha, ds_k)
                    dlg = _softmax_backward(alpha, dalpha)
                    dx_w += q.T @ dlg
                    acc["dq"][i][k] += np.outer(dlg, x_w)
        # without CNN the sentence vectors are fixed means: no word-level grads

        self._social_backward("word", ctx_w, dx_w, grads)
        self._social_backward("sent", ctx_s, dx_s, grads)

    def _shared_backward(self, static: dict, shared: dict, acc: dict, grads) -> None:
        if not self.params.options.use_cnn:
            return
        t = self.params.tensors
        Ww = t["word_attn.W"]
        for i, per_kernel in enumerate(static["im2col"]):
            for k, X in enumerate(per_kernel):
                f = shared["f"][i][k]
                q = shared["q"][i][k]
                da = acc["dq"][i][k] * (1.0 - q * q)
                grads["word_attn.W"] += da.T @ f
                grads["word_attn.b"] += da.sum(axis=0)
                df = acc["df"][i][k] + da @ Ww
                dpre = df * shared["relu"][i][k]
                grads[f"conv{k}.K"] += X.T @ dpre
                grads[f"conv{k}.b"] += dpre.sum(axis=0)

    # ----- public API -----

    def forward(self, user_idx: int, friend_paths: list[list[int]], doc, rng=None):
        """Average the per-path probabilities; returns (p, cache).

        `friend_paths` holds B friend index lists (owner excluded); pass
        `rng` to enable dropout during training.
        """
        static = self._doc_static(doc)
        shared = self._encode_shared(static)
        path_caches = []
        for friends in friend_paths:
            ctx_w = self._social("word", user_idx, friends)
            ctx_s = self._social("sent", user_idx, friends)
            path_caches.append(self._path_forward(shared, ctx_w, ctx_s, rng))
        p = float(np.mean([c["p"] for c in path_caches]))
        cache = {"static": static, "shared": shared, "paths": path_caches}
        return p, cache

    def backward(self, cache: dict, dp: float, grads: dict[str, np.ndarray]) -> None:
        """Accumulate d(loss)/d(tensor) into `grads` given dp = dL/dp_mean."""
        paths = cache["paths"]
        shared = cache["shared"]
        acc = None
        if self.params.options.use_cnn:
            acc = {
                "df": [[np.zeros_like(f) for f in fs] for fs in shared["f"]],
                "dq": [[np.zeros_like(q) for q in qs] for qs in shared["q"]],
            }
        dpb = dp / len(paths)
        for pc in paths:
            self._path_backward(shared, pc, dpb, grads, acc)
        if acc is not None:
            self._shared_backward(cache["static"], shared, acc, grads)

    def predict(self, user_idx: int, friend_paths: list[list[int]], doc) -> float:
        return self.forward(user_idx, friend_paths, doc, rng=None)[0]

    def encode(self, user_idx: int, friends: list[int], doc):
        """Single-path inspection helper: (UserContext, DocEncoding, p)."""
        p, cache = self.forward(user_idx, [friends], doc, rng=None)
        pc = cache["paths"][0]
        ctx = UserContext(
            x_word=pc["ctx_w"]["x"],
            x_sent=pc["ctx_s"]["x"],
            alpha_word=pc["ctx_w"]["alpha"],
            alpha_sent=pc["ctx_s"]["alpha"],
        )
        enc = DocEncoding(
            sentence_vectors=pc["s"],
            word_attention=pc.get("word_alpha", []),
            states=pc["H"],
            sentence_attention=pc["beta"],
            doc_vector=pc["d"],
        )
        return ctx, enc, p
