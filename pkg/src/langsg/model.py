"""Triplet Transformer in numpy with exact reverse-mode gradients.

Token layout for one region pair (k, l) of an image with N regions::

    [v_0 ... v_{N-1}, t_subject, t_MASK, t_object, t_SEP]

Visual tokens keep the image's region order; the role of each region
(subject, object, context) enters only through its type embedding, so
attention over the context tokens is permutation-equivariant.

All pairs in one batch come from the same image, which lets the
projections of region features and geometry be computed once and
broadcast over the batch.  Every array is float64.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

from .labeler import LossWeights

SUBJECT_ROLE, OBJECT_ROLE, CONTEXT_ROLE = 0, 1, 2
OOV_TOKEN, MASK_TOKEN, SEP_TOKEN = "[OOV]", "[MASK]", "[SEP]"
SPECIAL_TOKENS = (OOV_TOKEN, MASK_TOKEN, SEP_TOKEN)
N_TEXT = 4
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    d: int = 768
    n_layers: int = 2
    n_heads: int = 12
    head_dim: int = 64
    mlp_dim: int = 3072
    d_vis: int = 1536
    d_word: int = 200
    word_vocab_size: int = 604
    n_obj_classes: int = 151
    n_pred_classes: int = 51
    dropout_p: float = 0.1
    ln_eps: float = 1e-12

    def __post_init__(self):
        if self.n_heads * self.head_dim != self.d:
            raise ValueError(f"n_heads*head_dim={self.n_heads * self.head_dim} != d={self.d}")
        for name in ("d", "n_layers", "n_heads", "head_dim", "mlp_dim", "d_vis", "d_word",
                     "word_vocab_size", "n_obj_classes", "n_pred_classes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")


class WordVocab:
    """Detector tag strings -> rows of the word-embedding table.

    Rows 0..2 are [OOV], [MASK] and [SEP]; tags are lowercased.
    """

    def __init__(self, words: Sequence[str]):
        words = [w.lower() for w in words if w not in SPECIAL_TOKENS]
        self.words = list(SPECIAL_TOKENS) + sorted(set(words))
        self._index = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def index(self, tag: str) -> int:
        return self._index.get(tag.lower(), 0)

    @property
    def mask(self) -> int:
        return 1

    @property
    def sep(self) -> int:
        return 2


ModelParams = dict  # name -> np.ndarray, insertion order is the registry order


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, dw = cfg.d, cfg.d_word
    shapes: dict[str, tuple[int, ...]] = {
        "vis.W_r": (cfg.d_vis, d), "vis.b_r": (d,), "vis.ln_r.g": (d,), "vis.ln_r.b": (d,),
        "vis.W_p": (7, d), "vis.b_p": (d,), "vis.ln_p.g": (d,), "vis.ln_p.b": (d,),
        "vis.type_emb": (3, d), "vis.ln.g": (d,), "vis.ln.b": (d,),
        "txt.word_emb": (cfg.word_vocab_size, dw), "txt.W_e": (dw, d), "txt.b_e": (d,),
        "txt.pos_emb": (N_TEXT, d), "txt.ln.g": (d,), "txt.ln.b": (d,),
    }
    for i in range(cfg.n_layers):
        p = f"enc.{i}."
        for m in ("q", "k", "v", "o"):
            shapes[p + f"W_{m}"] = (d, d)
            shapes[p + f"b_{m}"] = (d,)
        shapes.update({
            p + "ln1.g": (d,), p + "ln1.b": (d,),
            p + "W_1": (d, cfg.mlp_dim), p + "b_1": (cfg.mlp_dim,),
            p + "W_2": (cfg.mlp_dim, d), p + "b_2": (d,),
            p + "ln2.g": (d,), p + "ln2.b": (d,),
        })
    shapes.update({
        "head.W_v": (dw, d), "head.b_v": (d,),
        "head.obj.W_1": (d, d), "head.obj.b_1": (d,),
        "head.obj.W_2": (d, cfg.n_obj_classes), "head.obj.b_2": (cfg.n_obj_classes,),
    })
    for m in ("ts", "to", "vs", "vo"):
        shapes[f"head.W_{m}"] = (d, d)
        shapes[f"head.b_{m}"] = (d,)
    shapes.update({
        "head.pred.W_1": (d, d), "head.pred.b_1": (d,),
        "head.pred.W_2": (d, cfg.n_pred_classes), "head.pred.b_2": (cfg.n_pred_classes,),
    })
    return shapes


def init_params(cfg: ModelConfig, seed: int, word_table: np.ndarray | None = None) -> ModelParams:
    """LN gains 1 and biases 0, embeddings N(0, 0.02), weights U(±1/sqrt(fan_in))."""
    rng = np.random.default_rng(seed)
    params: ModelParams = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if name.endswith(".g"):
            params[name] = np.ones(shape)
        elif leaf.startswith("b") and len(shape) == 1:
            params[name] = np.zeros(shape)
        elif name.endswith("_emb"):
            params[name] = rng.normal(0.0, 0.02, size=shape)
        else:
            bound = 1.0 / math.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
    if word_table is not None:
        if word_table.shape != params["txt.word_emb"].shape:
            raise ValueError(
                f"word table shape {word_table.shape} != {params['txt.word_emb'].shape}"
            )
        params["txt.word_emb"] = np.array(word_table, dtype=np.float64)
    return params


# ---------------------------------------------------------------------------
# Primitive layers
# ---------------------------------------------------------------------------


def linear(x, W, b):
    return x @ W + b


def linear_backward(dy, x, W):
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dy @ W.T, x2.T @ dy2, dy2.sum(axis=0)


def layer_norm(x, g, b, eps):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    return xhat * g + b, (xhat, rstd, g)


def layer_norm_backward(dy, cache):
    xhat, rstd, g = cache
    red = tuple(range(dy.ndim - 1))
    dg = (dy * xhat).sum(axis=red)
    db = dy.sum(axis=red)
    dxhat = dy * g
    dx = rstd * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


_SQRT_HALF = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x):
    return 0.5 * x * (1.0 + erf(x * _SQRT_HALF))


def gelu_backward(dy, x):
    cdf = 0.5 * (1.0 + erf(x * _SQRT_HALF))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return dy * (cdf + x * pdf)


def softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def dropout(x, p, rng):
    """Inverted dropout; returns (y, mask) with mask None when inactive."""
    if rng is None or p == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


def _check(name, x):
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite activations in {name}")


# ---------------------------------------------------------------------------
# Model stages
# ---------------------------------------------------------------------------


@dataclass
class PairBatch:
    """Ordered region pairs from one image.

    ``features`` (N, d_vis) and ``geometry`` (N, 7) are shared by all pairs;
    ``subj``/``obj`` (B,) are region indices and ``word_ids`` (B, 4) are
    word rows for [subject tag, MASK, object tag, SEP].
    """

    features: np.ndarray
    geometry: np.ndarray
    subj: np.ndarray
    obj: np.ndarray
    word_ids: np.ndarray

    def __post_init__(self):
        self.subj = np.asarray(self.subj, dtype=np.int64)
        self.obj = np.asarray(self.obj, dtype=np.int64)
        self.word_ids = np.asarray(self.word_ids, dtype=np.int64)
        if np.any(self.subj == self.obj):
            raise ValueError("subject and object region must differ")

    @property
    def size(self) -> int:
        return len(self.subj)

    @property
    def n_regions(self) -> int:
        return self.features.shape[0]

    def roles(self) -> np.ndarray:
        r = np.full((self.size, self.n_regions), CONTEXT_ROLE, dtype=np.int64)
        idx = np.arange(self.size)
        r[idx, self.subj] = SUBJECT_ROLE
        r[idx, self.obj] = OBJECT_ROLE
        return r


def make_batch(features, geometry, pairs, tags, words: WordVocab) -> PairBatch:
    """Batch for ``pairs`` [(k, l), ...] of one image; ``tags`` are the detector labels."""
    pairs = list(pairs)
    subj = np.array([k for k, _ in pairs], dtype=np.int64)
    obj = np.array([l for _, l in pairs], dtype=np.int64)
    tag_ids = np.array([words.index(t) for t in tags], dtype=np.int64)
    word_ids = np.stack(
        [tag_ids[subj], np.full(len(pairs), words.mask), tag_ids[obj], np.full(len(pairs), words.sep)],
        axis=1,
    ) if pairs else np.zeros((0, 4), dtype=np.int64)
    return PairBatch(np.asarray(features, dtype=np.float64), np.asarray(geometry, dtype=np.float64),
                     subj, obj, word_ids)


def visual_embed(params, cfg: ModelConfig, features, geometry, roles):
    """LN(LN(W_r x^r) + LN(W_p x^p) + e^t) for every region of every pair -> (B, N, d)."""
    if features.shape[-1] != cfg.d_vis:
        raise ValueError(f"region feature length {features.shape[-1]} != d_vis {cfg.d_vis}")
    roles = np.atleast_2d(roles)
    a = linear(features, params["vis.W_r"], params["vis.b_r"])
    la, ln_r = layer_norm(a, params["vis.ln_r.g"], params["vis.ln_r.b"], cfg.ln_eps)
    c = linear(geometry, params["vis.W_p"], params["vis.b_p"])
    lc, ln_p = layer_norm(c, params["vis.ln_p.g"], params["vis.ln_p.b"], cfg.ln_eps)
    pre = (la + lc)[None, :, :] + params["vis.type_emb"][roles]
    v, ln = layer_norm(pre, params["vis.ln.g"], params["vis.ln.b"], cfg.ln_eps)
    _check("visual embedder", v)
    return v, {"features": features, "geometry": geometry, "roles": roles,
               "ln_r": ln_r, "ln_p": ln_p, "ln": ln}


def visual_embed_backward(dv, cache, params, grads):
    dpre, dg, db = layer_norm_backward(dv, cache["ln"])
    grads["vis.ln.g"] += dg
    grads["vis.ln.b"] += db
    np.add.at(grads["vis.type_emb"], cache["roles"], dpre)
    dshared = dpre.sum(axis=0)
    da, dg, db = layer_norm_backward(dshared, cache["ln_r"])
    grads["vis.ln_r.g"] += dg
    grads["vis.ln_r.b"] += db
    _, dW, db = linear_backward(da, cache["features"], params["vis.W_r"])
    grads["vis.W_r"] += dW
    grads["vis.b_r"] += db
    dc, dg, db = layer_norm_backward(dshared, cache["ln_p"])
    grads["vis.ln_p.g"] += dg
    grads["vis.ln_p.b"] += db
    _, dW, db = linear_backward(dc, cache["geometry"], params["vis.W_p"])
    grads["vis.W_p"] += dW
    grads["vis.b_p"] += db


def textual_embed(params, cfg: ModelConfig, word_vecs):
    """LN(W_e x^o + e^p) for the 4 text slots; ``word_vecs`` is (B, 4, d_word)."""
    u = linear(word_vecs, params["txt.W_e"], params["txt.b_e"]) + params["txt.pos_emb"][None]
    t, ln = layer_norm(u, params["txt.ln.g"], params["txt.ln.b"], cfg.ln_eps)
    _check("textual embedder", t)
    return t, {"word_vecs": word_vecs, "ln": ln}


def textual_embed_backward(dt, cache, params, grads):
    du, dg, db = layer_norm_backward(dt, cache["ln"])
    grads["txt.ln.g"] += dg
    grads["txt.ln.b"] += db
    grads["txt.pos_emb"] += du.sum(axis=0)
    dx, dW, db = linear_backward(du, cache["word_vecs"], params["txt.W_e"])
    grads["txt.W_e"] += dW
    grads["txt.b_e"] += db
    return dx


def _attention(params, p, h, cfg):
    B, T, d = h.shape
    H, hd = cfg.n_heads, cfg.head_dim

    def split(x):
        return x.reshape(B, T, H, hd).transpose(0, 2, 1, 3)

    q = split(linear(h, params[p + "W_q"], params[p + "b_q"]))
    k = split(linear(h, params[p + "W_k"], params[p + "b_k"]))
    v = split(linear(h, params[p + "W_v"], params[p + "b_v"]))
    scale = 1.0 / math.sqrt(hd)
    probs = softmax((q @ k.transpose(0, 1, 3, 2)) * scale)
    ctx = (probs @ v).transpose(0, 2, 1, 3).reshape(B, T, d)
    return ctx, {"q": q, "k": k, "v": v, "probs": probs, "scale": scale, "h": h}


def _attention_backward(dctx, c, params, p, grads, cfg):
    B, T, d = dctx.shape
    H, hd = cfg.n_heads, cfg.head_dim
    dctx = dctx.reshape(B, T, H, hd).transpose(0, 2, 1, 3)
    probs = c["probs"]
    dprobs = dctx @ c["v"].transpose(0, 1, 3, 2)
    dv = probs.transpose(0, 1, 3, 2) @ dctx
    ds = probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True)) * c["scale"]
    dq = ds @ c["k"]
    dk = ds.transpose(0, 1, 3, 2) @ c["q"]
    dh = np.zeros_like(c["h"])
    for m, dm in (("q", dq), ("k", dk), ("v", dv)):
        dm = dm.transpose(0, 2, 1, 3).reshape(B, T, d)
        dx, dW, db = linear_backward(dm, c["h"], params[p + f"W_{m}"])
        grads[p + f"W_{m}"] += dW
        grads[p + f"b_{m}"] += db
        dh += dx
    return dh


def encoder_forward(params, cfg: ModelConfig, tokens, rng=None):
    """Post-LN transformer layers over (B, T, d) tokens; dropout iff ``rng`` is given."""
    h = tokens
    caches = []
    for i in range(cfg.n_layers):
        p = f"enc.{i}."
        ctx, att = _attention(params, p, h, cfg)
        a = linear(ctx, params[p + "W_o"], params[p + "b_o"])
        a, mask_a = dropout(a, cfg.dropout_p, rng)
        h1, ln1 = layer_norm(h + a, params[p + "ln1.g"], params[p + "ln1.b"], cfg.ln_eps)
        _check(f"encoder layer {i} attention", h1)
        m1 = linear(h1, params[p + "W_1"], params[p + "b_1"])
        g = gelu(m1)
        m2 = linear(g, params[p + "W_2"], params[p + "b_2"])
        m2, mask_m = dropout(m2, cfg.dropout_p, rng)
        h2, ln2 = layer_norm(h1 + m2, params[p + "ln2.g"], params[p + "ln2.b"], cfg.ln_eps)
        _check(f"encoder layer {i} mlp", h2)
        caches.append({"att": att, "ctx": ctx, "mask_a": mask_a, "ln1": ln1, "h1": h1,
                       "m1": m1, "g": g, "mask_m": mask_m, "ln2": ln2})
        h = h2
    return h, caches


def encoder_backward(dout, caches, params, cfg, grads):
    dh = dout
    for i in reversed(range(cfg.n_layers)):
        p = f"enc.{i}."
        c = caches[i]
        dsum, dg, db = layer_norm_backward(dh, c["ln2"])
        grads[p + "ln2.g"] += dg
        grads[p + "ln2.b"] += db
        dh1 = dsum.copy()
        dm2 = dsum * c["mask_m"] if c["mask_m"] is not None else dsum
        dgel, dW, db = linear_backward(dm2, c["g"], params[p + "W_2"])
        grads[p + "W_2"] += dW
        grads[p + "b_2"] += db
        dm1 = gelu_backward(dgel, c["m1"])
        dx, dW, db = linear_backward(dm1, c["h1"], params[p + "W_1"])
        grads[p + "W_1"] += dW
        grads[p + "b_1"] += db
        dh1 += dx
        dsum, dg, db = layer_norm_backward(dh1, c["ln1"])
        grads[p + "ln1.g"] += dg
        grads[p + "ln1.b"] += db
        dh = dsum.copy()
        da = dsum * c["mask_a"] if c["mask_a"] is not None else dsum
        dctx, dW, db = linear_backward(da, c["ctx"], params[p + "W_o"])
        grads[p + "W_o"] += dW
        grads[p + "b_o"] += db
        dh += _attention_backward(dctx, c["att"], params, p, grads, cfg)
    return dh


def _mlp_head(params, prefix, x):
    z = linear(x, params[prefix + "W_1"], params[prefix + "b_1"])
    r = np.maximum(z, 0.0)
    return linear(r, params[prefix + "W_2"], params[prefix + "b_2"]), {"x": x, "z": z, "r": r}


def _mlp_head_backward(dlogits, c, params, prefix, grads):
    dr, dW, db = linear_backward(dlogits, c["r"], params[prefix + "W_2"])
    grads[prefix + "W_2"] += dW
    grads[prefix + "b_2"] += db
    dz = dr * (c["z"] > 0)
    dx, dW, db = linear_backward(dz, c["x"], params[prefix + "W_1"])
    grads[prefix + "W_1"] += dW
    grads[prefix + "b_1"] += db
    return dx


def classify(params, vk, vl, tk, tp, tl, xk, xl):
    """Fuse encoder outputs into subject/predicate/object logits (each (B, C))."""
    s = vk + linear(xk, params["head.W_v"], params["head.b_v"])
    o = vl + linear(xl, params["head.W_v"], params["head.b_v"])
    p = (
        tp
        + linear(tk, params["head.W_ts"], params["head.b_ts"])
        + linear(tl, params["head.W_to"], params["head.b_to"])
        + linear(vk, params["head.W_vs"], params["head.b_vs"])
        + linear(vl, params["head.W_vo"], params["head.b_vo"])
    )
    ls, cs = _mlp_head(params, "head.obj.", s)
    lo, co = _mlp_head(params, "head.obj.", o)
    lp, cp = _mlp_head(params, "head.pred.", p)
    return (ls, lp, lo), {"vk": vk, "vl": vl, "tk": tk, "tl": tl, "xk": xk, "xl": xl,
                          "s": cs, "o": co, "p": cp}


def classify_backward(dls, dlp, dlo, c, params, grads):
    """Returns gradients w.r.t. (vk, vl, tk, tp, tl, xk, xl)."""
    ds = _mlp_head_backward(dls, c["s"], params, "head.obj.", grads)
    do = _mlp_head_backward(dlo, c["o"], params, "head.obj.", grads)
    dp = _mlp_head_backward(dlp, c["p"], params, "head.pred.", grads)
    dvk, dvl, dtp = ds.copy(), do.copy(), dp.copy()
    dxk, dW, db = linear_backward(ds, c["xk"], params["head.W_v"])
    grads["head.W_v"] += dW
    grads["head.b_v"] += db
    dxl, dW, db = linear_backward(do, c["xl"], params["head.W_v"])
    grads["head.W_v"] += dW
    grads["head.b_v"] += db
    extra = {}
    for m, src in (("ts", "tk"), ("to", "tl"), ("vs", "vk"), ("vo", "vl")):
        dx, dW, db = linear_backward(dp, c[src], params[f"head.W_{m}"])
        grads[f"head.W_{m}"] += dW
        grads[f"head.b_{m}"] += db
        extra[src] = dx
    dvk += extra["vk"]
    dvl += extra["vl"]
    return dvk, dvl, extra["tk"], dtp, extra["tl"], dxk, dxl


# ---------------------------------------------------------------------------
# Full forward / backward
# ---------------------------------------------------------------------------


@dataclass
class Outputs:
    subject_logits: np.ndarray
    predicate_logits: np.ndarray
    object_logits: np.ndarray

    @property
    def subject_probs(self):
        return softmax(self.subject_logits)

    @property
    def predicate_probs(self):
        return softmax(self.predicate_logits)

    @property
    def object_probs(self):
        return softmax(self.object_logits)


@dataclass
class ForwardTrace:
    batch: PairBatch
    word_vecs: np.ndarray
    vis: dict
    txt: dict
    mask_v: np.ndarray | None
    mask_t: np.ndarray | None
    enc: list
    heads: dict
    override: bool = False


def forward(params, cfg: ModelConfig, batch: PairBatch, *, train: bool = False,
            rng: np.random.Generator | None = None, word_override: np.ndarray | None = None):
    """Logits for every pair of ``batch``; returns (Outputs, ForwardTrace or None).

    ``train=True`` needs ``rng`` for dropout masks and keeps the activation
    trace used by :func:`backward`.  ``word_override`` (B, 2, d_word)
    replaces the subject and object tag embeddings (input-ablation probe).
    """
    if train and rng is None:
        raise ValueError("train mode needs a generator for dropout")
    drop_rng = rng if train else None
    B, N = batch.size, batch.n_regions
    word_vecs = params["txt.word_emb"][batch.word_ids]
    if word_override is not None:
        word_vecs = word_vecs.copy()
        word_vecs[:, 0] = word_override[:, 0]
        word_vecs[:, 2] = word_override[:, 1]

    v, vis_c = visual_embed(params, cfg, batch.features, batch.geometry, batch.roles())
    v, mask_v = dropout(v, cfg.dropout_p, drop_rng)
    t, txt_c = textual_embed(params, cfg, word_vecs)
    t, mask_t = dropout(t, cfg.dropout_p, drop_rng)
    tokens = np.concatenate([v, t], axis=1)
    out, enc_c = encoder_forward(params, cfg, tokens, drop_rng)

    idx = np.arange(B)
    vk, vl = out[idx, batch.subj], out[idx, batch.obj]
    tk, tp, tl = out[:, N], out[:, N + 1], out[:, N + 2]
    (ls, lp, lo), head_c = classify(params, vk, vl, tk, tp, tl, word_vecs[:, 0], word_vecs[:, 2])
    _check("classification heads", ls)
    _check("classification heads", lp)
    _check("classification heads", lo)
    outputs = Outputs(ls, lp, lo)
    if not train:
        return outputs, None
    return outputs, ForwardTrace(batch, word_vecs, vis_c, txt_c, mask_v, mask_t, enc_c, head_c,
                                 word_override is not None)


def backward(params, cfg: ModelConfig, trace: ForwardTrace | None, dls, dlp, dlo,
             trainable: Callable[[str], bool] | None = None) -> dict[str, np.ndarray]:
    """Gradients of every parameter given gradients w.r.t. the three logit arrays."""
    if trace is None:
        raise ValueError("backward needs the trace of a train-mode forward pass")
    grads = {name: np.zeros_like(w) for name, w in params.items()}
    batch = trace.batch
    B, N = batch.size, batch.n_regions
    dvk, dvl, dtk, dtp, dtl, dxk, dxl = classify_backward(dls, dlp, dlo, trace.heads, params, grads)

    dout = np.zeros((B, N + N_TEXT, cfg.d))
    idx = np.arange(B)
    np.add.at(dout, (idx, batch.subj), dvk)
    np.add.at(dout, (idx, batch.obj), dvl)
    dout[:, N] += dtk
    dout[:, N + 1] += dtp
    dout[:, N + 2] += dtl

    dtokens = encoder_backward(dout, trace.enc, params, cfg, grads)
    dv, dt = dtokens[:, :N], dtokens[:, N:]
    if trace.mask_v is not None:
        dv = dv * trace.mask_v
    if trace.mask_t is not None:
        dt = dt * trace.mask_t
    visual_embed_backward(dv, trace.vis, params, grads)
    dword = textual_embed_backward(dt, trace.txt, params, grads)
    dword[:, 0] += dxk
    dword[:, 2] += dxl
    if trace.override:
        dword[:, 0] = 0.0
        dword[:, 2] = 0.0
    np.add.at(grads["txt.word_emb"], batch.word_ids, dword)

    if trainable is not None:
        for name in grads:
            if not trainable(name):
                grads[name][...] = 0.0
    return grads


@dataclass(frozen=True)
class LossLambdas:
    subject: float = 0.5
    predicate: float = 1.0
    object: float = 0.5


def triplet_loss(subject_probs, predicate_probs, object_probs, labels,
                 weights: LossWeights | None = None, lambdas: LossLambdas = LossLambdas()):
    """Per-example λ_s·w_s·CE_s + λ_p·w_p·CE_p + λ_o·w_o·CE_o.

    ``labels`` is (B, 3) of (subject, predicate, object) indices.  Returns
    (total per example, dict of the unscaled weighted CE terms per example).
    """
    labels = np.atleast_2d(np.asarray(labels, dtype=np.int64))
    idx = np.arange(labels.shape[0])
    ys, yp, yo = labels[:, 0], labels[:, 1], labels[:, 2]
    ws, wp, wo = _weights_for(labels, weights)
    ce_s = -np.log(np.maximum(np.atleast_2d(subject_probs)[idx, ys], PROB_FLOOR))
    ce_p = -np.log(np.maximum(np.atleast_2d(predicate_probs)[idx, yp], PROB_FLOOR))
    ce_o = -np.log(np.maximum(np.atleast_2d(object_probs)[idx, yo], PROB_FLOOR))
    parts = {"s": ws * ce_s, "p": wp * ce_p, "o": wo * ce_o}
    total = lambdas.subject * parts["s"] + lambdas.predicate * parts["p"] + lambdas.object * parts["o"]
    return total, parts


def _weights_for(labels, weights: LossWeights | None):
    if weights is None:
        one = np.ones(labels.shape[0])
        return one, one, one
    return (weights.object_weights[labels[:, 0]], weights.predicate_weights[labels[:, 1]],
            weights.object_weights[labels[:, 2]])


def triplet_loss_logit_grads(outputs: Outputs, labels, weights, lambdas: LossLambdas, scale: float):
    """Gradients of ``scale * sum(triplet_loss)`` w.r.t. the three logit arrays."""
    labels = np.asarray(labels, dtype=np.int64)
    idx = np.arange(labels.shape[0])
    ws, wp, wo = _weights_for(labels, weights)
    grads = []
    for logits, y, w, lam in ((outputs.subject_logits, labels[:, 0], ws, lambdas.subject),
                              (outputs.predicate_logits, labels[:, 1], wp, lambdas.predicate),
                              (outputs.object_logits, labels[:, 2], wo, lambdas.object)):
        p = softmax(logits)
        live = p[idx, y] > PROB_FLOOR
        g = p.copy()
        g[idx, y] -= 1.0
        g *= (scale * lam * w * live)[:, None]
        grads.append(g)
    return tuple(grads)


def loss_and_grads(params, cfg, batch: PairBatch, labels, weights=None,
                   lambdas: LossLambdas = LossLambdas(), rng=None, scale: float | None = None,
                   trainable=None):
    """Summed loss over the batch times ``scale`` (default 1/B), its parts and gradients."""
    labels = np.asarray(labels, dtype=np.int64)
    if scale is None:
        scale = 1.0 / batch.size
    rng = rng if rng is not None else np.random.default_rng(0)
    outputs, trace = forward(params, cfg, batch, train=True, rng=rng)
    total, parts = triplet_loss(outputs.subject_probs, outputs.predicate_probs,
                                outputs.object_probs, labels, weights, lambdas)
    dls, dlp, dlo = triplet_loss_logit_grads(outputs, labels, weights, lambdas, scale)
    grads = backward(params, cfg, trace, dls, dlp, dlo, trainable)
    sums = {k: float(v.sum()) for k, v in parts.items()}
    return float(total.sum()) * scale, sums, grads


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"LSGCKPT\x00"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParams
    words: list[str]
    object_names: list[str]
    predicate_names: list[str]
    frozen: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def word_vocab(self) -> WordVocab:
        wv = WordVocab(self.words)
        if wv.words != self.words:
            raise ValueError("checkpoint word list is not in canonical order")
        return wv


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    """Write the container described in the README (magic, version, JSON header, raw tensors)."""
    tensors = []
    offset = 0
    for name, arr in ckpt.params.items():
        nbytes = arr.size * 8
        tensors.append({"name": name, "shape": list(arr.shape), "dtype": "<f8",
                        "offset": offset, "nbytes": nbytes})
        offset += nbytes
    header = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(ckpt.config),
        "words": ckpt.words,
        "objects": ckpt.object_names,
        "predicates": ckpt.predicate_names,
        "frozen": ckpt.frozen,
        "meta": ckpt.meta,
        "tensors": tensors,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<IQ", CHECKPOINT_VERSION, len(hbytes)))
    buf.write(hbytes)
    for arr in ckpt.params.values():
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not a checkpoint file")
    version, hlen = struct.unpack("<IQ", raw[8:20])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    header = json.loads(raw[20 : 20 + hlen].decode("utf-8"))
    base = 20 + hlen
    params: ModelParams = {}
    for t in header["tensors"]:
        start = base + t["offset"]
        arr = np.frombuffer(raw[start : start + t["nbytes"]], dtype="<f8").reshape(t["shape"])
        params[t["name"]] = arr.astype(np.float64, copy=True)
    return Checkpoint(ModelConfig(**header["config"]), params, header["words"], header["objects"],
                      header["predicates"], header.get("frozen", []), header.get("meta", {}))


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_embedding_table(path: str | Path, words: WordVocab, d_word: int,
                         seed: int = 0) -> np.ndarray:
    """Word table from a whitespace text file ("word v1 ... vD" per line).

    Multi-word tags average their words' vectors; tags with any word
    missing, and the special rows, get small random vectors.
    """
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip().split(" ")
            if len(parts) < 2:
                continue
            if len(parts) - 1 != d_word:
                raise ValueError(f"{path}:{lineno}: expected {d_word} values, got {len(parts) - 1}")
            vectors[parts[0].lower()] = np.asarray(parts[1:], dtype=np.float64)
    rng = np.random.default_rng(seed)
    table = rng.normal(0.0, 0.02, size=(len(words), d_word))
    for i, w in enumerate(words.words):
        if w in SPECIAL_TOKENS:
            continue
        pieces = w.split()
        if all(p in vectors for p in pieces):
            table[i] = np.mean([vectors[p] for p in pieces], axis=0)
    return table
