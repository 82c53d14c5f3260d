"""Bag classifier: sentence fusion, attention pooling, dense layers, softmax.

Forward and backward passes are written out by hand over float64 numpy
arrays. The sentence embedding matrix is a frozen input; trainable tensors
live in ``ModelParams`` (side-information tables, attention query, three
dense layers).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .corpus import Bag, EmbeddingMatrix
from .errors import (
    BadLabelError,
    CacheMismatchError,
    EmptyBagError,
    ShapeMismatchError,
)
from .side_info import alias_vector, type_vector

ACTIVATIONS = ("tanh", "relu", "sigmoid")
MODES = ("train", "eval")

# floor inside the loss log; avoids -ln(0) on a saturated softmax
LOSS_EPS = 1e-12

TENSOR_NAMES = ("alias_table", "type_table", "q", "W1", "b1", "W2", "b2", "W3", "b3")


@dataclass(frozen=True)
class ModelConfig:
    d_s: int
    d_a: int
    d_t: int
    u1: int
    a1: str
    p1: float
    u2: int
    a2: str
    p2: float
    n_rel: int

    def __post_init__(self):
        for name in ("d_s", "d_a", "d_t", "u1", "u2", "n_rel"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ShapeMismatchError(f"{name} must be a positive integer, got {v!r}")
        for name in ("a1", "a2"):
            if getattr(self, name) not in ACTIVATIONS:
                raise ShapeMismatchError(
                    f"{name} must be one of {ACTIVATIONS}, got {getattr(self, name)!r}"
                )
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ShapeMismatchError(f"{name} must be in [0, 1), got {v!r}")

    @property
    def rep_dim(self) -> int:
        """Per-sentence representation width: embedding ++ alias vector."""
        return self.d_s + self.d_a

    @property
    def z_dim(self) -> int:
        """Classifier input width: bag vector ++ two type vectors."""
        return self.d_s + self.d_a + 2 * self.d_t


@dataclass
class ModelParams:
    alias_table: np.ndarray   # |aliases| x d_a
    type_table: np.ndarray    # |types| x d_t
    q: np.ndarray             # d_s + d_a
    W1: np.ndarray            # u1 x z_dim
    b1: np.ndarray            # u1
    W2: np.ndarray            # u2 x u1
    b2: np.ndarray            # u2
    W3: np.ndarray            # n_rel x u2
    b3: np.ndarray            # n_rel

    def tensors(self):
        for name in TENSOR_NAMES:
            yield name, getattr(self, name)

    def copy(self) -> "ModelParams":
        return ModelParams(**{name: arr.copy() for name, arr in self.tensors()})

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(arr)) for _, arr in self.tensors())


@dataclass
class Gradients:
    alias_table: np.ndarray
    type_table: np.ndarray
    q: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    def tensors(self):
        for name in TENSOR_NAMES:
            yield name, getattr(self, name)

    @staticmethod
    def zeros_like(params: ModelParams) -> "Gradients":
        return Gradients(**{name: np.zeros_like(arr) for name, arr in params.tensors()})


def validate_params(params: ModelParams, cfg: ModelConfig) -> None:
    """Check every tensor against the declared configuration."""
    expected = {
        "alias_table": (None, cfg.d_a),
        "type_table": (None, cfg.d_t),
        "q": (cfg.rep_dim,),
        "W1": (cfg.u1, cfg.z_dim),
        "b1": (cfg.u1,),
        "W2": (cfg.u2, cfg.u1),
        "b2": (cfg.u2,),
        "W3": (cfg.n_rel, cfg.u2),
        "b3": (cfg.n_rel,),
    }
    for name, arr in params.tensors():
        want = expected[name]
        got = arr.shape
        if len(want) != len(got):
            raise ShapeMismatchError(f"{name}: expected rank {len(want)}, got shape {got}")
        for w, g in zip(want, got):
            if w is not None and w != g:
                raise ShapeMismatchError(f"{name}: expected shape {want}, got {got}")


def _activate(name: str, x: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-x))
    raise ShapeMismatchError(f"unknown activation {name!r}")


def _activate_grad(name: str, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return 1.0 - post * post
    if name == "relu":
        return (pre > 0.0).astype(np.float64)
    if name == "sigmoid":
        return post * (1.0 - post)
    raise ShapeMismatchError(f"unknown activation {name!r}")


def stable_softmax(logits) -> np.ndarray:
    """exp(x - max) / sum; overflow-safe for any finite input."""
    x = np.asarray(logits, dtype=np.float64)
    e = np.exp(x - np.max(x))
    return e / np.sum(e)


def attention_pool(reps, q) -> tuple[np.ndarray, np.ndarray]:
    """Dot-product attention with a single learned query vector.

    e_i = q . s_i, alpha = softmax(e), bag vector b = sum_i alpha_i s_i.
    """
    s = np.asarray(reps, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] < 1:
        raise EmptyBagError("attention needs at least one sentence representation")
    qv = np.asarray(q, dtype=np.float64)
    if qv.shape != (s.shape[1],):
        raise ShapeMismatchError(f"query shape {qv.shape} vs rep dim {s.shape[1]}")
    alpha = stable_softmax(s @ qv)
    return alpha, alpha @ s


@dataclass
class ForwardCache:
    """Everything backward needs to replay the pass exactly."""

    mode: str
    a1: str
    a2: str
    s: np.ndarray           # n_sent x rep_dim
    att_logits: np.ndarray  # n_sent
    alpha: np.ndarray       # n_sent
    b: np.ndarray           # rep_dim
    z: np.ndarray           # z_dim
    h1_pre: np.ndarray
    h1: np.ndarray
    mask1: np.ndarray       # inverted-dropout scale factors (ones in eval)
    h1_drop: np.ndarray
    h2_pre: np.ndarray
    h2: np.ndarray
    mask2: np.ndarray
    h2_drop: np.ndarray
    logits: np.ndarray
    p: np.ndarray


def _dropout_mask(n: int, rate: float, mode: str, rng) -> np.ndarray:
    if mode != "train" or rate == 0.0:
        return np.ones(n)
    if rng is None:
        raise ValueError("train mode with a nonzero dropout rate needs an rng")
    keep = 1.0 - rate
    return (rng.random(n) < keep).astype(np.float64) / keep


def forward(bag: Bag, emb: EmbeddingMatrix, params: ModelParams, cfg: ModelConfig,
            mode: str = "eval", rng=None) -> ForwardCache:
    """Run the full pass over one bag. Eval mode is deterministic."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    validate_params(params, cfg)
    if emb.dim != cfg.d_s:
        raise ShapeMismatchError(f"embedding dim {emb.dim} vs configured d_s {cfg.d_s}")
    if len(bag.sentences) == 0:
        raise EmptyBagError("cannot run forward on an empty bag")

    s = np.empty((len(bag.sentences), cfg.rep_dim))
    for i, rec in enumerate(bag.sentences):
        s[i, :cfg.d_s] = emb.data[rec.emb_row]
        s[i, cfg.d_s:] = alias_vector(rec.alias_ids, params.alias_table)

    alpha, b = attention_pool(s, params.q)
    z = np.concatenate([
        b,
        type_vector(bag.sub_types, params.type_table),
        type_vector(bag.obj_types, params.type_table),
    ])

    h1_pre = params.W1 @ z + params.b1
    h1 = _activate(cfg.a1, h1_pre)
    mask1 = _dropout_mask(cfg.u1, cfg.p1, mode, rng)
    h1_drop = h1 * mask1

    h2_pre = params.W2 @ h1_drop + params.b2
    h2 = _activate(cfg.a2, h2_pre)
    mask2 = _dropout_mask(cfg.u2, cfg.p2, mode, rng)
    h2_drop = h2 * mask2

    logits = params.W3 @ h2_drop + params.b3
    p = stable_softmax(logits)

    return ForwardCache(mode=mode, a1=cfg.a1, a2=cfg.a2, s=s, att_logits=s @ params.q,
                        alpha=alpha, b=b, z=z,
                        h1_pre=h1_pre, h1=h1, mask1=mask1, h1_drop=h1_drop,
                        h2_pre=h2_pre, h2=h2, mask2=mask2, h2_drop=h2_drop,
                        logits=logits, p=p)


def cross_entropy(p, y: int) -> float:
    """-ln(p_y) with a 1e-12 floor."""
    probs = np.asarray(p, dtype=np.float64)
    if not isinstance(y, (int, np.integer)) or isinstance(y, bool) or not 0 <= y < probs.shape[0]:
        raise BadLabelError(f"label {y!r} outside 0..{probs.shape[0] - 1}")
    return float(-np.log(max(float(probs[y]), LOSS_EPS)))


def backward(cache: ForwardCache, bag: Bag, y: int, params: ModelParams) -> Gradients:
    """Exact gradients of cross_entropy(forward(bag), y) w.r.t. every tensor.

    Replays the dropout masks recorded in the cache; gradient flows into
    the alias table through per-sentence means and attention, and into the
    type table through the two type means.
    """
    if cache.mode != "train":
        raise CacheMismatchError("backward needs a cache produced in train mode")
    if cache.s.shape[0] != len(bag.sentences):
        raise CacheMismatchError(
            f"cache holds {cache.s.shape[0]} sentences, bag has {len(bag.sentences)}"
        )
    n_rel = params.b3.shape[0]
    if not isinstance(y, (int, np.integer)) or isinstance(y, bool) or not 0 <= y < n_rel:
        raise BadLabelError(f"label {y!r} outside 0..{n_rel - 1}")
    d_a = params.alias_table.shape[1]
    d_t = params.type_table.shape[1]
    rep_dim = cache.s.shape[1]
    d_s = rep_dim - d_a
    if cache.z.shape[0] != rep_dim + 2 * d_t:
        raise CacheMismatchError("cache widths disagree with the parameter tables")

    g = Gradients.zeros_like(params)

    # softmax-CE identity; the loss-value floor does not alter gradient flow
    d_logits = cache.p.copy()
    d_logits[y] -= 1.0

    g.W3 = np.outer(d_logits, cache.h2_drop)
    g.b3 = d_logits.copy()
    d_h2_drop = params.W3.T @ d_logits

    d_h2 = d_h2_drop * cache.mask2
    d_h2_pre = d_h2 * _activate_grad(cache.a2, cache.h2_pre, cache.h2)

    g.W2 = np.outer(d_h2_pre, cache.h1_drop)
    g.b2 = d_h2_pre.copy()
    d_h1_drop = params.W2.T @ d_h2_pre

    d_h1 = d_h1_drop * cache.mask1
    d_h1_pre = d_h1 * _activate_grad(cache.a1, cache.h1_pre, cache.h1)

    g.W1 = np.outer(d_h1_pre, cache.z)
    g.b1 = d_h1_pre.copy()
    d_z = params.W1.T @ d_h1_pre

    d_b = d_z[:rep_dim]
    d_t_sub = d_z[rep_dim:rep_dim + d_t]
    d_t_obj = d_z[rep_dim + d_t:]

    for tid in bag.sub_types:
        g.type_table[tid] += d_t_sub / len(bag.sub_types)
    for tid in bag.obj_types:
        g.type_table[tid] += d_t_obj / len(bag.obj_types)

    # attention: b = sum_j alpha_j s_j with alpha = softmax(s q)
    s, alpha = cache.s, cache.alpha
    d_alpha = s @ d_b                                   # dL/dalpha_j = d_b . s_j
    d_e = alpha * (d_alpha - float(alpha @ d_alpha))    # softmax jacobian
    g.q = s.T @ d_e
    d_s_rows = np.outer(alpha, d_b) + np.outer(d_e, params.q)

    for i, rec in enumerate(bag.sentences):
        d_alias_vec = d_s_rows[i, d_s:]
        ids = rec.alias_ids if rec.alias_ids else (0,)
        for aid in ids:
            g.alias_table[aid] += d_alias_vec / len(ids)

    return g


def predict(bag: Bag, emb: EmbeddingMatrix, params: ModelParams,
            cfg: ModelConfig) -> tuple[int, np.ndarray]:
    """Argmax relation under an eval-mode pass; ties go to the lowest id."""
    p = forward(bag, emb, params, cfg, mode="eval").p
    return int(np.argmax(p)), p
