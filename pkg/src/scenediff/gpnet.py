"""The guiding-points network.

Scene entities (human + objects) and the prompt are encoded, cross-attended
to produce per-entity attention weights w and translation vectors v, expanded
into per-point 12-parameter affine transform rows F, and composed into the
guiding point set S_tilde = sum_i w_i * (F_i applied to entity i's points).
The one-step denoiser injects S_tilde additively between two linear stages.

Everything is expressed as autodiff graphs over named parameters, built once
per (entity count, mode) and cached; the same parameter names appear in every
graph, so sub-networks (encoder / translation head / transform head) can be
evaluated standalone against the shared ParamStore.

Modes (training-time condition ablations):
  full          everything on
  no_v          no translation head, hence no guiding points (S_tilde = 0)
  no_F          per-entity translation only: F is the identity + v_i row
  objects_only  human masked out of the entity attention
  human_only    objects masked out of the entity attention
  no_text       prompt replaced by a learned constant embedding
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .autodiff import (Graph, ParamStore, evaluate, load_checkpoint,
                       save_checkpoint, value_and_gradients)
from .synthdata import Vocabulary

MODES = ("full", "no_v", "no_F", "objects_only", "human_only", "no_text")

MASK_SCORE = -1e9  # exp(-1e9) underflows to exactly 0, so masked weights vanish

D_EMBED = 64       # token embedding width (pre text-standardization layers)
D_ENC_HIDDEN = 32  # per-point encoder hidden width


class ModelError(ValueError):
    pass


@dataclass
class HyperParams:
    """Architecture + training widths.  Defaults are the full-scale settings;
    `desk()` is the small configuration the test suite trains."""

    n_points: int = 1024
    max_objects: int = 8
    d_text: int = 128
    d_v: int = 32
    d_f: int = 128
    d_time: int = 32
    attention_layers: int = 12
    heads: int = 8
    t_steps: int = 1000
    schedule: str = "linear"
    learning_rate: float = 1e-3
    batch_size: int = 8
    context_points: int = 0   # 0 = attend over all N points; else a stride subset

    def __post_init__(self):
        for name, val in asdict(self).items():
            if name not in ("schedule", "context_points") and val <= 0:
                raise ModelError(f"hyperparameter {name} must be positive")
        if self.d_v % self.heads or self.d_f % self.heads:
            raise ModelError("heads must divide d_v and d_f")

    @classmethod
    def desk(cls, **overrides) -> "HyperParams":
        base = dict(n_points=256, max_objects=8, d_text=128, d_v=32, d_f=64,
                    d_time=32, attention_layers=1, heads=2, t_steps=100,
                    schedule="cosine", learning_rate=1e-3, batch_size=8,
                    context_points=64)
        base.update(overrides)
        return cls(**base)


@dataclass
class GuidingPointsResult:
    w: np.ndarray        # (M+1,)
    v: np.ndarray        # (M+1, 3)
    F: np.ndarray        # (M+1, N, 12)
    S_bar: np.ndarray    # (M+1, N, 3)
    S_tilde: np.ndarray  # (N, 3)

    def __post_init__(self):
        if self.w.min() < 0 or abs(self.w.sum() - 1.0) > 1e-9:
            raise ModelError(f"w must be a probability vector, got {self.w}")
        recomposed = np.einsum("i,inj->nj", self.w, self.S_bar)
        if np.abs(recomposed - self.S_tilde).max() > 1e-9:
            raise ModelError("S_tilde is not the w-weighted sum of S_bar")


# ----------------------------------------------------------- graph builders

def _per_point_encoder(g: Graph, cloud, prefix: str, n: int):
    """Shared per-point transform plus an order-invariant pooled context."""
    w1 = g.param(f"{prefix}.w1", (3, D_ENC_HIDDEN))
    b1 = g.param(f"{prefix}.b1", (1, D_ENC_HIDDEN), init="zeros")
    w2 = g.param(f"{prefix}.w2", (D_ENC_HIDDEN, 3))
    b2 = g.param(f"{prefix}.b2", (1, 3), init="zeros")
    wc = g.param(f"{prefix}.wc", (3, 3))
    bc = g.param(f"{prefix}.bc", (1, 3), init="zeros")
    y = g.linear(g.gelu(g.linear(cloud, w1, b1)), w2, b2)
    ctx = g.linear(g.mean(y, axis=0, keepdims=True), wc, bc)
    return y + g.broadcast(ctx, (n, 3))


def _text_encoder(g: Graph, bow, vocab_size: int, hp: HyperParams):
    emb = g.param("text.emb", (vocab_size, D_EMBED))
    w1 = g.param("text.w1", (D_EMBED, hp.d_text))
    b1 = g.param("text.b1", (1, hp.d_text), init="zeros")
    w2 = g.param("text.w2", (hp.d_text, hp.d_text))
    b2 = g.param("text.b2", (1, hp.d_text), init="zeros")
    pooled = g.matmul(bow, emb)           # bow is already the token mean
    return g.linear(g.gelu(g.linear(pooled, w1, b1)), w2, b2)


def _translation_attention(g: Graph, e_prime, feats: list, hp: HyperParams,
                           mask_bias=None):
    """Entity attention keyed by the text.

    Per-entity descriptors are the mean over points of a learned per-point
    lift (mean pooling stays the reduction, but of expressive features, so a
    pooled descriptor can carry shape class, spread, and facing).  The w
    weights come from text-keyed scores softmaxed across entities, averaged
    over heads.  The z features come from text-conditioned attention ACROSS
    entities, so every entity's descriptor can see the anchor it relates to.
    """
    m1 = len(feats)
    lw1 = g.param("pool.w1", (3, hp.d_v))
    lb1 = g.param("pool.b1", (1, hp.d_v), init="zeros")
    lw2 = g.param("pool.w2", (hp.d_v, hp.d_v))
    lb2 = g.param("pool.b2", (1, hp.d_v), init="zeros")
    pooled = g.concat([
        g.mean(g.linear(g.gelu(g.linear(f, lw1, lb1)), lw2, lb2),
               axis=0, keepdims=True)
        for f in feats], axis=0)          # (M+1, d_v)

    wq = g.param("attn.q", (hp.d_v, hp.d_v))
    wk = g.param("attn.k", (hp.d_text, hp.d_v))
    wt = g.param("attn.t", (hp.d_text, hp.d_v))
    wq2 = g.param("attn.q2", (hp.d_v, hp.d_v))
    wk2 = g.param("attn.k2", (hp.d_v, hp.d_v))
    wv2 = g.param("attn.v2", (hp.d_v, hp.d_v))
    wo = g.param("attn.o", (hp.d_v, hp.d_v))
    q = g.matmul(pooled, wq)              # (M+1, d_v) text-scored queries
    k = g.matmul(e_prime, wk)             # (1, d_v)
    q2 = g.matmul(pooled, wq2) + g.broadcast(g.matmul(e_prime, wt), (m1, hp.d_v))
    k2 = g.matmul(pooled, wk2)
    v2 = g.matmul(pooled, wv2)
    dh = hp.d_v // hp.heads
    outs, weights = [], []
    for h in range(hp.heads):
        cols = (slice(None), slice(h * dh, (h + 1) * dh))
        # scale folded into the query: cheaper than scaling the score matrix
        scores = g.scale(q[cols], 1.0 / np.sqrt(dh)) @ g.transpose(k[cols])
        if mask_bias is not None:
            scores = scores + mask_bias
        weights.append(g.softmax(scores, axis=0))   # normalize across entities
        mix = g.scale(q2[cols], 1.0 / np.sqrt(dh)) @ g.transpose(k2[cols])
        if mask_bias is not None:
            mix = mix + g.transpose(mask_bias)      # masked entities give no keys
        outs.append(g.softmax(mix, axis=-1) @ v2[cols])
    z = g.matmul(g.concat(outs, axis=1), wo)
    w_vec = g.mean(g.concat(weights, axis=1), axis=1, keepdims=True)  # (M+1, 1)

    w1 = g.param("vmap.w1", (hp.d_text + 2 * hp.d_v, 64))
    b1 = g.param("vmap.b1", (1, 64), init="zeros")
    w2 = g.param("vmap.w2", (64, 3))
    b2 = g.param("vmap.b2", (1, 3), init="zeros")
    cat = g.concat([g.broadcast(e_prime, (m1, hp.d_text)), z, pooled], axis=1)
    v = g.linear(g.gelu(g.linear(cat, w1, b1)), w2, b2)
    return w_vec, v, z


def _transform_stack(g: Graph, feat, v_i, hp: HyperParams, n: int):
    """Per-entity point self-attention conditioned on the entity's translation
    vector; emits a 12-parameter affine row per point."""
    w_in = g.param("tf.in_w", (3, hp.d_f))
    b_in = g.param("tf.in_b", (1, hp.d_f), init="zeros")
    w_v = g.param("tf.v_w", (3, hp.d_f))
    x = g.linear(feat, w_in, b_in) + g.broadcast(g.matmul(v_i, w_v), (n, hp.d_f))
    dh = hp.d_f // hp.heads
    stride = max(1, n // hp.context_points) if hp.context_points else 1
    for layer in range(hp.attention_layers):
        p = f"tf{layer}"
        ln_g = g.param(f"{p}.ln_g", (hp.d_f,), init="ones")
        ln_b = g.param(f"{p}.ln_b", (hp.d_f,), init="zeros")
        wq = g.param(f"{p}.wq", (hp.d_f, hp.d_f))
        wk = g.param(f"{p}.wk", (hp.d_f, hp.d_f))
        wv = g.param(f"{p}.wv", (hp.d_f, hp.d_f))
        wo = g.param(f"{p}.wo", (hp.d_f, hp.d_f))
        xn = g.layernorm(x, ln_g, ln_b)
        # keys/values may come from a uniform stride subset of the points
        # (interior samples are exchangeable); queries stay per-point.
        ctx = xn if stride == 1 else xn[(slice(None, None, stride), slice(None))]
        q, k, val = g.matmul(xn, wq), g.matmul(ctx, wk), g.matmul(ctx, wv)
        outs = []
        for h in range(hp.heads):
            cols = (slice(None), slice(h * dh, (h + 1) * dh))
            scores = g.scale(q[cols], 1.0 / np.sqrt(dh)) @ g.transpose(k[cols])
            outs.append(g.softmax(scores, axis=-1) @ val[cols])
        x = x + g.matmul(g.concat(outs, axis=1), wo)
        ln2_g = g.param(f"{p}.ln2_g", (hp.d_f,), init="ones")
        ln2_b = g.param(f"{p}.ln2_b", (hp.d_f,), init="zeros")
        f_w1 = g.param(f"{p}.ffn_w1", (hp.d_f, hp.d_f))
        f_b1 = g.param(f"{p}.ffn_b1", (1, hp.d_f), init="zeros")
        f_w2 = g.param(f"{p}.ffn_w2", (hp.d_f, hp.d_f))
        f_b2 = g.param(f"{p}.ffn_b2", (1, hp.d_f), init="zeros")
        x = x + g.linear(g.gelu(g.linear(g.layernorm(x, ln2_g, ln2_b), f_w1, f_b1)),
                         f_w2, f_b2)
    ln_g = g.param("fmap.ln_g", (hp.d_f,), init="ones")
    ln_b = g.param("fmap.ln_b", (hp.d_f,), init="zeros")
    w1 = g.param("fmap.w1", (hp.d_f, 64))
    b1 = g.param("fmap.b1", (1, 64), init="zeros")
    # start at the identity transform: guiding points begin as the entity
    # clouds themselves, and training learns offsets/warps from there
    w2 = g.param("fmap.w2", (64, 12), init=("auto", 0.1))
    b2 = g.param("fmap.b2", (1, 12),
                 init=np.array([[1.0, 0, 0, 0, 0, 1.0, 0, 0, 0, 0, 1.0, 0]]))
    x = g.layernorm(x, ln_g, ln_b)
    return g.linear(g.gelu(g.linear(x, w1, b1)), w2, b2)


def _identity_plus_v_rows(g: Graph, v_i, n: int):
    """no_F rows: identity rotation, the entity translation at every point."""
    def col(i):
        return v_i[(slice(0, 1), slice(i, i + 1))]
    row = g.concat([g.const([[1.0, 0.0, 0.0]]), col(0),
                    g.const([[0.0, 1.0, 0.0]]), col(1),
                    g.const([[0.0, 0.0, 1.0]]), col(2)], axis=1)
    return g.broadcast(row, (n, 12))


def _apply_rows(g: Graph, rows, cloud):
    """In-graph version of applying per-point affine rows to points."""
    parts = []
    for k in range(3):
        lin = g.sum(g.mul(rows[(slice(None), slice(4 * k, 4 * k + 3))], cloud),
                    axis=1, keepdims=True)
        parts.append(lin + rows[(slice(None), slice(4 * k + 3, 4 * k + 4))])
    return g.concat(parts, axis=1)


def _denoiser_head(g: Graph, x_noisy, t_norm, s_tilde, hp: HyperParams, n: int):
    w_t = g.param("time.w", (1, hp.d_time))
    b_t = g.param("time.b", (1, hp.d_time), init="zeros")
    t_feat = g.repeat(g.linear(t_norm, w_t, b_t), n, axis=0)
    w_in = g.param("den.in_w", (3 + hp.d_time, 3))
    b_in = g.param("den.in_b", (1, 3), init="zeros")
    # identity out-projection: the prediction starts as x_enc + guiding points
    w_out = g.param("den.out_w", (3, 3), init=np.eye(3))
    b_out = g.param("den.out_b", (1, 3), init="zeros")
    x_enc = g.linear(g.concat([x_noisy, t_feat], axis=1), w_in, b_in)
    return g.linear(x_enc + s_tilde, w_out, b_out)


def _mask_bias_const(g: Graph, n_entities: int, mode: str):
    if mode == "objects_only" and n_entities > 1:
        bias = np.zeros((n_entities, 1))
        bias[0, 0] = MASK_SCORE
        return g.const(bias, name="mask_bias")
    if mode == "human_only" and n_entities > 1:
        bias = np.full((n_entities, 1), MASK_SCORE)
        bias[0, 0] = 0.0
        return g.const(bias, name="mask_bias")
    return None


def build_forward_graph(n_objects: int, hp: HyperParams, vocab_size: int,
                        mode: str = "full", with_loss: bool = False) -> Graph:
    """Full forward pass for a scene with `n_objects` objects (+ the human)."""
    if mode not in MODES:
        raise ModelError(f"unknown mode {mode!r}")
    n, m1 = hp.n_points, n_objects + 1
    g = Graph()
    clouds = [g.input(f"entity_{i}", (n, 3)) for i in range(m1)]
    x_noisy = g.input("x_noisy", (n, 3))
    t_norm = g.input("t_norm", (1, 1))

    gp_active = mode != "no_v" and not (mode == "objects_only" and n_objects == 0)
    if gp_active:
        if mode == "no_text":
            e_prime = g.param("text.const", (1, hp.d_text))
        else:
            bow = g.input("bow", (1, vocab_size))
            e_prime = _text_encoder(g, bow, vocab_size, hp)
        g.output("e_prime", e_prime)
        feats = [_per_point_encoder(g, c, "enc_h" if i == 0 else "enc_o", n)
                 for i, c in enumerate(clouds)]
        for i, f in enumerate(feats):
            g.output(f"feat_{i}", f)
        w_vec, v, _z = _translation_attention(g, e_prime, feats, hp,
                                              _mask_bias_const(g, m1, mode))
        g.output("w", w_vec)
        g.output("v", v)
        s_tilde = None
        for i in range(m1):
            v_i = v[(slice(i, i + 1), slice(None))]
            if mode == "no_F":
                rows = _identity_plus_v_rows(g, v_i, n)
            else:
                rows = _transform_stack(g, feats[i], v_i, hp, n)
            g.output(f"F_{i}", rows)
            s_bar = _apply_rows(g, rows, clouds[i])
            g.output(f"S_bar_{i}", s_bar)
            w_i = g.broadcast(w_vec[(slice(i, i + 1), slice(None))], (n, 3))
            term = g.mul(w_i, s_bar)
            s_tilde = term if s_tilde is None else s_tilde + term
    else:
        s_tilde = g.const(np.zeros((n, 3)), name="no_guiding_points")
    g.output("S_tilde", s_tilde)

    x0_hat = _denoiser_head(g, x_noisy, t_norm, s_tilde, hp, n)
    g.output("x0_hat", x0_hat)
    if with_loss:
        x0 = g.input("x0", (n, 3))
        diff = x0 - x0_hat
        g.output("loss", g.mean(diff * diff))
    return g


def build_denoiser_head_graph(hp: HyperParams) -> Graph:
    """Just the one-step denoiser, with the guiding points as an input leaf.
    During sampling the guiding-points branch is constant across timesteps,
    so the loop only needs this head."""
    n = hp.n_points
    g = Graph()
    x_noisy = g.input("x_noisy", (n, 3))
    t_norm = g.input("t_norm", (1, 1))
    s_tilde = g.input("s_tilde", (n, 3))
    g.output("x0_hat", _denoiser_head(g, x_noisy, t_norm, s_tilde, hp, n))
    return g


def build_translation_graph(n_objects: int, hp: HyperParams, mode: str = "full") -> Graph:
    """Standalone (w, v) head: inputs are the text feature and entity features."""
    n, m1 = hp.n_points, n_objects + 1
    g = Graph()
    e_prime = g.input("e_prime", (1, hp.d_text))
    feats = [g.input(f"feat_{i}", (n, 3)) for i in range(m1)]
    w_vec, v, z = _translation_attention(g, e_prime, feats, hp,
                                         _mask_bias_const(g, m1, mode))
    g.output("w", w_vec)
    g.output("v", v)
    g.output("z", z)
    return g


def build_transform_graph(n_objects: int, hp: HyperParams) -> Graph:
    """Standalone F head: inputs are translation vectors and entity features."""
    n, m1 = hp.n_points, n_objects + 1
    g = Graph()
    v = g.input("v", (m1, 3))
    for i in range(m1):
        feat = g.input(f"feat_{i}", (n, 3))
        rows = _transform_stack(g, feat, v[(slice(i, i + 1), slice(None))], hp, n)
        g.output(f"F_{i}", rows)
    return g


# --------------------------------------------------------------- the model

def compose_guiding_points(F, entity_clouds, w) -> GuidingPointsResult:
    """Pure-numpy composition: apply per-point rows to each entity's original
    cloud and take the w-weighted sum across entities."""
    F = np.asarray(F, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    clouds = np.asarray(entity_clouds, dtype=np.float64)
    mats = F.reshape(F.shape[0], F.shape[1], 3, 4)
    s_bar = np.einsum("inkj,inj->ink", mats[:, :, :, :3], clouds) + mats[:, :, :, 3]
    s_tilde = np.einsum("i,inj->nj", w, s_bar)
    return GuidingPointsResult(w, np.zeros((len(w), 3)), F, s_bar, s_tilde)


class GuidingPointsModel:
    """Model facade: caches graphs per (entity count, with_loss), owns the
    ParamStore, and exposes the network's stages plus a sampler denoiser."""

    def __init__(self, hp: HyperParams, vocab: Vocabulary, seed: int = 0,
                 mode: str = "full", params: ParamStore | None = None):
        if mode not in MODES:
            raise ModelError(f"unknown mode {mode!r}")
        self.hp = hp
        self.vocab = vocab
        self.mode = mode
        self.seed = seed
        self._graphs: dict = {}
        self.params = params if params is not None else ParamStore({}, seed=seed)
        self.graph_for(1, with_loss=True)  # materialize the full parameter set

    # ------------------------------------------------------------- plumbing

    def graph_for(self, n_objects: int, with_loss: bool = False) -> Graph:
        key = (n_objects, with_loss)
        if key not in self._graphs:
            g = build_forward_graph(n_objects, self.hp, len(self.vocab),
                                    self.mode, with_loss)
            self.params.ensure(g, seed=self.seed)
            self._graphs[key] = g
        return self._graphs[key]

    def _bind(self, entities, prompt, x_noisy, level):
        n = self.hp.n_points
        inputs = {}
        for i, cloud in enumerate(entities):
            cloud = np.asarray(cloud, dtype=np.float64)
            if cloud.shape != (n, 3):
                raise ModelError(f"entity {i} must be ({n}, 3), got {cloud.shape}")
            inputs[f"entity_{i}"] = cloud
        inputs["x_noisy"] = np.asarray(x_noisy, dtype=np.float64)
        inputs["t_norm"] = np.array([[(level + 1) / self.hp.t_steps]])
        gp_active = self.mode != "no_v" and not (
            self.mode == "objects_only" and len(entities) == 1)
        if gp_active and self.mode != "no_text":
            inputs["bow"] = self.vocab.bag_of_words(prompt)
        return inputs

    # ------------------------------------------------------------ the stages

    def encode_conditions(self, entities, prompt):
        """Per-point entity features (M+1, N, 3) and the text feature (d_text,)."""
        g = self.graph_for(len(entities) - 1)
        zeros = np.zeros((self.hp.n_points, 3))
        out = evaluate(g, self._bind(entities, prompt, zeros, 0), self.params)
        feats = np.stack([out[f"feat_{i}"] for i in range(len(entities))])
        return feats, out["e_prime"].reshape(-1)

    def attend_translations(self, e_prime, feats):
        """(w, v) from a text feature and per-entity point features."""
        m1 = len(feats)
        g = build_translation_graph(m1 - 1, self.hp, self.mode)
        self.params.ensure(g, seed=self.seed)
        inputs = {"e_prime": np.asarray(e_prime).reshape(1, -1)}
        for i in range(m1):
            inputs[f"feat_{i}"] = np.asarray(feats[i], dtype=np.float64)
        out = evaluate(g, inputs, self.params)
        return out["w"].reshape(-1), out["v"]

    def attend_transforms(self, v, feats):
        """Per-point transform rows (M+1, N, 12) from translations + features."""
        m1 = len(feats)
        g = build_transform_graph(m1 - 1, self.hp)
        self.params.ensure(g, seed=self.seed)
        inputs = {"v": np.asarray(v, dtype=np.float64)}
        for i in range(m1):
            inputs[f"feat_{i}"] = np.asarray(feats[i], dtype=np.float64)
        out = evaluate(g, inputs, self.params)
        return np.stack([out[f"F_{i}"] for i in range(m1)])

    def forward(self, entities, prompt, x_noisy, level):
        """One denoising step; returns (x0_hat, GuidingPointsResult | None)."""
        g = self.graph_for(len(entities) - 1)
        out = evaluate(g, self._bind(entities, prompt, x_noisy, level), self.params)
        gp = None
        if "w" in out:
            m1 = len(entities)
            gp = GuidingPointsResult(
                w=out["w"].reshape(-1),
                v=out["v"],
                F=np.stack([out[f"F_{i}"] for i in range(m1)]),
                S_bar=np.stack([out[f"S_bar_{i}"] for i in range(m1)]),
                S_tilde=out["S_tilde"],
            )
        return out["x0_hat"], gp

    def guiding_points(self, entities, prompt):
        """The (w, v, F, S_bar, S_tilde) bundle for a scene; None in no_v mode."""
        zeros = np.zeros((self.hp.n_points, 3))
        _, gp = self.forward(entities, prompt, zeros, 0)
        return gp

    def denoiser(self, entities, prompt):
        """Adapter for the sampling loops: (x_level, level, conditions) -> x0_hat.

        The guiding points are computed once (they do not depend on the noisy
        sample or the timestep); each step then runs only the denoiser head.
        """
        gp = self.guiding_points(entities, prompt)
        s_tilde = gp.S_tilde if gp is not None else np.zeros((self.hp.n_points, 3))
        key = ("head",)
        if key not in self._graphs:
            g = build_denoiser_head_graph(self.hp)
            self.params.ensure(g, seed=self.seed)
            self._graphs[key] = g
        head = self._graphs[key]
        t_steps = self.hp.t_steps

        def fn(x, level, _conditions):
            out = evaluate(head, {"x_noisy": x, "s_tilde": s_tilde,
                                  "t_norm": np.array([[(level + 1) / t_steps]])},
                           self.params, check_finite=False)
            return out["x0_hat"]
        return fn

    def loss_and_grads(self, entities, prompt, x0, x_noisy, level):
        g = self.graph_for(len(entities) - 1, with_loss=True)
        inputs = self._bind(entities, prompt, x_noisy, level)
        inputs["x0"] = np.asarray(x0, dtype=np.float64)
        outputs, grads = value_and_gradients(g, "loss", inputs, self.params)
        return outputs["loss"].item(), grads

    def loss_value(self, entities, prompt, x0, x_noisy, level):
        g = self.graph_for(len(entities) - 1, with_loss=True)
        inputs = self._bind(entities, prompt, x_noisy, level)
        inputs["x0"] = np.asarray(x0, dtype=np.float64)
        return evaluate(g, inputs, self.params, check_finite=False)["loss"].item()

    # ------------------------------------------------------------ persistence

    def save(self, path) -> None:
        path = Path(path)
        save_checkpoint(self.params, path)
        meta = {"hyperparams": asdict(self.hp), "mode": self.mode,
                "seed": self.seed, "vocab": self.vocab.tokens[1:]}
        (path / "model.json").write_text(json.dumps(meta, indent=2))

    @classmethod
    def load(cls, path) -> "GuidingPointsModel":
        path = Path(path)
        meta_file = path / "model.json"
        if not meta_file.is_file():
            raise FileNotFoundError(f"no model metadata at {meta_file}")
        meta = json.loads(meta_file.read_text())
        params = load_checkpoint(path)
        return cls(HyperParams(**meta["hyperparams"]), Vocabulary(meta["vocab"]),
                   seed=meta.get("seed", 0), mode=meta.get("mode", "full"),
                   params=params)
