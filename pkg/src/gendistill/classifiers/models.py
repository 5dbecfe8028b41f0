"""Student and teacher network definitions.

A model owns a ``ParamStore`` and exposes ``forward(batch, train, rng)`` →
logits plus ``backward(dlogits)``, which accumulates parameter gradients
into the store. There is no autodiff; each model hand-writes its backward
pass from the layer primitives.
"""
from dataclasses import dataclass, asdict

import numpy as np

from ..numerics import layers as L
from ..numerics.optim import ParamStore
from ..numerics.rng import Rng
from ..tokenizer import PAD


@dataclass(frozen=True)
class KimStudentConfig:
    embed_dim: int = 100
    filter_widths: tuple = (3, 4, 5)
    filters_per_width: int = 100
    dropout: float = 0.5
    max_len: int = 128

    def __post_init__(self):
        object.__setattr__(self, "filter_widths", tuple(self.filter_widths))
        if min(self.embed_dim, self.filters_per_width, self.max_len, *self.filter_widths) < 1:
            raise ValueError("KimStudentConfig sizes must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if self.max_len < max(self.filter_widths):
            raise ValueError(f"max_len={self.max_len} is shorter than the widest filter "
                             f"({max(self.filter_widths)})")


@dataclass(frozen=True)
class ResStudentConfig:
    embed_dim: int = 100
    hidden_layers: int = 3
    hidden_size: int = 100
    dropout: float = 0.5
    max_len: int = 128

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ValueError("hidden_layers must be >= 1")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")


@dataclass(frozen=True)
class BagConfig:
    """fastText-style bag of subword embeddings."""
    embed_dim: int = 100
    max_len: int = 128


@dataclass
class Batch:
    ids: np.ndarray       # (B, L) token ids, PAD-filled
    lengths: np.ndarray   # (B,) true token counts, >= 1

    def __len__(self):
        return self.ids.shape[0]


def make_batch(seqs, min_len=1, max_len=None):
    """Pad a list of id sequences to a common length (at least ``min_len``)."""
    if max_len is not None:
        seqs = [s[:max_len] for s in seqs]
    lengths = np.array([max(len(s), 1) for s in seqs], dtype=np.int64)
    width = max(int(lengths.max()), min_len)
    ids = np.full((len(seqs), width), PAD, dtype=np.int64)
    for i, s in enumerate(seqs):
        ids[i, :len(s)] = s
    return Batch(ids, lengths)


def _kaiming(rng, fan_in, shape):
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def _init_embedding(params, rng, vocab_size, dim):
    table = rng.uniform(-0.05, 0.05, size=(vocab_size, dim))
    table[PAD] = 0.0
    params.add("embed", table, frozen_rows=(PAD,))


class KimCNN:
    """Embedding → parallel conv widths → ReLU → max over time → concat → dropout → affine."""

    kind = "kim"

    def __init__(self, cfg, vocab_size, n_classes, seed=0):
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.n_classes = n_classes
        self.seed = seed
        rng = Rng(seed, "init", "kim")
        p = self.params = ParamStore()
        _init_embedding(p, rng.child("embed"), vocab_size, cfg.embed_dim)
        for w in cfg.filter_widths:
            p.add(f"conv{w}.W", _kaiming(rng.child("conv", w), w * cfg.embed_dim,
                                         (w, cfg.embed_dim, cfg.filters_per_width)))
            p.add(f"conv{w}.b", np.zeros(cfg.filters_per_width))
        n_feat = cfg.filters_per_width * len(cfg.filter_widths)
        p.add("out.W", _kaiming(rng.child("out"), n_feat, (n_feat, n_classes)))
        p.add("out.b", np.zeros(n_classes))
        self._cache = None

    @property
    def min_len(self):
        return max(self.cfg.filter_widths)

    def forward(self, batch, train=False, rng=None):
        p = self.params
        emb, c_emb = L.embedding_fwd(p.value("embed"), batch.ids)
        feats, c_conv = [], []
        for w in self.cfg.filter_widths:
            y, c_y = L.conv1d_fwd(emb, p.value(f"conv{w}.W"), p.value(f"conv{w}.b"))
            r, c_r = L.relu_fwd(y)
            n_valid = np.minimum(np.maximum(batch.lengths - w + 1, 1), y.shape[1])
            m, c_m = L.maxpool_time_fwd(r, n_valid)
            feats.append(m)
            c_conv.append((c_y, c_r, c_m))
        h = np.concatenate(feats, axis=1)
        h, c_d = L.dropout_fwd(h, self.cfg.dropout, rng, train)
        logits, c_out = L.affine_fwd(h, p.value("out.W"), p.value("out.b"))
        self._cache = (c_emb, c_conv, c_d, c_out)
        return logits

    def backward(self, dlogits):
        c_emb, c_conv, c_d, c_out = self._cache
        p = self.params
        dh, dW, db = L.affine_bwd(dlogits, c_out)
        p.accumulate("out.W", dW)
        p.accumulate("out.b", db)
        dh = L.dropout_bwd(dh, c_d)
        F = self.cfg.filters_per_width
        demb = None
        for j, w in enumerate(self.cfg.filter_widths):
            c_y, c_r, c_m = c_conv[j]
            dr = L.maxpool_time_bwd(np.ascontiguousarray(dh[:, j * F:(j + 1) * F]), c_m)
            dy = L.relu_bwd(dr, c_r)
            dx, dWc, dbc = L.conv1d_bwd(dy, c_y)
            p.accumulate(f"conv{w}.W", dWc)
            p.accumulate(f"conv{w}.b", dbc)
            demb = dx if demb is None else demb + dx
        p.accumulate("embed", L.embedding_bwd(demb, c_emb))
        self._cache = None


class ResMLP:
    """Embedding → mean over time → residual blocks h + relu(W h + b) → dropout → affine."""

    kind = "res"
    min_len = 1

    def __init__(self, cfg, vocab_size, n_classes, seed=0):
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.n_classes = n_classes
        self.seed = seed
        rng = Rng(seed, "init", "res")
        p = self.params = ParamStore()
        _init_embedding(p, rng.child("embed"), vocab_size, cfg.embed_dim)
        H = cfg.hidden_size
        self.project = cfg.embed_dim != H
        if self.project:
            p.add("proj.W", _kaiming(rng.child("proj"), cfg.embed_dim, (cfg.embed_dim, H)))
            p.add("proj.b", np.zeros(H))
        for i in range(cfg.hidden_layers):
            p.add(f"block{i}.W", _kaiming(rng.child("block", i), H, (H, H)))
            p.add(f"block{i}.b", np.zeros(H))
        p.add("out.W", _kaiming(rng.child("out"), H, (H, n_classes)))
        p.add("out.b", np.zeros(n_classes))
        self._cache = None

    def forward(self, batch, train=False, rng=None):
        p = self.params
        emb, c_emb = L.embedding_fwd(p.value("embed"), batch.ids)
        h, c_mean = L.mean_time_fwd(emb, batch.lengths)
        c_proj = None
        if self.project:
            h, c_proj = L.affine_fwd(h, p.value("proj.W"), p.value("proj.b"))
        c_blocks = []
        for i in range(self.cfg.hidden_layers):
            a, c_a = L.affine_fwd(h, p.value(f"block{i}.W"), p.value(f"block{i}.b"))
            r, c_r = L.relu_fwd(a)
            h = h + r
            c_blocks.append((c_a, c_r))
        h, c_d = L.dropout_fwd(h, self.cfg.dropout, rng, train)
        logits, c_out = L.affine_fwd(h, p.value("out.W"), p.value("out.b"))
        self._cache = (c_emb, c_mean, c_proj, c_blocks, c_d, c_out)
        return logits

    def backward(self, dlogits):
        c_emb, c_mean, c_proj, c_blocks, c_d, c_out = self._cache
        p = self.params
        dh, dW, db = L.affine_bwd(dlogits, c_out)
        p.accumulate("out.W", dW)
        p.accumulate("out.b", db)
        dh = L.dropout_bwd(dh, c_d)
        for i in reversed(range(self.cfg.hidden_layers)):
            c_a, c_r = c_blocks[i]
            da = L.relu_bwd(dh, c_r)
            dx, dW, db = L.affine_bwd(da, c_a)
            p.accumulate(f"block{i}.W", dW)
            p.accumulate(f"block{i}.b", db)
            dh = dh + dx
        if self.project:
            dh, dW, db = L.affine_bwd(dh, c_proj)
            p.accumulate("proj.W", dW)
            p.accumulate("proj.b", db)
        demb = L.mean_time_bwd(dh, c_mean)
        p.accumulate("embed", L.embedding_bwd(demb, c_emb))
        self._cache = None


class BagOfEmbeddings:
    """Mean of subword embeddings → affine (the fastText-style baseline)."""

    kind = "bag"
    min_len = 1

    def __init__(self, cfg, vocab_size, n_classes, seed=0):
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.n_classes = n_classes
        self.seed = seed
        rng = Rng(seed, "init", "bag")
        p = self.params = ParamStore()
        _init_embedding(p, rng.child("embed"), vocab_size, cfg.embed_dim)
        p.add("out.W", rng.child("out").normal(0.0, 1.0 / np.sqrt(cfg.embed_dim),
                                               size=(cfg.embed_dim, n_classes)))
        p.add("out.b", np.zeros(n_classes))

    def forward(self, batch, train=False, rng=None):
        p = self.params
        emb, c_emb = L.embedding_fwd(p.value("embed"), batch.ids)
        h, c_mean = L.mean_time_fwd(emb, batch.lengths)
        logits, c_out = L.affine_fwd(h, p.value("out.W"), p.value("out.b"))
        self._cache = (c_emb, c_mean, c_out)
        return logits

    def backward(self, dlogits):
        c_emb, c_mean, c_out = self._cache
        p = self.params
        dh, dW, db = L.affine_bwd(dlogits, c_out)
        p.accumulate("out.W", dW)
        p.accumulate("out.b", db)
        p.accumulate("embed", L.embedding_bwd(L.mean_time_bwd(dh, c_mean), c_emb))
        self._cache = None


def build_student(kind, cfg, vocab_size, n_classes, seed=0):
    """Construct a freshly initialised student ('kim' or 'res')."""
    if hasattr(vocab_size, "__len__"):
        vocab_size = len(vocab_size)
    if kind == "kim":
        cfg = cfg or KimStudentConfig()
        return KimCNN(cfg, vocab_size, n_classes, seed)
    if kind == "res":
        cfg = cfg or ResStudentConfig()
        return ResMLP(cfg, vocab_size, n_classes, seed)
    raise ValueError(f"unknown student kind {kind!r}")


def config_dict(cfg):
    d = asdict(cfg)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
