"""Interpolated absolute-discount n-gram language model over BPE tokens.

This is the synthetic-text generator: it is fitted on the task text alone
(labels are never read) and sampled unconditionally to produce unlabeled
training examples.

Smoothing, for a context c whose shorter suffix is c':

    P_k(w | c) = max(n(c, w) - d, 0) / n(c) + d * u(c) / n(c) * P_{k-1}(w | c')

where n(c) is the context total and u(c) the number of distinct successors.
Contexts never seen at order k back off to P_{k-1}. The recursion bottoms out
in a uniform distribution over every token except PAD and BOS, which are
never valid outputs.
"""
import json
import logging
from dataclasses import dataclass
from collections import Counter, defaultdict

import numpy as np

from .corpus import synthetic_dataset
from .numerics.rng import Rng
from .tokenizer import BOS, EOS, PAD

log = logging.getLogger(__name__)
FORMAT = "gendistill-ngram/1"


@dataclass(frozen=True)
class SamplerConfig:
    temperature: float = 1.0
    top_k: int = None
    top_p: float = None
    max_tokens: int = 128
    seed: int = 0

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if self.top_k is not None and self.top_p is not None:
            raise ValueError("set at most one of top_k / top_p")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.top_p is not None and not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


class NgramModel:
    def __init__(self, order, discount, vocab_size):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if not 0 <= discount < 1:
            raise ValueError(f"discount must be in [0, 1), got {discount}")
        self.order = order
        self.discount = float(discount)
        self.vocab_size = vocab_size
        # tables[k-1][context] = (token ids, counts, total, distinct) for order k
        self.tables = [dict() for _ in range(order)]
        self.n_skipped = 0
        self.vocab = None
        support = np.ones(vocab_size, dtype=bool)
        support[[PAD, BOS]] = False
        self.uniform = support / support.sum()

    def _freeze(self, raw):
        for k, table in enumerate(raw):
            for ctx, succ in table.items():
                toks = np.array(sorted(succ), dtype=np.int64)
                cnts = np.array([succ[t] for t in toks], dtype=np.float64)
                self.tables[k][ctx] = (toks, cnts, float(cnts.sum()), len(toks))

    def counts(self, context, order=None):
        """Raw successor counts {token: count} for ``context`` at the given order."""
        k = len(context) + 1 if order is None else order
        entry = self.tables[k - 1].get(tuple(context))
        if entry is None:
            return {}
        return {int(t): float(c) for t, c in zip(entry[0], entry[1])}

    def next_token_dist(self, context):
        """Smoothed next-token distribution after ``context`` (history including BOS)."""
        hist = tuple(context.ids if hasattr(context, "ids") else context)
        p = self.uniform.copy()
        d = self.discount
        for k in range(1, self.order + 1):
            if len(hist) < k - 1:
                break
            ctx = hist[len(hist) - (k - 1):] if k > 1 else ()
            entry = self.tables[k - 1].get(ctx)
            if entry is None:
                continue
            toks, cnts, total, distinct = entry
            p *= d * distinct / total
            p[toks] += np.maximum(cnts - d, 0.0) / total
        return p

    # -- serialization ------------------------------------------------------

    def save(self, path):
        header = {"format": FORMAT, "order": self.order, "discount": self.discount,
                  "vocab_size": self.vocab_size, "n_skipped": self.n_skipped,
                  "n_contexts": [len(t) for t in self.tables]}
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for k, table in enumerate(self.tables, 1):
                for ctx in sorted(table):
                    toks, cnts, _, _ = table[ctx]
                    succ = " ".join(f"{t}:{int(c)}" for t, c in zip(toks, cnts))
                    fh.write(f"{k}\t{' '.join(map(str, ctx))}\t{succ}\n")

    @classmethod
    def load(cls, path, vocab=None):
        with open(path, encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("format") != FORMAT:
                raise ValueError(f"{path}: not a gendistill n-gram model")
            m = cls(header["order"], header["discount"], header["vocab_size"])
            m.n_skipped = header["n_skipped"]
            raw = [defaultdict(dict) for _ in range(m.order)]
            for line in fh:
                k, ctx, succ = line.rstrip("\n").split("\t")
                ctx = tuple(int(x) for x in ctx.split()) if ctx else ()
                raw[int(k) - 1][ctx] = {int(t): int(c) for t, c in
                                        (pair.split(":") for pair in succ.split())}
        m._freeze(raw)
        m.vocab = vocab
        return m


def fit_sequences(seqs, order=4, discount=0.75, vocab_size=None):
    """Fit on already-framed token id sequences (BOS ... EOS)."""
    if vocab_size is None:
        vocab_size = max(max(s) for s in seqs) + 1
    m = NgramModel(order, discount, vocab_size)
    raw = [defaultdict(Counter) for _ in range(order)]
    for seq in seqs:
        for i in range(1, len(seq)):
            w = seq[i]
            for k in range(1, order + 1):
                if i - (k - 1) < 0:
                    break
                raw[k - 1][tuple(seq[i - k + 1:i])][w] += 1
    m._freeze(raw)
    return m


def fit_generator(train, vocab, order=4, discount=0.75):
    """Count n-grams over the BOS/EOS-framed token sequences of every training text."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    texts = train.texts if hasattr(train, "texts") else list(train)
    if not texts:
        raise ValueError("cannot fit a generator on an empty dataset")
    seqs = []
    skipped = 0
    for t in texts:
        seq = vocab.encode(t, frame=True).ids
        if len(seq) <= 2:
            skipped += 1
            continue
        seqs.append(seq)
    if skipped:
        log.warning("fit_generator: skipped %d empty texts", skipped)
    if not seqs:
        raise ValueError("every training text was empty")
    m = fit_sequences(seqs, order, discount, len(vocab))
    m.n_skipped = skipped
    m.vocab = vocab
    return m


def apply_sampling_filters(p, cfg):
    """Temperature then top-k / top-p truncation; returns a renormalised vector."""
    if cfg.temperature != 1.0:
        with np.errstate(divide="ignore"):
            z = np.log(p) / cfg.temperature
        z -= z.max()
        p = np.exp(z)
    else:
        p = p.copy()
    if cfg.top_k is not None and cfg.top_k < np.count_nonzero(p):
        order = np.argsort(-p, kind="stable")
        p[order[cfg.top_k:]] = 0.0
    elif cfg.top_p is not None and cfg.top_p < 1.0:
        order = np.argsort(-p, kind="stable")
        mass = np.cumsum(p[order]) / p.sum()
        cut = int(np.searchsorted(mass, cfg.top_p, side="left")) + 1
        p[order[cut:]] = 0.0
    return p / p.sum()


def draw_tokens(p, u):
    """Inverse-CDF draw: token index for each uniform ``u`` in [0, 1)."""
    cum = np.cumsum(p)
    tok = np.searchsorted(cum, np.asarray(u) * cum[-1], side="right")
    return np.minimum(tok, len(p) - 1)


def sample_ids(m, cfg, rng):
    hist = [BOS]
    for _ in range(cfg.max_tokens):
        p = apply_sampling_filters(m.next_token_dist(hist), cfg)
        tok = int(draw_tokens(p, rng.random()))
        if tok == EOS:
            return hist[1:], True
        hist.append(tok)
    return hist[1:], False


def _sample_rng(cfg, index, attempt):
    return Rng(cfg.seed, "sample", index, attempt)


def sample_text(m, cfg, index=0, attempt=0):
    """Draw one text. Deterministic in (model, cfg, index, attempt)."""
    if m.vocab is None:
        raise ValueError("model has no vocabulary attached")
    ids, _ = sample_ids(m, cfg, _sample_rng(cfg, index, attempt))
    return m.vocab.decode(ids)


def generate_corpus(m, n, cfg, class_names, train_texts=None, max_retries=20,
                    memorization_warn=0.05):
    """Sample ``n`` unlabeled texts; empty decodes are redrawn up to ``max_retries`` times.

    Sample i only depends on (cfg.seed, i), so a corpus of size n is an exact
    prefix of any larger corpus drawn with the same config.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    texts, seeds = [], []
    for i in range(n):
        for attempt in range(max_retries + 1):
            text = sample_text(m, cfg, i, attempt)
            if text.strip():
                break
        else:
            raise RuntimeError(f"sample {i}: {max_retries} retries produced only empty text")
        texts.append(text)
        seeds.append(_sample_rng(cfg, i, attempt).derive_seed())
    ds = synthetic_dataset(texts, class_names)
    ds.meta["sample_seeds"] = seeds
    if train_texts is not None:
        known = set(train_texts)
        rate = sum(t in known for t in texts) / n
        ds.meta["memorization_rate"] = rate
        if rate > memorization_warn:
            log.warning("generate_corpus: %.1f%% of samples copy a training text", 100 * rate)
    return ds


def synthetic_rows(ds):
    seeds = ds.meta.get("sample_seeds") or [None] * len(ds)
    return [{"text": ex.text, "label": "unlabeled", "sample_seed": s}
            for ex, s in zip(ds.examples, seeds)]
