import logging
import math
from dataclasses import dataclass

import numpy as np

from ..numerics.losses import cross_entropy_loss, kl_loss, softmax
from ..numerics.optim import adam_step
from ..numerics.rng import Rng
from .models import make_batch

log = logging.getLogger(__name__)

LOSSES = ("hard_ce", "soft_kl")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    loss: str = "hard_ce"
    distill_temperature: float = 1.0
    weight_decay: float = 0.0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    bucket_pool: int = 8  # batches per length-sorted pool; 0 disables bucketing

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if not self.distill_temperature > 0:
            raise ValueError("distill_temperature must be > 0")
        if self.bucket_pool < 0:
            raise ValueError("bucket_pool must be >= 0")
        object.__setattr__(self, "betas", tuple(self.betas))


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainResult:
    epoch_loss: list   # mean loss per epoch
    step_loss: list    # loss of every mini-batch, in order


def epoch_batches(order, lengths, batch_size, pool, rng):
    """Split a shuffled index order into mini-batches.

    With ``pool`` > 0 each run of ``pool * batch_size`` indices is sorted by
    length (stable) before cutting, and the resulting batches are shuffled,
    so padding stays small while every example is still seen once.
    """
    if pool == 0:
        return [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    span = pool * batch_size
    batches = []
    for start in range(0, len(order), span):
        chunk = order[start:start + span]
        chunk = chunk[np.argsort(lengths[chunk], kind="stable")]
        batches.extend(chunk[i:i + batch_size] for i in range(0, len(chunk), batch_size))
    return [batches[i] for i in rng.permutation(len(batches))]


def _encode_all(model, seqs):
    max_len = model.cfg.max_len
    return [tuple(s.ids if hasattr(s, "ids") else s)[:max_len] for s in seqs]


def train_classifier(model, seqs, targets, tc, max_steps=None):
    """Mini-batch Adam on hard labels (int array) or soft targets ((N, C) array).

    Epoch order and dropout masks come from streams derived from ``tc.seed``,
    so two calls with equal inputs produce identical parameters.
    ``max_steps`` stops early after that many updates (used by tests).
    """
    seqs = _encode_all(model, seqs)
    N = len(seqs)
    if N == 0:
        raise ValueError("train_classifier: empty training data")
    targets = np.asarray(targets)
    if tc.loss == "soft_kl":
        if targets.ndim != 2 or targets.shape != (N, model.n_classes):
            raise ValueError(f"soft_kl needs an (N, C)=({N}, {model.n_classes}) target table, "
                             f"got {targets.shape}")
    else:
        if targets.ndim != 1 or targets.shape[0] != N:
            raise ValueError("hard_ce needs one integer label per example")
        if np.any(targets < 0):
            raise ValueError("hard_ce targets contain unlabeled examples")

    root = Rng(tc.seed, "train")
    lengths = np.array([len(s) for s in seqs])
    result = TrainResult([], [])
    steps = 0
    for epoch in range(tc.epochs):
        order = root.child("epoch", epoch).permutation(N)
        drop_rng = root.child("dropout", epoch)
        total, count = 0.0, 0
        batches = epoch_batches(order, lengths, tc.batch_size, tc.bucket_pool,
                                root.child("batches", epoch))
        for b, idx in enumerate(batches):
            batch = make_batch([seqs[i] for i in idx], min_len=model.min_len)
            logits = model.forward(batch, train=True, rng=drop_rng)
            if tc.loss == "soft_kl":
                loss, dlogits = kl_loss(targets[idx], logits, tc.distill_temperature)
            else:
                loss, dlogits = cross_entropy_loss(targets[idx], logits)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {b}")
            model.backward(dlogits)
            adam_step(model.params, tc.lr, tc.betas, tc.eps, tc.weight_decay)
            result.step_loss.append(loss)
            total += loss * len(idx)
            count += len(idx)
            steps += 1
            if max_steps is not None and steps >= max_steps:
                result.epoch_loss.append(total / count)
                return result
        result.epoch_loss.append(total / count)
        log.debug("epoch %d loss %.5f", epoch, result.epoch_loss[-1])
    return result


def predict_logits(model, seqs, batch_size=256):
    """Eval-mode logits for a list of token sequences."""
    seqs = _encode_all(model, seqs)
    out = np.empty((len(seqs), model.n_classes))
    # length-sorted batches keep padding small; rows are scattered back in place
    order = np.argsort([len(s) for s in seqs], kind="stable")
    for start in range(0, len(seqs), batch_size):
        idx = order[start:start + batch_size]
        batch = make_batch([seqs[i] for i in idx], min_len=model.min_len)
        out[idx] = model.forward(batch)
    model._cache = None
    return out


def predict_proba(model, seqs, batch_size=256):
    return softmax(predict_logits(model, seqs, batch_size))


def argmax_lowest(probs):
    """Row-wise argmax; ties resolve to the lowest class index."""
    return np.asarray(probs).argmax(axis=1)
