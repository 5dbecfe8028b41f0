"""The high-capacity teacher: an ensemble of wide Kim-style CNNs.

Stands in for the large pretrained classifier. Members are trained
independently with seeds ``seed + i``; the teacher's logits are the mean of
member logits.
"""
from dataclasses import dataclass, replace

import numpy as np

from ..numerics.checkpoint import read_checkpoint, save_checkpoint
from ..numerics.losses import softmax
from ..numerics.optim import ParamStore
from .models import KimCNN, KimStudentConfig
from .training import argmax_lowest, predict_logits, train_classifier


@dataclass(frozen=True)
class TeacherConfig:
    ensemble_size: int = 5
    embed_dim: int = 200
    filters_per_width: int = 256
    filter_widths: tuple = (3, 4, 5)
    dropout: float = 0.5
    max_len: int = 128

    def __post_init__(self):
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        object.__setattr__(self, "filter_widths", tuple(self.filter_widths))

    def member_config(self):
        return KimStudentConfig(self.embed_dim, self.filter_widths, self.filters_per_width,
                                self.dropout, self.max_len)


class Teacher:
    def __init__(self, members, vocab=None, cfg=None):
        if not members:
            raise ValueError("a teacher needs at least one member")
        self.members = list(members)
        self.vocab = vocab
        self.cfg = cfg
        self.n_classes = members[0].n_classes

    def _seqs(self, texts):
        if hasattr(texts, "texts"):
            texts = texts.texts
        texts = list(texts)
        if texts and isinstance(texts[0], str):
            if self.vocab is None:
                raise ValueError("teacher has no vocabulary to encode raw text")
            return [self.vocab.encode(t).ids for t in texts]
        return texts

    def logits(self, texts, batch_size=256):
        seqs = self._seqs(texts)
        total = np.zeros((len(seqs), self.n_classes))
        for m in self.members:
            total += predict_logits(m, seqs, batch_size)
        return total / len(self.members)

    def member_logits(self, texts, batch_size=256):
        seqs = self._seqs(texts)
        return [predict_logits(m, seqs, batch_size) for m in self.members]

    def combined_params(self):
        store = ParamStore()
        for i, m in enumerate(self.members):
            for name, p in m.params.items():
                store._params[f"member{i}/{name}"] = p
        return store

    def save(self, path):
        save_checkpoint(path, self.combined_params(),
                        meta={"ensemble_size": len(self.members), "n_classes": self.n_classes,
                              "vocab_size": self.members[0].vocab_size})

    @classmethod
    def load(cls, path, cfg, vocab):
        header, values = read_checkpoint(path)
        meta = header["meta"]
        members = []
        for i in range(meta["ensemble_size"]):
            m = KimCNN(cfg.member_config(), meta["vocab_size"], meta["n_classes"], seed=0)
            prefix = f"member{i}/"
            m.params.load_state_dict({k[len(prefix):]: v for k, v in values.items()
                                      if k.startswith(prefix)})
            for _, p in m.params.items():
                p.step = header["step"]
            members.append(m)
        return cls(members, vocab, cfg)


def train_teacher(train_seqs, labels, cfg, tc, vocab_size, n_classes, vocab=None):
    """Train ``cfg.ensemble_size`` members on hard labels, member i with seed tc.seed + i."""
    members = []
    for i in range(cfg.ensemble_size):
        m = KimCNN(cfg.member_config(), vocab_size, n_classes, seed=tc.seed + i)
        train_classifier(m, train_seqs, labels, replace(tc, seed=tc.seed + i, loss="hard_ce"))
        members.append(m)
    return Teacher(members, vocab, cfg)


def predict_soft(teacher, texts, batch_size=256):
    """Softmax of the mean member logits, eval mode."""
    return softmax(teacher.logits(texts, batch_size))


def predict_hard(teacher, texts, batch_size=256):
    """Argmax class of ``predict_soft``; ties go to the lowest index."""
    return argmax_lowest(predict_soft(teacher, texts, batch_size))
