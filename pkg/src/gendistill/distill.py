"""The three-stage generation-distillation procedure and its baselines.

Modes:
    scratch      student trained with hard CE on the real low-resource subset.
    distill      teacher trained on the real subset; student trained on the
                 teacher-labeled real subset.
    gen_distill  additionally fit an n-gram generator on the real text, draw
                 ``n_synthetic`` unlabeled texts, and train the student on the
                 teacher-labeled union of real and synthetic texts.

Stage results for one seed (subset, vocabulary, teacher, generator,
synthetic pool) are kept in a ``SeedState`` so ablations can run many student
configurations against the same teacher without retraining it.
"""
import json
import logging
import time
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from . import corpus
from .classifiers.models import KimStudentConfig, ResStudentConfig, build_student, config_dict
from .classifiers.teacher import TeacherConfig, predict_soft, train_teacher
from .classifiers.training import TrainConfig, argmax_lowest, predict_logits, train_classifier
from .corpus import REAL, SYNTHETIC, SplitSpec
from .evalkit.metrics import accuracy
from .evalkit.report import RunReport
from .generator import SamplerConfig, fit_generator, generate_corpus, synthetic_rows
from .numerics.checkpoint import save_checkpoint
from .numerics.rng import Rng
from .tokenizer import learn_bpe

log = logging.getLogger(__name__)

MODES = ("scratch", "distill", "gen_distill")
LABEL_MODES = ("soft", "hard")
STUDENTS = ("kim", "res")


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of a run, flat. The JSON echo of this object reproduces the run."""

    mode: str = "gen_distill"
    label_mode: str = "soft"
    student: str = "kim"
    seed: int = 0
    data: str = None                 # directory with train/test files; None = bundled corpus
    per_class: int = 100
    test_fraction: float = None      # only when the data directory has no test file
    bpe_vocab: int = 4096
    gen_order: int = 4
    gen_discount: float = 0.75
    temperature: float = 1.0
    top_k: int = None
    top_p: float = None
    max_tokens: int = 128
    n_synthetic: int = 2000
    synthetic_only: bool = False     # drop real rows from the distillation set
    mix_gold: bool = False           # real rows target 0.5*gold + 0.5*teacher
    teacher_ensemble: int = 5
    teacher_embed_dim: int = 200
    teacher_filters: int = 256
    teacher_epochs: int = 10
    embed_dim: int = 100
    filter_widths: tuple = (3, 4, 5)
    filters_per_width: int = 100
    hidden_layers: int = 3
    hidden_size: int = 100
    dropout: float = 0.5
    max_len: int = 128
    lr: float = 1e-3
    epochs: int = 10
    batch_size: int = 32
    distill_temperature: float = 1.0
    weight_decay: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "filter_widths", tuple(self.filter_widths))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.label_mode not in LABEL_MODES:
            raise ValueError(f"label_mode must be one of {LABEL_MODES}")
        if self.student not in STUDENTS:
            raise ValueError(f"student must be one of {STUDENTS}")
        if self.mode == "gen_distill" and self.n_synthetic < 1:
            raise ValueError("mode=gen_distill needs n_synthetic >= 1 (use mode=distill instead)")
        if self.synthetic_only and self.mode != "gen_distill":
            raise ValueError("synthetic_only requires mode=gen_distill")
        # validate the derived sub-configs early
        self.sampler_config()
        self.teacher_config()
        self.student_config()
        self.train_config()

    # -- derived configs ----------------------------------------------------

    def split_spec(self):
        return SplitSpec(self.per_class, self.seed, self.test_fraction)

    def sampler_config(self):
        return SamplerConfig(self.temperature, self.top_k, self.top_p, self.max_tokens,
                             _derived_seed(self.seed, "sampler"))

    def teacher_config(self):
        return TeacherConfig(self.teacher_ensemble, self.teacher_embed_dim, self.teacher_filters,
                             self.filter_widths, self.dropout, self.max_len)

    def teacher_train_config(self):
        return TrainConfig(self.lr, self.teacher_epochs, self.batch_size,
                           _derived_seed(self.seed, "teacher"), "hard_ce")

    def student_config(self):
        if self.student == "kim":
            return KimStudentConfig(self.embed_dim, self.filter_widths, self.filters_per_width,
                                    self.dropout, self.max_len)
        return ResStudentConfig(self.embed_dim, self.hidden_layers, self.hidden_size,
                                self.dropout, self.max_len)

    def train_config(self):
        loss = "hard_ce" if self.mode == "scratch" else "soft_kl"
        return TrainConfig(self.lr, self.epochs, self.batch_size,
                           _derived_seed(self.seed, "student"), loss,
                           self.distill_temperature, self.weight_decay)

    # -- echo ---------------------------------------------------------------

    def to_dict(self):
        d = asdict(self)
        d["filter_widths"] = list(self.filter_widths)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def preset(cls, name, **overrides):
        """A bundled preset (``configs/<name>.json``) with keyword overrides."""
        if name not in preset_names():
            raise ValueError(f"unknown preset {name!r}; have {preset_names()}")
        d = json.loads(resources.files("gendistill").joinpath(
            "configs", f"{name}.json").read_text(encoding="utf-8"))
        return cls.from_dict({**d, **overrides})


def preset_names():
    return sorted(p.name[:-5] for p in resources.files("gendistill").joinpath("configs").iterdir()
                  if p.name.endswith(".json"))


def _derived_seed(seed, name):
    # 31 bits keeps member seeds (seed + i) far from overflow
    return Rng(seed, "pipeline", name).derive_seed() % (2 ** 31)


@dataclass(frozen=True)
class SoftLabeledExample:
    text: str
    probs: tuple
    provenance: str
    id: int

    def __post_init__(self):
        p = np.asarray(self.probs)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"example {self.id}: probs must be a distribution, got {self.probs}")


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def _find(root, stem):
    for ext in (".jsonl", ".csv"):
        p = Path(root) / f"{stem}{ext}"
        if p.exists():
            return p
    return None


def load_data(cfg):
    """(full train, test) for the configured data directory."""
    if cfg.data is None:
        return corpus.load_desk_dataset()
    train_path = _find(cfg.data, "train")
    if train_path is None:
        raise FileNotFoundError(f"{cfg.data}: no train.jsonl or train.csv")
    train = corpus.load_dataset(train_path)
    test_path = _find(cfg.data, "test")
    if test_path is None:
        return corpus.split_holdout(train, cfg.split_spec())
    return train, corpus.load_dataset(test_path, class_names=train.class_names)


class SeedState:
    """Lazily computed, cached stage outputs for one (data, seed, upstream config)."""

    def __init__(self, cfg):
        self.cfg = cfg
        self._teacher = None
        self._generator = None
        self._synthetic = None
        self._teacher_soft = {}
        try:
            full, self.test = load_data(cfg)
            self.train = corpus.subsample_low_resource(full, cfg.split_spec())
        except Exception as e:
            raise StageError("prepare", e) from e
        try:
            self.vocab = learn_bpe(self.train, cfg.bpe_vocab)
        except Exception as e:
            raise StageError("tokenize", e) from e
        self.train_seqs = [self.vocab.encode(t).ids for t in self.train.texts]
        self.test_seqs = [self.vocab.encode(t).ids for t in self.test.texts]

    def compatible(self, cfg):
        keys = ("seed", "data", "per_class", "test_fraction", "bpe_vocab", "gen_order",
                "gen_discount", "temperature", "top_k", "top_p", "max_tokens",
                "teacher_ensemble", "teacher_embed_dim", "teacher_filters", "teacher_epochs",
                "filter_widths", "dropout", "max_len", "lr", "batch_size")
        return all(getattr(self.cfg, k) == getattr(cfg, k) for k in keys)

    @property
    def teacher(self):
        if self._teacher is None:
            try:
                self._teacher = train_teacher(self.train_seqs, self.train.labels,
                                              self.cfg.teacher_config(),
                                              self.cfg.teacher_train_config(),
                                              len(self.vocab), self.train.n_classes, self.vocab)
            except Exception as e:
                raise StageError("train_teacher", e) from e
        return self._teacher

    def teacher_accuracy(self):
        return accuracy(argmax_lowest(self.teacher.logits(self.test_seqs)), self.test.labels)

    @property
    def generator(self):
        if self._generator is None:
            try:
                self._generator = fit_generator(self.train, self.vocab, self.cfg.gen_order,
                                                self.cfg.gen_discount)
            except Exception as e:
                raise StageError("train_generator", e) from e
        return self._generator

    def synthetic(self, n):
        """The first ``n`` synthetic samples (samples are prefix-stable in n)."""
        if self._synthetic is None or len(self._synthetic) < n:
            try:
                self._synthetic = generate_corpus(self.generator, n, self.cfg.sampler_config(),
                                                  self.train.class_names, self.train.texts)
            except Exception as e:
                raise StageError("generate", e) from e
        if len(self._synthetic) == n:
            return self._synthetic
        full = self._synthetic
        ds = corpus.Dataset(full.examples[:n], full.class_names, SYNTHETIC)
        ds.meta["sample_seeds"] = full.meta["sample_seeds"][:n]
        known = set(self.train.texts)
        ds.meta["memorization_rate"] = sum(t in known for t in ds.texts) / n
        return ds

    # stage commands load earlier artifacts instead of recomputing them

    def adopt_teacher(self, teacher):
        self._teacher = teacher
        self._teacher_soft = {}

    def adopt_generator(self, model):
        self._generator = model

    def adopt_synthetic(self, texts, sample_seeds=None):
        ds = corpus.synthetic_dataset(texts, self.train.class_names)
        ds.meta["sample_seeds"] = list(sample_seeds) if sample_seeds else [None] * len(ds)
        known = set(self.train.texts)
        ds.meta["memorization_rate"] = sum(t in known for t in texts) / max(len(texts), 1)
        self._synthetic = ds
        self._teacher_soft = {k: v for k, v in self._teacher_soft.items() if k == "real"}

    def soft_labels(self, key, seqs):
        if key not in self._teacher_soft:
            self._teacher_soft[key] = predict_soft(self.teacher, seqs)
        return self._teacher_soft[key]


def make_distillation_set(real, synthetic, teacher, label_mode="soft", mix_gold=False,
                          real_probs=None, synthetic_probs=None):
    """Teacher-label every real and synthetic example.

    Soft mode keeps the teacher distribution, hard mode its one-hot argmax.
    Gold labels of real examples are ignored unless ``mix_gold``, which sets
    real targets to the average of the gold one-hot and the teacher label
    (equivalent to adding an equally weighted hard-CE term on real rows).
    Precomputed ``*_probs`` skip the teacher forward pass.
    """
    if label_mode not in LABEL_MODES:
        raise ValueError(f"label_mode must be one of {LABEL_MODES}")
    C = teacher.n_classes if teacher is not None else real.n_classes
    if real.n_classes != C or (synthetic is not None and synthetic.n_classes != C):
        raise ValueError(f"class-count mismatch: teacher has {C} classes")
    parts = [(real, real_probs)]
    if synthetic is not None and len(synthetic):
        parts.append((synthetic, synthetic_probs))
    out = []
    for ds, probs in parts:
        if not len(ds):
            continue
        if probs is None:
            probs = predict_soft(teacher, ds)
        if label_mode == "hard":
            probs = np.eye(C)[argmax_lowest(probs)]
        for ex, p in zip(ds.examples, probs):
            if mix_gold and ex.provenance == REAL:
                p = 0.5 * p + 0.5 * np.eye(C)[ex.label]
            out.append(SoftLabeledExample(ex.text, tuple(float(x) for x in p), ex.provenance,
                                          ex.id))
    return out


def distill_rows(dset):
    return [{"id": e.id, "provenance": e.provenance, "text": e.text, "probs": list(e.probs)}
            for e in dset]


def train_student(cfg, vocab, seqs, targets, n_classes):
    model = build_student(cfg.student, cfg.student_config(), len(vocab), n_classes,
                          seed=cfg.train_config().seed)
    result = train_classifier(model, seqs, targets, cfg.train_config())
    return model, result


def run_pipeline(cfg, artifacts=None, state=None):
    """Execute one seed of the configured mode and return its RunReport record.

    ``artifacts`` (a directory) receives every intermediate product. ``state``
    may carry a SeedState from an earlier run with the same upstream settings.
    """
    t0 = time.perf_counter()
    if state is None or not state.compatible(cfg):
        state = SeedState(cfg)
    out = Path(artifacts) if artifacts is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        cfg.write(out / "config.json")
        with open(out / "split.json", "w", encoding="utf-8") as fh:
            json.dump(corpus.split_manifest(state.train, state.test), fh)
            fh.write("\n")
        state.vocab.save(out / "vocab.bpe")

    record = {"seed": cfg.seed, "mode": cfg.mode, "label_mode": cfg.label_mode,
              "student": cfg.student, "n_synthetic": 0, "synthetic_only": cfg.synthetic_only,
              "memorization_rate": None, "teacher_test_accuracy": None}

    if cfg.mode == "scratch":
        seqs, targets = state.train_seqs, state.train.labels
        record["label_mode"] = "gold"
    else:
        teacher = state.teacher
        record["teacher_test_accuracy"] = state.teacher_accuracy()
        if out is not None:
            teacher.save(out / "teacher.ckpt")
        synthetic = None
        syn_probs = None
        if cfg.mode == "gen_distill":
            gen = state.generator
            synthetic = state.synthetic(cfg.n_synthetic)
            syn_seqs = [state.vocab.encode(t).ids for t in synthetic.texts]
            syn_probs = state.soft_labels(("synthetic", cfg.n_synthetic), syn_seqs)
            record["n_synthetic"] = cfg.n_synthetic
            record["memorization_rate"] = synthetic.meta["memorization_rate"]
            if out is not None:
                gen.save(out / "generator.lm")
                corpus.write_jsonl(out / "synthetic.jsonl", synthetic_rows(synthetic))
        real = state.train
        real_probs = state.soft_labels("real", state.train_seqs)
        if cfg.synthetic_only:
            real = corpus.Dataset([], real.class_names, REAL)
            real_probs = None
        try:
            dset = make_distillation_set(real, synthetic, teacher, cfg.label_mode, cfg.mix_gold,
                                         real_probs=real_probs, synthetic_probs=syn_probs)
        except Exception as e:
            raise StageError("distill_set", e) from e
        if out is not None:
            corpus.write_jsonl(out / "distill_set.jsonl", distill_rows(dset))
        seqs = [state.vocab.encode(e.text).ids for e in dset]
        targets = np.array([e.probs for e in dset])

    try:
        model, result = train_student(cfg, state.vocab, seqs, targets, state.train.n_classes)
    except Exception as e:
        raise StageError("train_student", e) from e
    preds = argmax_lowest(predict_logits(model, state.test_seqs))
    record["n_train_examples"] = len(seqs)
    record["n_params"] = model.params.n_params()
    record["final_train_loss"] = result.epoch_loss[-1]
    record["test_accuracy"] = accuracy(preds, state.test.labels)
    record["train_time_s"] = time.perf_counter() - t0

    if out is not None:
        save_checkpoint(out / "student.ckpt", model.params,
                        meta={"kind": cfg.student, "config": config_dict(cfg.student_config()),
                              "n_classes": state.train.n_classes, "vocab_size": len(state.vocab)})
        report = RunReport()
        report.add(record)
        report.write_json(out / "report.json")
        with open(out / "timings.json", "w", encoding="utf-8") as fh:
            json.dump(report.timings(), fh)
    return record
