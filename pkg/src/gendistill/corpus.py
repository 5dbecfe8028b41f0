"""Labeled text datasets, the low-resource subsampling protocol, and splits."""
import csv
import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics.rng import Rng

UNLABELED = -1
REAL = "real"
SYNTHETIC = "synthetic"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Example:
    text: str
    label: int
    id: int
    provenance: str = REAL


@dataclass
class Dataset:
    examples: list
    class_names: list
    provenance: str = REAL
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.class_names) < 2:
            raise DatasetError("a dataset needs at least 2 classes")
        C = len(self.class_names)
        seen = set()
        for ex in self.examples:
            if ex.label != UNLABELED and not 0 <= ex.label < C:
                raise DatasetError(f"example {ex.id}: label {ex.label} outside [0, {C})")
            key = (ex.provenance, ex.id)
            if key in seen:
                raise DatasetError(f"duplicate example id {ex.id} ({ex.provenance})")
            seen.add(key)

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def texts(self):
        return [ex.text for ex in self.examples]

    @property
    def labels(self):
        return np.array([ex.label for ex in self.examples], dtype=np.int64)

    @property
    def ids(self):
        return [ex.id for ex in self.examples]

    @property
    def n_classes(self):
        return len(self.class_names)


@dataclass(frozen=True)
class SplitSpec:
    per_class_train: int = 100
    seed: int = 0
    test_fraction: float = None  # used only when no explicit test file is given

    def __post_init__(self):
        if self.per_class_train < 1:
            raise DatasetError("per_class_train must be >= 1")


def _read_records(path, fmt):
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DatasetError(f"{path}:{lineno}: invalid JSON ({e.msg})") from None
                records.append((lineno, rec))
        elif fmt == "csv":
            reader = csv.DictReader(fh)
            for rec in reader:
                records.append((reader.line_num, rec))
        else:
            raise DatasetError(f"unknown dataset format {fmt!r}")
    return records


def load_dataset(path, format=None, class_names=None):
    """Read a JSONL or CSV file of {"text", "label"[, "id"]} records.

    Labels map to indices by lexicographic order of the class names. Pass the
    training set's ``class_names`` when loading a test file; a label outside
    that list is an error. Texts are NFC-normalised.
    """
    records = _read_records(path, format)
    if not records:
        raise DatasetError(f"{path}: no records")
    parsed = []
    for lineno, rec in records:
        for key in ("text", "label"):
            if key not in rec or rec[key] is None:
                raise DatasetError(f"{path}:{lineno}: missing field {key!r}")
        text = unicodedata.normalize("NFC", str(rec["text"]))
        if not text.strip():
            raise DatasetError(f"{path}:{lineno}: empty text")
        rid = rec.get("id")
        rid = lineno - 1 if rid in (None, "") else int(rid)
        parsed.append((text, str(rec["label"]), rid, lineno))

    if class_names is None:
        class_names = sorted({lab for _, lab, _, _ in parsed})
    index = {name: i for i, name in enumerate(class_names)}
    seen = set()
    examples = []
    for text, lab, rid, lineno in parsed:
        if lab not in index:
            raise DatasetError(f"{path}:{lineno}: unknown class {lab!r}")
        if rid in seen:
            raise DatasetError(f"{path}:{lineno}: duplicate id {rid}")
        seen.add(rid)
        examples.append(Example(text, index[lab], rid))
    return Dataset(examples, list(class_names))


def subsample_low_resource(d, spec):
    """Pick ``spec.per_class_train`` examples of every class by seeded shuffle.

    The picks are interleaved class by class and then shuffled once more with
    the same seed, so the output order carries no class structure.
    """
    if d.provenance != REAL:
        raise DatasetError("subsampling applies to real datasets only")
    rng = Rng(spec.seed, "subsample")
    by_class = [[] for _ in d.class_names]
    for ex in d.examples:
        by_class[ex.label].append(ex)
    picks = []
    for c, members in enumerate(by_class):
        if len(members) < spec.per_class_train:
            raise DatasetError(f"class {d.class_names[c]!r} has {len(members)} examples, "
                               f"needs {spec.per_class_train}")
        order = rng.child("class", c).permutation(len(members))
        picks.append([members[i] for i in order[:spec.per_class_train]])
    interleaved = [grp[i] for i in range(spec.per_class_train) for grp in picks]
    order = rng.child("final").permutation(len(interleaved))
    return Dataset([interleaved[i] for i in order], list(d.class_names), REAL)


def split_holdout(d, spec):
    """Carve a fixed test set off a single file when no explicit test file exists."""
    if spec.test_fraction is None or not 0 < spec.test_fraction < 1:
        raise DatasetError("split_holdout needs 0 < test_fraction < 1")
    order = Rng(spec.seed, "holdout").permutation(len(d))
    n_test = int(round(spec.test_fraction * len(d)))
    test = [d.examples[i] for i in sorted(order[:n_test])]
    train = [d.examples[i] for i in sorted(order[n_test:])]
    return Dataset(train, list(d.class_names)), Dataset(test, list(d.class_names))


def concat(a, b):
    if list(a.class_names) != list(b.class_names):
        raise DatasetError(f"class_names mismatch: {a.class_names} vs {b.class_names}")
    prov = a.provenance if a.provenance == b.provenance else "mixed"
    return Dataset(list(a.examples) + list(b.examples), list(a.class_names), prov)


def synthetic_dataset(texts, class_names):
    examples = [Example(t, UNLABELED, i, SYNTHETIC) for i, t in enumerate(texts)]
    return Dataset(examples, list(class_names), SYNTHETIC)


def split_manifest(train, test):
    return {"train_ids": list(train.ids), "test_ids": list(test.ids)}


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def bundled_data_dir():
    return Path(__file__).resolve().parent / "data" / "desk_topics"


def load_desk_dataset():
    """The bundled 4-class topic corpus: (train, test)."""
    root = bundled_data_dir()
    train = load_dataset(root / "train.jsonl")
    test = load_dataset(root / "test.jsonl", class_names=train.class_names)
    return train, test
