"""Per-seed run records and their aggregates, serialised as JSON and CSV."""
import csv
import json
from dataclasses import dataclass, field

from .metrics import summarize

GROUP_KEYS = ("mode", "label_mode", "student", "n_synthetic", "synthetic_only")
# records carry wall-clock timings, which never go into report.json
VOLATILE_KEYS = ("train_time_s",)


def group_key(rec):
    return tuple(rec.get(k) for k in GROUP_KEYS)


@dataclass
class RunReport:
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def add(self, rec):
        acc = rec["test_accuracy"]
        if not 0.0 <= acc <= 1.0:
            raise ValueError(f"test_accuracy {acc} outside [0, 1]")
        self.records.append(dict(rec))

    def extend(self, other):
        self.records.extend(other.records)
        self.failures.extend(other.failures)

    def aggregates(self):
        groups = {}
        for rec in self.records:
            groups.setdefault(group_key(rec), []).append(rec)
        out = []
        for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
            recs = groups[key]
            entry = dict(zip(GROUP_KEYS, key))
            entry["seeds"] = [r["seed"] for r in recs]
            entry["test_accuracy"] = summarize([r["test_accuracy"] for r in recs])
            out.append(entry)
        return out

    def to_dict(self):
        stable = [{k: v for k, v in r.items() if k not in VOLATILE_KEYS} for r in self.records]
        return {"records": stable, "aggregates": self.aggregates(), "failures": self.failures}

    def timings(self):
        return [{"seed": r["seed"], **{k: r[k] for k in VOLATILE_KEYS if k in r}}
                for r in self.records]

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(list(d["records"]), list(d.get("failures", [])))


def write_csv(path, rows, columns):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([row[c] for c in columns])
