"""Multi-seed runs and the two ablations (synthetic count, hard vs soft labels)."""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from ..distill import SeedState, StageError, run_pipeline
from .metrics import summarize
from .report import RunReport, write_csv

log = logging.getLogger(__name__)


def _seed_grid(seed, configs, artifacts):
    """Run every config for one seed, sharing upstream stages. Never raises."""
    report = RunReport()
    state = None
    for i, cfg in enumerate(configs):
        cfg = replace(cfg, seed=seed)
        out = None
        if artifacts is not None:
            out = Path(artifacts) / f"seed_{seed}" / (f"run_{i}" if len(configs) > 1 else "")
        try:
            if state is None or not state.compatible(cfg):
                state = SeedState(cfg)
            report.add(run_pipeline(cfg, out, state=state))
        except StageError as e:
            log.error("seed %d: %s", seed, e)
            report.failures.append({"seed": seed, "stage": e.stage, "error": str(e.cause)})
        except Exception as e:  # per-seed isolation
            log.error("seed %d: %s", seed, e)
            report.failures.append({"seed": seed, "stage": "unknown", "error": str(e)})
    return report


def run_grid(configs, seeds, artifacts=None, jobs=1):
    if not seeds:
        raise ValueError("need at least one seed")
    seeds = list(seeds)
    report = RunReport()
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_seed_grid, seeds, [configs] * len(seeds),
                                  [artifacts] * len(seeds)))
    else:
        parts = [_seed_grid(s, configs, artifacts) for s in seeds]
    for p in parts:  # seed order, independent of worker scheduling
        report.extend(p)
    return report


def multi_seed(cfg, seeds, artifacts=None, jobs=1):
    """Run ``cfg`` once per seed; aggregates carry mean, std and stderr."""
    return run_grid([cfg], seeds, artifacts, jobs)


def ablate_synthetic_count(cfg, counts, seeds, artifacts=None, jobs=1, csv_path=None):
    """Synthetic-only distillation accuracy as a function of the synthetic count.

    Returns rows {n_synthetic, mean, std, stderr, n_seeds} in ascending count
    order, plus the underlying RunReport.
    """
    counts = list(counts)
    if not counts or any(c < 1 for c in counts):
        raise ValueError("counts must be positive synthetic-example counts")
    if counts != sorted(counts):
        raise ValueError("counts must be sorted ascending")
    base = replace(cfg, mode="gen_distill", synthetic_only=True, n_synthetic=counts[0])
    # largest count first so the synthetic pool is sampled once per seed
    configs = [replace(base, n_synthetic=c) for c in reversed(counts)]
    report = run_grid(configs, seeds, artifacts, jobs)
    rows = []
    for c in counts:
        accs = [r["test_accuracy"] for r in report.records if r["n_synthetic"] == c]
        if not accs:
            continue
        s = summarize(accs)
        rows.append({"n_synthetic": c, "mean": s["mean"], "std": s["std"],
                     "stderr": s["stderr"], "n_seeds": s["n"]})
    if csv_path is not None:
        write_csv(csv_path, rows, ["n_synthetic", "mean", "std", "stderr", "n_seeds"])
    return rows, report


def ablate_label_mode(cfg, seeds, artifacts=None, jobs=1, csv_path=None):
    """Paired hard-vs-soft comparison: same seed, same teacher, same data per pair."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    if cfg.mode == "scratch":
        raise ValueError("label-mode ablation needs a teacher (mode distill or gen_distill)")
    configs = [replace(cfg, label_mode="hard"), replace(cfg, label_mode="soft")]
    report = run_grid(configs, seeds, artifacts, jobs)
    by_seed = {}
    for r in report.records:
        by_seed.setdefault(r["seed"], {})[r["label_mode"]] = r["test_accuracy"]
    pairs = [{"seed": s, "hard": by_seed[s]["hard"], "soft": by_seed[s]["soft"],
              "diff": by_seed[s]["soft"] - by_seed[s]["hard"]}
             for s in seeds if s in by_seed and len(by_seed[s]) == 2]
    if not pairs:
        raise RuntimeError("no complete hard/soft pairs; see report.failures")
    diff = summarize([p["diff"] for p in pairs])
    summary = {
        "hard": summarize([p["hard"] for p in pairs]),
        "soft": summarize([p["soft"] for p in pairs]),
        "soft_minus_hard": diff,
        "n_pairs": len(pairs),
    }
    if csv_path is not None:
        write_csv(csv_path, pairs, ["seed", "hard", "soft", "diff"])
    return {"pairs": pairs, "summary": summary}, report


def format_mean_stderr(s, scale=100.0):
    return f"{scale * s['mean']:.2f} ± {scale * s['stderr']:.2f}"


def paired_t(summary):
    """mean / stderr of paired differences; nan when the stderr is zero."""
    d = summary["soft_minus_hard"]
    return d["mean"] / d["stderr"] if d["stderr"] > 0 else math.nan
