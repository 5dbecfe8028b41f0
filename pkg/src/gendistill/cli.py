"""Command-line entry point: ``gendistill <command> [flags]``.

Stage commands share one artifact directory (``--out``)::

    prepare          config.json, split.json, vocab.bpe
    train-generator  generator.lm                    (needs prepare)
    generate         synthetic.jsonl                 (needs train-generator)
    train-teacher    teacher.ckpt                    (needs prepare)
    distill          distill_set.jsonl, student.ckpt, report.json
                                                     (needs train-teacher, and generate
                                                      for mode gen_distill)

``run`` chains every stage for one or more seeds, ``ablate`` runs the
synthetic-count or label-mode ablation, and ``analyze`` writes the
memorization and TF-IDF nearest-neighbour report for a synthetic corpus.

Config files are flat JSON objects with PipelineConfig keys; flags override
file values. Progress goes to stderr, results to files.
"""
import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import corpus
from .classifiers.teacher import Teacher
from .distill import PipelineConfig, SeedState, StageError, run_pipeline
from .distill import preset_names as presets
from .evalkit import build_tfidf, memorization_report, nearest_neighbors
from .evalkit.ablation import (ablate_label_mode, ablate_synthetic_count, format_mean_stderr,
                               paired_t, run_grid)
from .generator import NgramModel, generate_corpus, synthetic_rows
from .tokenizer import BpeVocab

log = logging.getLogger("gendistill")

PRODUCER = {
    "config.json": "prepare",
    "vocab.bpe": "prepare",
    "generator.lm": "train-generator",
    "synthetic.jsonl": "generate",
    "teacher.ckpt": "train-teacher",
}


class CliError(RuntimeError):
    def __init__(self, stage, msg):
        super().__init__(msg)
        self.stage = stage


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if not isinstance(d, dict):
        raise CliError("config", f"{path}: expected a JSON object")
    return d


def _file_config(args):
    d = {}
    if args.preset:
        if args.preset not in presets():
            raise CliError("config", f"unknown preset {args.preset!r}; have {presets()}")
        d.update(PipelineConfig.preset(args.preset).to_dict())
    if args.config:
        d.update(_read_json(args.config))
    return d


FLAG_KEYS = {"data": "data", "seed": "seed", "mode": "mode", "label_mode": "label_mode",
             "n_synthetic": "n_synthetic", "student": "student", "per_class": "per_class"}


def resolve_config(args, base=None):
    """File values, then flags; every default materialised."""
    d = dict(base or {})
    d.update(_file_config(args))
    for attr, key in FLAG_KEYS.items():
        v = getattr(args, attr, None)
        if v is not None:
            d[key] = str(Path(v).resolve()) if key == "data" else v
    if getattr(args, "synthetic_only", False):
        d["synthetic_only"] = True
    try:
        return PipelineConfig.from_dict(d)
    except (TypeError, ValueError) as e:
        raise CliError("config", str(e)) from e


def _out(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need(out, name):
    p = out / name
    if not p.exists():
        raise CliError("artifacts", f"missing {p}; produce it with `gendistill "
                                    f"{PRODUCER[name]} --out {out}`")
    return p


def _stage_config(args, out):
    """Stage commands inherit the config echoed by ``prepare``."""
    base = PipelineConfig.from_dict(_read_json(_need(out, "config.json"))).to_dict()
    return resolve_config(args, base)


def _stage_state(cfg, out):
    state = SeedState(cfg)
    saved = BpeVocab.load(_need(out, "vocab.bpe"))
    if saved.merges != state.vocab.merges or saved.alphabet != state.vocab.alphabet:
        raise CliError("artifacts", f"{out / 'vocab.bpe'} does not match the config; "
                                    f"rerun `gendistill prepare --out {out}`")
    return state


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_prepare(args):
    out = _out(args)
    cfg = resolve_config(args)
    state = SeedState(cfg)
    cfg.write(out / "config.json")
    _write_json(out / "split.json", corpus.split_manifest(state.train, state.test))
    state.vocab.save(out / "vocab.bpe")
    log.info("prepared %d train / %d test examples, vocab %d", len(state.train),
             len(state.test), len(state.vocab))


def cmd_train_generator(args):
    out = Path(args.out)
    cfg = _stage_config(args, out)
    state = _stage_state(cfg, out)
    state.generator.save(out / "generator.lm")
    log.info("fitted order-%d generator", cfg.gen_order)


def cmd_generate(args):
    out = Path(args.out)
    cfg = _stage_config(args, out)
    state = _stage_state(cfg, out)
    model = NgramModel.load(_need(out, "generator.lm"), vocab=state.vocab)
    n = args.n if args.n is not None else cfg.n_synthetic
    try:
        ds = generate_corpus(model, n, cfg.sampler_config(), state.train.class_names,
                             state.train.texts)
    except Exception as e:
        raise StageError("generate", e) from e
    corpus.write_jsonl(out / "synthetic.jsonl", synthetic_rows(ds))
    log.info("wrote %d samples, memorization rate %.4f", n, ds.meta["memorization_rate"])


def cmd_train_teacher(args):
    out = Path(args.out)
    cfg = _stage_config(args, out)
    state = _stage_state(cfg, out)
    state.teacher.save(out / "teacher.ckpt")
    log.info("teacher test accuracy %.4f", state.teacher_accuracy())


def cmd_distill(args):
    out = Path(args.out)
    cfg = _stage_config(args, out)
    state = _stage_state(cfg, out)
    if cfg.mode != "scratch":
        state.adopt_teacher(Teacher.load(_need(out, "teacher.ckpt"), cfg.teacher_config(),
                                         state.vocab))
    if cfg.mode == "gen_distill":
        state.adopt_generator(NgramModel.load(_need(out, "generator.lm"), vocab=state.vocab))
        rows = corpus.read_jsonl(_need(out, "synthetic.jsonl"))
        if len(rows) < cfg.n_synthetic:
            raise CliError("artifacts", f"synthetic.jsonl has {len(rows)} rows, config wants "
                                        f"{cfg.n_synthetic}; rerun `gendistill generate`")
        state.adopt_synthetic([r["text"] for r in rows], [r.get("sample_seed") for r in rows])
    rec = run_pipeline(cfg, out, state=state)
    log.info("student test accuracy %.4f", rec["test_accuracy"])


def _seed_list(args, cfg):
    n = args.seeds if args.seeds is not None else 1
    if n < 1:
        raise CliError("config", "--seeds must be >= 1")
    return [cfg.seed + i for i in range(n)]


def _finish_report(out, report, cfg):
    cfg.write(out / "config.json")
    report.write_json(out / "report.json")
    with open(out / "timings.json", "w", encoding="utf-8") as fh:
        json.dump(report.timings(), fh)
    for f in report.failures:
        log.error("seed %s failed in stage %s: %s", f["seed"], f["stage"], f["error"])


def cmd_run(args):
    out = _out(args)
    cfg = resolve_config(args)
    report = run_grid([cfg], _seed_list(args, cfg), artifacts=out, jobs=args.jobs)
    _finish_report(out, report, cfg)
    for agg in report.aggregates():
        log.info("%s/%s %s: accuracy %s (n=%d)", agg["mode"], agg["label_mode"],
                 agg["student"], format_mean_stderr(agg["test_accuracy"]),
                 agg["test_accuracy"]["n"])
    if not report.records:
        raise CliError("run", "every seed failed")


def cmd_ablate(args):
    out = _out(args)
    cfg = resolve_config(args)
    seeds = _seed_list(args, cfg)
    if args.what == "counts":
        counts = sorted(int(c) for c in args.counts.split(","))
        rows, report = ablate_synthetic_count(cfg, counts, seeds, out / "runs", args.jobs,
                                              csv_path=out / "ablation_counts.csv")
        summary = {"counts": rows}
        for r in rows:
            log.info("n_synthetic=%d: %.2f ± %.2f (std %.2f)", r["n_synthetic"],
                     100 * r["mean"], 100 * r["stderr"], 100 * r["std"])
    else:
        if cfg.mode == "scratch":
            cfg = replace(cfg, mode="gen_distill")
        res, report = ablate_label_mode(cfg, seeds, out / "runs", args.jobs,
                                        csv_path=out / "label_mode.csv")
        s = res["summary"]
        summary = {**res, "paired_t": paired_t(s)}
        log.info("soft %s  hard %s  soft-hard %s", format_mean_stderr(s["soft"]),
                 format_mean_stderr(s["hard"]), format_mean_stderr(s["soft_minus_hard"]))
    _write_json(out / "ablation.json", summary)
    _finish_report(out, report, cfg)


def cmd_analyze(args):
    out = Path(args.out)
    cfg = resolve_config(args, _read_json(out / "config.json")
                         if (out / "config.json").exists() else None)
    syn_path = Path(args.synthetic) if args.synthetic else _need(out, "synthetic.jsonl")
    texts = [r["text"] for r in corpus.read_jsonl(syn_path)]
    state = SeedState(cfg)
    mem = memorization_report(state.train, texts)
    idx = build_tfidf(state.train)
    k = args.n if args.n is not None else 10
    neighbours = []
    for i, t in enumerate(texts[:k]):
        hits = nearest_neighbors(idx, t, k=3)
        neighbours.append({"sample": i, "text": t, "neighbors": [
            {"id": ex.id, "label": state.train.class_names[ex.label], "cosine": cos,
             "text": ex.text} for ex, cos in hits]})
    result = {"n_samples": len(texts), "exact_dup_rate": mem["exact_dup_rate"],
              "mean_overlap": mem["mean_overlap"], "overlap_histogram": mem["histogram"],
              "nearest_neighbors": neighbours}
    _write_json(out / "analysis.json", result)
    log.info("exact duplicates %.4f, mean longest shared n-gram %.2f words",
             mem["exact_dup_rate"], mem["mean_overlap"])


COMMANDS = {
    "prepare": cmd_prepare,
    "train-generator": cmd_train_generator,
    "generate": cmd_generate,
    "train-teacher": cmd_train_teacher,
    "distill": cmd_distill,
    "run": cmd_run,
    "ablate": cmd_ablate,
    "analyze": cmd_analyze,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON config file")
    common.add_argument("--preset", help="bundled config preset (e.g. desk)")
    common.add_argument("--data", help="directory with train.jsonl/test.jsonl (default: bundled)")
    common.add_argument("--out", default="artifacts", help="artifact directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=["scratch", "distill", "gen_distill"])
    common.add_argument("--label-mode", dest="label_mode", choices=["soft", "hard"])
    common.add_argument("--n-synthetic", dest="n_synthetic", type=int)
    common.add_argument("--student", choices=["kim", "res"])
    common.add_argument("--per-class", dest="per_class", type=int)
    common.add_argument("-v", "--verbose", action="count", default=0)

    ap = argparse.ArgumentParser(prog="gendistill", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("run", "ablate"):
            p.add_argument("--seeds", type=int, help="number of seeds, starting at --seed")
            p.add_argument("--jobs", type=int, default=1)
        if name in ("generate", "analyze"):
            p.add_argument("--n", type=int, help="samples to generate / inspect")
        if name == "run":
            p.add_argument("--synthetic-only", dest="synthetic_only", action="store_true")
        if name == "ablate":
            p.add_argument("what", choices=["counts", "labels"])
            p.add_argument("--counts", default="100,250,500,1000,2000,5000")
        if name == "analyze":
            p.add_argument("--synthetic", help="synthetic JSONL (default: OUT/synthetic.jsonl)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else
                        logging.INFO if args.verbose or args.command in ("run", "ablate")
                        else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except CliError as e:
        print(f"gendistill {args.command}: [{e.stage}] {e}", file=sys.stderr)
        return 2
    except StageError as e:
        print(f"gendistill {args.command}: [{e.stage}] {e.cause}", file=sys.stderr)
        return 3
    except (FileNotFoundError, corpus.DatasetError) as e:
        print(f"gendistill {args.command}: [prepare] {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
