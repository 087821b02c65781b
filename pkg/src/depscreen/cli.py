"""Command-line interface.

Subcommands: corpus {synth,split,stats}, survey score, augment run,
features extract, train, eval, pipeline all.  Exit codes: 0 success,
1 data/validation error (single line on stderr), 2 usage error.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import augment as aug
from . import corpus as corpus_mod
from . import evaluate as eval_mod
from . import nn, pipeline, surveys
from .config import load_config
from .corpus import SplitSpec, load_manifest, utterance_id, write_manifest
from .errors import ToolkitError
from .features import export_features_csv, write_features
from .seeding import derive_seed


def _cmd_corpus_synth(args):
    entries = corpus_mod.synth_corpus(args.n, args.seed, args.out,
                                      sample_rate=args.sample_rate)
    print(json.dumps({"participants": args.n, "utterances": len(entries),
                      "manifest": os.path.join(args.out, "manifest.csv")}))
    return 0


def _cmd_corpus_split(args):
    entries = load_manifest(args.manifest)
    spec = SplitSpec(args.train, args.val, args.test, unit=args.unit,
                     seed=args.seed)
    entries = corpus_mod.split(entries, spec)
    out = args.out or args.manifest
    write_manifest(out, entries)
    counts = {}
    for e in entries:
        counts[e.split] = counts.get(e.split, 0) + 1
    print(json.dumps({"manifest": out, "counts": counts}, sort_keys=True))
    return 0


def _cmd_corpus_stats(args):
    report = corpus_mod.summarize(load_manifest(args.manifest))
    print(json.dumps(report, sort_keys=True))
    return 0


def _score_one(instrument: str, answers: list[int]) -> dict:
    response = surveys.SurveyResponse(instrument, tuple(answers))
    label = surveys.score(response)
    out = {"instrument": instrument}
    d = asdict(label)
    out.update({k: v for k, v in d.items() if v is not None})
    return out


def _cmd_survey_score(args):
    if (args.answers is None) == (args.csv is None):
        raise ToolkitError("give exactly one of --answers or --csv")
    if args.answers is not None:
        answers = [int(v) for v in args.answers.split(",") if v.strip() != ""]
        print(json.dumps(_score_one(args.instrument, answers), sort_keys=True))
        return 0
    with open(args.csv, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or \
                {"instrument", "answers"} - set(reader.fieldnames):
            raise ToolkitError(f"{args.csv}: need columns instrument,answers")
        for row in reader:
            answers = [int(v) for v in row["answers"].replace(",", " ").split()]
            print(json.dumps(_score_one(row["instrument"], answers),
                             sort_keys=True))
    return 0


def _cmd_augment_run(args):
    entries = load_manifest(args.manifest)
    plan = aug.load_plan(args.plan) if args.plan else aug.AugmentPlan(seed=args.seed)
    manifest_dir = os.path.dirname(os.path.abspath(args.manifest))
    subset = entries if args.all_splits else \
        [e for e in entries if e.split == "train"]
    os.makedirs(args.out, exist_ok=True)
    new_entries = aug.run_plan(subset, plan, args.out, manifest_dir)
    combined = [pipeline._rebase(e, manifest_dir, args.out) for e in entries]
    combined += new_entries
    out_manifest = os.path.join(args.out, "manifest.csv")
    write_manifest(out_manifest, combined)
    print(json.dumps({"augmented": len(new_entries), "manifest": out_manifest}))
    return 0


def _cmd_features_extract(args):
    cfg = load_config(args.config, _config_overrides(args))
    entries = load_manifest(args.manifest)
    base_dir = os.path.dirname(os.path.abspath(args.manifest))
    records = pipeline.extract_features_for(entries, base_dir, cfg)
    write_features(args.out, records)
    if args.csv:
        export_features_csv(args.csv, records)
    print(json.dumps({"records": len(records), "out": args.out}))
    return 0


def _cmd_train(args):
    cfg = load_config(args.config, _config_overrides(args))
    entries = load_manifest(args.manifest)
    features = pipeline.load_feature_map(args.features)
    train_entries = [e for e in entries if e.split == "train"]
    val_entries = [e for e in entries if e.split == "val"]

    x_train, y_train = pipeline.dataset_from(train_entries, features)
    scaler = pipeline.fit_scaler(x_train)
    x_train = (x_train - scaler[0]) / scaler[1]
    val_xy = pipeline.dataset_from(val_entries, features, scaler) \
        if val_entries else None

    model = nn.Model(nn.ModelSpec(n_classes=len(surveys.MODEL_CLASSES)),
                     seed=derive_seed(cfg.seed, "model"))
    tc = nn.TrainConfig(batch_size=cfg.batch_size, epochs=cfg.epochs,
                        learning_rate=cfg.learning_rate, momentum=cfg.momentum,
                        plateau_patience=cfg.plateau_patience,
                        plateau_factor=cfg.plateau_factor, min_lr=cfg.min_lr,
                        seed=derive_seed(cfg.seed, "train"))
    history = nn.train(model, (x_train, y_train), tc, val_xy=val_xy)

    os.makedirs(args.out, exist_ok=True)
    nn.save_model(model, os.path.join(args.out, "model.psnn"))
    pipeline.save_scaler(os.path.join(args.out, "scaler.json"), scaler)
    nn.write_history(os.path.join(args.out, "history.csv"), history)
    print(json.dumps({"out": args.out, "epochs": len(history),
                      "final_train_acc": history[-1]["train_acc"]}))
    return 0


def _cmd_eval(args):
    entries = load_manifest(args.manifest)
    features = pipeline.load_feature_map(args.features)
    model = nn.load_model(args.model,
                          expect_classes=len(surveys.MODEL_CLASSES))
    scaler = pipeline.load_scaler(args.scaler) if args.scaler else None
    subset = [e for e in entries if e.split == args.split]
    pooled = eval_mod.evaluate(model, subset, features,
                               surveys.MODEL_CLASSES, scaler)
    by_lang = eval_mod.evaluate_by_language(model, subset, features,
                                            surveys.MODEL_CLASSES, scaler)
    history = _read_history(args.history) if args.history else []
    eval_mod.export_report(pooled, by_lang, history, args.out)
    print(json.dumps({"accuracy": pooled.accuracy,
                      "binary_accuracy": pooled.binary_accuracy(),
                      "out": args.out}, sort_keys=True))
    return 0


def _read_history(path) -> list[dict]:
    history = []
    with open(path, "r", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        for row in reader:
            history.append({
                "epoch": int(row["epoch"]),
                "lr": float(row["lr"]),
                "train_loss": float(row["train_loss"]),
                "train_acc": float(row["train_acc"]),
                "val_loss": float(row["val_loss"]) if row["val_loss"] else None,
                "val_acc": float(row["val_acc"]) if row["val_acc"] else None,
            })
    return history


def _cmd_pipeline_all(args):
    cfg = load_config(args.config, _config_overrides(args))
    summary = pipeline.run_pipeline(cfg, args.out)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _config_overrides(args) -> dict:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depscreen",
        description="Speech-based depression screening pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus", help="corpus tooling")
    corpus_sub = p.add_subparsers(dest="subcommand", required=True)

    p_synth = corpus_sub.add_parser("synth", help="generate a synthetic corpus")
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--sample-rate", type=int, default=22050)
    p_synth.set_defaults(fn=_cmd_corpus_synth)

    p_split = corpus_sub.add_parser("split", help="assign train/val/test")
    p_split.add_argument("--manifest", required=True)
    p_split.add_argument("--unit", choices=("utterance", "participant"),
                         default="utterance")
    p_split.add_argument("--seed", type=int, default=0)
    p_split.add_argument("--train", type=float, default=0.64)
    p_split.add_argument("--val", type=float, default=0.16)
    p_split.add_argument("--test", type=float, default=0.20)
    p_split.add_argument("--out", default=None,
                         help="output manifest (default: rewrite in place)")
    p_split.set_defaults(fn=_cmd_corpus_split)

    p_stats = corpus_sub.add_parser("stats", help="per-band distributions")
    p_stats.add_argument("--manifest", required=True)
    p_stats.set_defaults(fn=_cmd_corpus_stats)

    p = sub.add_parser("survey", help="score survey responses")
    survey_sub = p.add_subparsers(dest="subcommand", required=True)
    p_score = survey_sub.add_parser("score")
    p_score.add_argument("--instrument", required=True,
                         choices=("phq9", "gad7", "panas", "stai_t"))
    p_score.add_argument("--answers", default=None,
                         help="comma-separated item answers")
    p_score.add_argument("--csv", default=None,
                         help="batch CSV with columns instrument,answers")
    p_score.set_defaults(fn=_cmd_survey_score)

    p = sub.add_parser("augment", help="expand the training data")
    aug_sub = p.add_subparsers(dest="subcommand", required=True)
    p_run = aug_sub.add_parser("run")
    p_run.add_argument("--manifest", required=True)
    p_run.add_argument("--plan", default=None, help="key=value plan file")
    p_run.add_argument("--seed", type=int, default=0,
                       help="plan seed when no plan file is given")
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--all-splits", action="store_true",
                       help="augment every split, not just train")
    p_run.set_defaults(fn=_cmd_augment_run)

    p = sub.add_parser("features", help="acoustic feature extraction")
    feat_sub = p.add_subparsers(dest="subcommand", required=True)
    p_extract = feat_sub.add_parser("extract")
    p_extract.add_argument("--manifest", required=True)
    p_extract.add_argument("--out", required=True, help="feature container path")
    p_extract.add_argument("--csv", default=None, help="also export CSV")
    p_extract.add_argument("--config", default=None)
    p_extract.add_argument("--jobs", type=int, default=None)
    p_extract.set_defaults(fn=_cmd_features_extract)

    p_train = sub.add_parser("train", help="train the classifier")
    p_train.add_argument("--manifest", required=True)
    p_train.add_argument("--features", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--config", default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.set_defaults(fn=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a trained model")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--features", required=True)
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--scaler", default=None)
    p_eval.add_argument("--history", default=None,
                        help="history.csv to chart in the report")
    p_eval.add_argument("--split", choices=("train", "val", "test"),
                        default="test")
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("pipeline", help="run the whole pipeline")
    pipe_sub = p.add_subparsers(dest="subcommand", required=True)
    p_all = pipe_sub.add_parser("all")
    p_all.add_argument("--config", default=None)
    p_all.add_argument("--out", required=True)
    p_all.add_argument("--seed", type=int, default=None)
    p_all.add_argument("--jobs", type=int, default=None)
    p_all.set_defaults(fn=_cmd_pipeline_all)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ToolkitError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
