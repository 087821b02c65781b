"""End-to-end orchestration: corpus -> split -> augment -> features -> train -> eval.

Every stage derives its randomness from the single pipeline seed, so a rerun
with the same config into a fresh directory reproduces every artifact byte
for byte.  All outputs land under the chosen output directory; a final
artifacts.json records a content hash for each produced file.
"""

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import augment as aug
from . import corpus as corpus_mod
from . import evaluate as eval_mod
from . import nn
from .audio_io import read_wav
from .config import PipelineConfig
from .corpus import SplitSpec, load_manifest, utterance_id, write_manifest
from .errors import ClassMismatch
from .features import (FrameConfig, MelConfig, aggregate, extract_178,
                       read_features, write_features)
from .seeding import derive_seed
from .surveys import MODEL_CLASSES

STD_FLOOR = 1e-8


def _rebase(entry, src_dir, dst_dir):
    abs_path = os.path.normpath(os.path.join(src_dir, entry.audio_path))
    return replace(entry, audio_path=os.path.relpath(abs_path, dst_dir))


def extract_entry_vector(args):
    """Feature vector for one manifest entry (top-level for process pools)."""
    wav_path, sample_rate, frame_length, hop_length, n_mels, n_mfcc = args
    clip = read_wav(wav_path, target_hz=sample_rate)
    fm = extract_178(clip, FrameConfig(frame_length, hop_length),
                     MelConfig(n_mels))
    del n_mfcc  # fixed at 36 by the 178-column layout
    return aggregate(fm)


def extract_features_for(entries, base_dir, cfg: PipelineConfig):
    """(utterance_id, vector) records in manifest order."""
    args = [(os.path.join(base_dir, e.audio_path), cfg.sample_rate,
             cfg.frame_length, cfg.hop_length, cfg.n_mels, cfg.n_mfcc)
            for e in entries]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            vectors = list(pool.map(extract_entry_vector, args, chunksize=16))
    else:
        vectors = [extract_entry_vector(a) for a in args]
    return [(utterance_id(e), v) for e, v in zip(entries, vectors)]


def fit_scaler(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and (floored) standard deviation."""
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), STD_FLOOR)
    return mean, std


def save_scaler(path, scaler) -> None:
    mean, std = scaler
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"mean": [repr(float(v)) for v in mean],
                   "std": [repr(float(v)) for v in std]},
                  f, sort_keys=True)
        f.write("\n")


def load_scaler(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "r", encoding="utf-8") as f:
        d = json.load(f)
    return (np.array([float(v) for v in d["mean"]]),
            np.array([float(v) for v in d["std"]]))


def dataset_from(entries, features: dict, scaler=None):
    """(X, y) arrays for entries whose band is a modeled class."""
    xs, ys = [], []
    for e in entries:
        if e.label_band not in MODEL_CLASSES:
            raise ClassMismatch(f"band {e.label_band!r} not modeled")
        xs.append(np.ravel(features[utterance_id(e)]))
        ys.append(MODEL_CLASSES.index(e.label_band))
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.int64)
    if scaler is not None:
        x = (x - scaler[0]) / scaler[1]
    return x, y


def _hash_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_artifact_hashes(out_dir) -> str:
    """Hash every file under out_dir into artifacts.json."""
    records = {}
    for root, _, names in os.walk(out_dir):
        for name in names:
            path = os.path.join(root, name)
            rel = os.path.relpath(path, out_dir)
            if rel == "artifacts.json":
                continue
            records[rel.replace(os.sep, "/")] = _hash_file(path)
    out_path = os.path.join(out_dir, "artifacts.json")
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump(records, f, sort_keys=True, indent=2)
        f.write("\n")
    return out_path


def run_pipeline(cfg: PipelineConfig, out_dir) -> dict:
    """Run every stage; returns a summary with the headline metrics."""
    out_dir = os.path.abspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)

    # corpus
    if cfg.corpus_mode == "synth":
        corpus_dir = os.path.join(out_dir, "corpus")
        entries = corpus_mod.synth_corpus(
            cfg.synth_participants, derive_seed(cfg.seed, "corpus"),
            corpus_dir, sample_rate=cfg.sample_rate,
            split_spec=SplitSpec(cfg.train_frac, cfg.val_frac, cfg.test_frac,
                                 unit=cfg.split_unit,
                                 seed=derive_seed(cfg.seed, "split")))
        base_dir = corpus_dir
    else:
        entries = load_manifest(cfg.manifest)
        base_dir = os.path.dirname(os.path.abspath(cfg.manifest))
        entries = corpus_mod.split(
            entries, SplitSpec(cfg.train_frac, cfg.val_frac, cfg.test_frac,
                               unit=cfg.split_unit,
                               seed=derive_seed(cfg.seed, "split")))
    entries = [_rebase(e, base_dir, out_dir) for e in entries]

    # augmentation (training split only; evaluation data stays clean)
    if cfg.augment:
        plan = aug.AugmentPlan(cfg.noise_factor, cfg.stretch_rate,
                               cfg.shift_max_ms, cfg.pitch_semitones,
                               seed=derive_seed(cfg.seed, "augment"))
        train_orig = [e for e in entries if e.split == "train"]
        aug_entries = aug.run_plan(train_orig, plan,
                                   os.path.join(out_dir, "augmented"), out_dir)
        aug_entries = [replace(e, audio_path=os.path.join("augmented", e.audio_path))
                       for e in aug_entries]
        entries = entries + aug_entries
    write_manifest(os.path.join(out_dir, "manifest.csv"), entries)

    # features
    records = extract_features_for(entries, out_dir, cfg)
    write_features(os.path.join(out_dir, "features.psdf"), records)
    features = {uid: vec for uid, vec in records}

    # training
    train_entries = [e for e in entries if e.split == "train"]
    val_entries = [e for e in entries if e.split == "val"]
    x_train, y_train = dataset_from(train_entries, features)
    scaler = fit_scaler(x_train)
    x_train = (x_train - scaler[0]) / scaler[1]
    val_xy = dataset_from(val_entries, features, scaler) if val_entries else None

    model = nn.Model(nn.ModelSpec(n_classes=len(MODEL_CLASSES)),
                     seed=derive_seed(cfg.seed, "model"))
    tc = nn.TrainConfig(batch_size=cfg.batch_size, epochs=cfg.epochs,
                        learning_rate=cfg.learning_rate, momentum=cfg.momentum,
                        plateau_patience=cfg.plateau_patience,
                        plateau_factor=cfg.plateau_factor, min_lr=cfg.min_lr,
                        seed=derive_seed(cfg.seed, "train"))
    history = nn.train(model, (x_train, y_train), tc, val_xy=val_xy)
    nn.save_model(model, os.path.join(out_dir, "model.psnn"))
    save_scaler(os.path.join(out_dir, "scaler.json"), scaler)
    nn.write_history(os.path.join(out_dir, "history.csv"), history)

    # evaluation on the held-out test split
    test_entries = [e for e in entries if e.split == "test"]
    pooled = eval_mod.evaluate(model, test_entries, features,
                               MODEL_CLASSES, scaler)
    by_lang = eval_mod.evaluate_by_language(model, test_entries, features,
                                            MODEL_CLASSES, scaler)
    report_dir = os.path.join(out_dir, "report")
    eval_mod.export_report(pooled, by_lang, history, report_dir)

    write_artifact_hashes(out_dir)
    return {
        "out_dir": out_dir,
        "n_entries": len(entries),
        "n_train": len(train_entries),
        "n_test": len(test_entries),
        "test_accuracy": pooled.accuracy,
        "binary_accuracy": pooled.binary_accuracy(),
        "per_language": {lang: cm.accuracy for lang, cm in by_lang.items()},
    }


def load_feature_map(path) -> dict:
    return {uid: vec for uid, vec in read_features(path)}
