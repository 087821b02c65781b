"""Corpus manifest, deterministic splits, statistics, synthetic generation.

A manifest is a CSV with one row per utterance: participant, language,
stimulus category, sentence id, audio path (relative to the manifest),
raw survey totals, the derived label band, the split, and (for augmented
rows) the source utterance id.

The synthetic generator stands in for real recordings: clips are harmonic
tones whose fundamental, amplitude-modulation rate, and noise floor depend
on the participant's label band, so classifiers have real signal to find.
It makes no claim of modeling depressed speech.
"""

import csv
import os
from dataclasses import dataclass, replace

import numpy as np

from . import seeding
from .audio_io import AudioClip, write_wav
from .errors import (ConsistencyError, DuplicateUtterance, ItemOutOfRange,
                     SchemaError, TooFewEntries)
from .surveys import (MODEL_CLASSES, PHQ9_BANDS, gad7_band, panas_polarity,
                      phq9_band, stai_band)

LANGUAGES = ("en", "ml")

# Stimulus categories and how many of the 22 sentences each one covers.
CATEGORY_COUNTS = {
    "simple": 8,
    "wh_question": 3,
    "no_morphosyntactic_marker": 3,
    "inversion_question": 3,
    "coordination": 5,
}

SENTENCES_PER_LANGUAGE = 22

MANIFEST_COLUMNS = [
    "participant_id", "language", "category", "sentence_id", "audio_path",
    "phq9_total", "gad7_total", "pa_total", "na_total", "stai_total",
    "label_band", "split", "augmented_from",
]

_SPLITS = ("train", "val", "test")


def sentence_category(sentence_id: int) -> str:
    """Category of sentence 1..22: 8 simple, then 3+3+3 questions, 5 coordinations."""
    if not 1 <= sentence_id <= SENTENCES_PER_LANGUAGE:
        raise ValueError(f"sentence_id {sentence_id} outside 1..{SENTENCES_PER_LANGUAGE}")
    edge = 0
    for cat, count in CATEGORY_COUNTS.items():
        edge += count
        if sentence_id <= edge:
            return cat
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class ManifestEntry:
    participant_id: str
    language: str
    category: str
    sentence_id: int
    audio_path: str
    phq9_total: int
    gad7_total: int
    pa_total: int
    na_total: int
    stai_total: int
    label_band: str
    split: str
    augmented_from: str | None = None


def utterance_id(entry: ManifestEntry) -> str:
    """Stable unique id: canonical key for originals, file stem for augmented."""
    if entry.augmented_from:
        return os.path.splitext(os.path.basename(entry.audio_path))[0]
    return f"{entry.participant_id}_{entry.language}_s{entry.sentence_id:02d}"


def _parse_int(row: dict, col: str, path) -> int:
    try:
        return int(row[col])
    except (ValueError, TypeError) as e:
        raise SchemaError(f"{path}: bad integer in column {col!r}: {row[col]!r}") from e


def load_manifest(path) -> list[ManifestEntry]:
    """Read and validate a manifest CSV."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file")
        missing = set(MANIFEST_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise SchemaError(f"{path}: missing columns {sorted(missing)}")
        extra = set(reader.fieldnames) - set(MANIFEST_COLUMNS)
        if extra:
            raise SchemaError(f"{path}: unknown columns {sorted(extra)}")

        entries = []
        seen = set()
        for row in reader:
            entry = ManifestEntry(
                participant_id=row["participant_id"],
                language=row["language"],
                category=row["category"],
                sentence_id=_parse_int(row, "sentence_id", path),
                audio_path=row["audio_path"],
                phq9_total=_parse_int(row, "phq9_total", path),
                gad7_total=_parse_int(row, "gad7_total", path),
                pa_total=_parse_int(row, "pa_total", path),
                na_total=_parse_int(row, "na_total", path),
                stai_total=_parse_int(row, "stai_total", path),
                label_band=row["label_band"],
                split=row["split"],
                augmented_from=row["augmented_from"] or None,
            )
            if entry.language not in LANGUAGES:
                raise SchemaError(f"{path}: language {entry.language!r}")
            if entry.category not in CATEGORY_COUNTS:
                raise SchemaError(f"{path}: category {entry.category!r}")
            if entry.split not in _SPLITS:
                raise SchemaError(f"{path}: split {entry.split!r}")
            try:
                expected_band = phq9_band(entry.phq9_total)
            except ItemOutOfRange as e:
                raise SchemaError(f"{path}: {e}") from e
            if entry.label_band != expected_band:
                raise ConsistencyError(
                    f"{path}: row {utterance_id(entry)!r} has band "
                    f"{entry.label_band!r} but total {entry.phq9_total} implies "
                    f"{expected_band!r}")
            if entry.augmented_from is None:
                key = (entry.participant_id, entry.language, entry.sentence_id)
                if key in seen:
                    raise DuplicateUtterance(f"{path}: duplicate {key}")
                seen.add(key)
            entries.append(entry)
    return entries


def write_manifest(path, entries) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_COLUMNS)
        for e in entries:
            writer.writerow([
                e.participant_id, e.language, e.category, e.sentence_id,
                e.audio_path, e.phq9_total, e.gad7_total, e.pa_total,
                e.na_total, e.stai_total, e.label_band, e.split,
                e.augmented_from or "",
            ])


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.64
    val: float = 0.16
    test: float = 0.20
    unit: str = "utterance"      # utterance | participant
    seed: int = 0

    def __post_init__(self):
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1.0")
        if min(self.train, self.val, self.test) < 0:
            raise ValueError("split fractions must be >= 0")
        if self.unit not in ("utterance", "participant"):
            raise ValueError(f"unknown split unit {self.unit!r}")


def _allocate(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    n_train = int(round(spec.train * n))
    n_val = int(round(spec.val * n))
    n_test = n - n_train - n_val
    return n_train, n_val, n_test


def split(entries, spec: SplitSpec) -> list[ManifestEntry]:
    """Assign splits, stratified by label band; deterministic for a seed.

    Augmented rows always follow their source utterance.  In participant
    mode every utterance of a speaker lands in the same split.
    """
    originals = [e for e in entries if e.augmented_from is None]

    if spec.unit == "participant":
        band_of = {}
        for e in originals:
            band_of.setdefault(e.participant_id, e.label_band)
        units = sorted(band_of)
        stratum_of = band_of
    else:
        units = sorted(utterance_id(e) for e in originals)
        stratum_of = {utterance_id(e): e.label_band for e in originals}

    assignment: dict[str, str] = {}
    for band in PHQ9_BANDS:
        members = [u for u in units if stratum_of[u] == band]
        if not members:
            continue
        if len(members) < 5:
            raise TooFewEntries(
                f"stratum {band!r} has {len(members)} units; need >= 5")
        rng = seeding.generator(spec.seed, "split", band)
        order = rng.permutation(len(members))
        n_train, n_val, _ = _allocate(len(members), spec)
        for rank, idx in enumerate(order):
            if rank < n_train:
                part = "train"
            elif rank < n_train + n_val:
                part = "val"
            else:
                part = "test"
            assignment[members[idx]] = part

    def split_for(entry: ManifestEntry) -> str:
        if entry.augmented_from is not None:
            return assignment[entry.augmented_from] if spec.unit == "utterance" \
                else assignment[entry.participant_id]
        key = entry.participant_id if spec.unit == "participant" else utterance_id(entry)
        return assignment[key]

    return [replace(e, split=split_for(e)) for e in entries]


def _percent(count: int, total: int) -> float:
    return round(100.0 * count / total, 2)


def summarize(entries) -> dict:
    """Per-participant band distributions for all four instruments."""
    if not entries:
        raise ValueError("empty manifest")
    participants = {}
    for e in entries:
        participants.setdefault(e.participant_id, e)

    total = len(participants)

    def table(band_names, band_fn):
        counts = {b: 0 for b in band_names}
        for p in participants.values():
            counts[band_fn(p)] += 1
        return [{"band": b, "count": counts[b], "percent": _percent(counts[b], total)}
                for b in band_names]

    return {
        "n_participants": total,
        "n_utterances": len(entries),
        "phq9": table(PHQ9_BANDS, lambda p: phq9_band(p.phq9_total)),
        "gad7": table(("minimal", "mild", "moderate", "severe"),
                      lambda p: gad7_band(p.gad7_total)),
        "panas": table(("positive", "negative", "neutral"),
                       lambda p: panas_polarity(p.pa_total, p.na_total)),
        "stai_t": table(("low", "medium", "high"),
                        lambda p: stai_band(p.stai_total)),
    }


# --- synthetic corpus -----------------------------------------------------

# Acoustic recipe per label band: fundamental (Hz), amplitude-modulation
# rate (Hz), and noise floor.  Values are spread far enough apart that the
# classes are separable by construction.
_BAND_RECIPES = {
    "none": (120.0, 7.0, 0.003),
    "mild": (165.0, 5.0, 0.012),
    "moderate": (215.0, 3.5, 0.024),
    "moderately_severe": (270.0, 2.2, 0.040),
    "severe": (330.0, 1.4, 0.060),
}


def _items_for_total(rng, target: int, n_items: int, per_item_max: int) -> list[int]:
    items = [0] * n_items
    while sum(items) < target:
        i = int(rng.integers(n_items))
        if items[i] < per_item_max:
            items[i] += 1
    return items


def _synth_clip(rng, band: str, language: str, sentence_id: int,
                sample_rate: int) -> AudioClip:
    f0_base, am_rate, noise_floor = _BAND_RECIPES[band]
    f0 = f0_base * (1.0 + 0.04 * (language == "ml")) + rng.uniform(-8.0, 8.0)
    f0 *= 1.0 + 0.01 * rng.uniform(-1.0, 1.0)
    duration = 0.5 + 0.3 * (sentence_id - 1) / (SENTENCES_PER_LANGUAGE - 1) \
        + rng.uniform(0.0, 0.05)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate

    x = np.zeros(n)
    for h in range(1, 5):
        x += np.sin(2.0 * np.pi * h * f0 * t + rng.uniform(0, 2 * np.pi)) / h
    env = 0.55 + 0.45 * np.sin(2.0 * np.pi * am_rate * t + rng.uniform(0, 2 * np.pi))
    if language == "ml":
        env *= 0.9 + 0.1 * np.sin(2.0 * np.pi * 2 * am_rate * t)
    x *= env
    x *= 0.75 / np.max(np.abs(x))
    x += noise_floor * rng.uniform(-1.0, 1.0, size=n)
    return AudioClip(np.clip(x, -1.0, 1.0), sample_rate)


def synth_corpus(n_participants: int, seed: int, out_dir,
                 sample_rate: int = 22050,
                 split_spec: SplitSpec | None = None) -> list[ManifestEntry]:
    """Generate WAVs plus a validated manifest under out_dir.

    Participants cycle through the four modeled label bands; survey item
    responses are sampled to hit a total inside the band.  Writes
    out_dir/audio/*.wav and out_dir/manifest.csv, and returns the entries.
    """
    if n_participants < 4:
        raise ValueError("need at least 4 participants")
    audio_dir = os.path.join(out_dir, "audio")
    os.makedirs(audio_dir, exist_ok=True)

    band_targets = {
        "none": (0, 4), "mild": (5, 9), "moderate": (10, 14),
        "moderately_severe": (15, 19), "severe": (20, 27),
    }

    entries = []
    for idx in range(n_participants):
        pid = f"p{idx:03d}"
        band = MODEL_CLASSES[idx % len(MODEL_CLASSES)]
        rng = seeding.generator(seed, "participant", pid)

        lo, hi = band_targets[band]
        phq9_items = _items_for_total(rng, int(rng.integers(lo, hi + 1)), 9, 3)
        gad7_items = [int(v) for v in rng.integers(0, 4, size=7)]
        panas_items = [int(v) for v in rng.integers(1, 6, size=20)]
        stai_items = [int(v) for v in rng.integers(1, 5, size=20)]

        from .surveys import score_gad7, score_panas, score_phq9, score_stai_t
        dep = score_phq9(phq9_items)
        gad = score_gad7(gad7_items)
        mood = score_panas(panas_items)
        stai = score_stai_t(stai_items)

        for language in LANGUAGES:
            for sid in range(1, SENTENCES_PER_LANGUAGE + 1):
                clip_rng = seeding.generator(seed, "clip", pid, language, str(sid))
                clip = _synth_clip(clip_rng, band, language, sid, sample_rate)
                uid = f"{pid}_{language}_s{sid:02d}"
                rel = os.path.join("audio", f"{uid}.wav")
                write_wav(clip, os.path.join(out_dir, rel), encoding="float32")
                entries.append(ManifestEntry(
                    participant_id=pid,
                    language=language,
                    category=sentence_category(sid),
                    sentence_id=sid,
                    audio_path=rel,
                    phq9_total=dep.phq9_total,
                    gad7_total=gad.gad7_total,
                    pa_total=mood.pa_total,
                    na_total=mood.na_total,
                    stai_total=stai.stai_total,
                    label_band=dep.band,
                    split="train",
                    augmented_from=None,
                ))

    spec = split_spec or SplitSpec(seed=seeding.derive_seed(seed, "split"))
    entries = split(entries, spec)
    write_manifest(os.path.join(out_dir, "manifest.csv"), entries)
    return entries
