"""Accuracy, confusion matrices, per-language breakdowns, report export.

Reports are deterministic byte streams: CSV matrices, a metrics.json with
sorted keys, and self-contained SVG charts (no plotting dependency) for
the training curves and confusion heatmaps.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .corpus import utterance_id
from .errors import ClassMismatch, MissingFeatures
from .surveys import MODEL_CLASSES

_NON_DEPRESSED_BANDS = ("none", "mild")


@dataclass
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    counts: np.ndarray
    class_names: tuple

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.class_names)
        if self.counts.shape != (k, k):
            raise ClassMismatch(
                f"matrix {self.counts.shape} vs {k} class names")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    def binary_accuracy(self) -> float:
        """Accuracy after collapsing bands to depressed / non-depressed."""
        if self.total == 0:
            return 0.0
        dep = np.array([name not in _NON_DEPRESSED_BANDS
                        for name in self.class_names])
        agree = dep[:, None] == dep[None, :]
        return float(self.counts[agree].sum() / self.total)


def _predict(model, x: np.ndarray, batch: int = 64) -> np.ndarray:
    preds = []
    for s in range(0, len(x), batch):
        logits = model.forward_logits(x[s: s + batch], train=False)
        preds.append(logits.argmax(axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def evaluate(model, entries, features: dict,
             class_names: tuple = MODEL_CLASSES,
             scaler=None) -> ConfusionMatrix:
    """Confusion matrix of model predictions over the given entries.

    `features` maps utterance id to a feature vector; `scaler` is an
    optional (mean, std) pair applied before the forward pass.
    """
    if model.spec.n_classes != len(class_names):
        raise ClassMismatch(
            f"model has {model.spec.n_classes} classes, names give {len(class_names)}")
    index = {name: i for i, name in enumerate(class_names)}
    vecs = []
    truth = []
    for e in entries:
        uid = utterance_id(e)
        if uid not in features:
            raise MissingFeatures(f"no feature vector for {uid!r}")
        if e.label_band not in index:
            raise ClassMismatch(
                f"label {e.label_band!r} not among classes {class_names}")
        vecs.append(np.ravel(features[uid]))
        truth.append(index[e.label_band])
    x = np.asarray(vecs, dtype=np.float64)
    if scaler is not None:
        mean, std = scaler
        x = (x - mean) / std
    preds = _predict(model, x)
    counts = np.zeros((len(class_names), len(class_names)), dtype=np.int64)
    np.add.at(counts, (np.asarray(truth), preds), 1)
    return ConfusionMatrix(counts, tuple(class_names))


def evaluate_by_language(model, entries, features: dict,
                         class_names: tuple = MODEL_CLASSES,
                         scaler=None) -> dict:
    """One confusion matrix per language present in the entries."""
    by_lang = {}
    for e in entries:
        by_lang.setdefault(e.language, []).append(e)
    return {lang: evaluate(model, lang_entries, features, class_names, scaler)
            for lang, lang_entries in sorted(by_lang.items())}


# --- report files ----------------------------------------------------------

def _write_confusion_csv(path, cm: ConfusionMatrix) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("true\\pred," + ",".join(cm.class_names) + "\n")
        for i, name in enumerate(cm.class_names):
            f.write(name + "," + ",".join(str(int(v)) for v in cm.counts[i]) + "\n")


def _svg_header(width, height):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n')


def _line_chart(series: dict, title: str, y_label: str) -> str:
    """Self-contained SVG line chart; one polyline point per epoch."""
    width, height = 640, 400
    left, right, top, bottom = 60, 20, 40, 40
    plot_w, plot_h = width - left - right, height - top - bottom
    colors = {"train": "#1f77b4", "val": "#d62728"}

    values = [v for pts in series.values() for v in pts if v is not None]
    n_epochs = max(len(pts) for pts in series.values())
    y_max = max(values) if values else 1.0
    y_max = max(y_max, 1e-9)
    y_min = 0.0

    def sx(epoch):
        if n_epochs == 1:
            return left + plot_w / 2
        return left + plot_w * (epoch - 1) / (n_epochs - 1)

    def sy(v):
        return top + plot_h * (1.0 - (v - y_min) / (y_max - y_min))

    parts = [_svg_header(width, height)]
    parts.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="14">{title}</text>\n')
    parts.append(f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" '
                 f'y2="{top + plot_h}" stroke="black"/>\n')
    parts.append(f'<line x1="{left}" y1="{top}" x2="{left}" '
                 f'y2="{top + plot_h}" stroke="black"/>\n')
    parts.append(f'<text x="{left - 10}" y="{top + 5}" text-anchor="end" '
                 f'font-family="sans-serif" font-size="11">{y_max:.3f}</text>\n')
    parts.append(f'<text x="{left - 10}" y="{top + plot_h}" text-anchor="end" '
                 f'font-family="sans-serif" font-size="11">0</text>\n')
    parts.append(f'<text x="{left + plot_w / 2:.1f}" y="{height - 8}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12">epoch (1..{n_epochs}), {y_label}</text>\n')
    legend_y = top
    for name, pts in series.items():
        if all(v is None for v in pts):
            continue
        coords = " ".join(f"{sx(i + 1):.2f},{sy(v):.2f}"
                          for i, v in enumerate(pts) if v is not None)
        color = colors.get(name, "#2ca02c")
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{coords}"/>\n')
        parts.append(f'<text x="{left + plot_w - 5}" y="{legend_y}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11" '
                     f'fill="{color}">{name}</text>\n')
        legend_y += 14
    parts.append("</svg>\n")
    return "".join(parts)


def _heatmap_svg(cm: ConfusionMatrix, title: str) -> str:
    k = len(cm.class_names)
    cell = 70
    left, top = 150, 70
    width = left + k * cell + 20
    height = top + k * cell + 20
    peak = max(int(cm.counts.max()), 1)
    parts = [_svg_header(width, height)]
    parts.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="14">{title}</text>\n')
    for j, name in enumerate(cm.class_names):
        parts.append(f'<text x="{left + j * cell + cell / 2:.1f}" y="{top - 8}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{name}</text>\n')
    for i, name in enumerate(cm.class_names):
        parts.append(f'<text x="{left - 8}" y="{top + i * cell + cell / 2 + 4:.1f}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{name}</text>\n')
        for j in range(k):
            v = int(cm.counts[i, j])
            shade = 255 - int(round(170 * v / peak))
            fill = f"rgb({shade},{shade},255)"
            x0, y0 = left + j * cell, top + i * cell
            parts.append(f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" '
                         f'fill="{fill}" stroke="#888"/>\n')
            parts.append(f'<text x="{x0 + cell / 2:.1f}" y="{y0 + cell / 2 + 4:.1f}" '
                         f'text-anchor="middle" font-family="sans-serif" '
                         f'font-size="12">{v}</text>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def export_report(pooled: ConfusionMatrix, by_language: dict, history,
                  out_dir) -> list[str]:
    """Write confusion CSVs, metrics.json, and SVG charts; returns filenames."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    _write_confusion_csv(os.path.join(out_dir, "confusion_all.csv"), pooled)
    written.append("confusion_all.csv")
    for lang, cm in sorted(by_language.items()):
        name = f"confusion_{lang}.csv"
        _write_confusion_csv(os.path.join(out_dir, name), cm)
        written.append(name)

    metrics = {
        "overall_accuracy": pooled.accuracy,
        "binary_accuracy": pooled.binary_accuracy(),
        "class_names": list(pooled.class_names),
        "per_language": {lang: {"accuracy": cm.accuracy}
                         for lang, cm in sorted(by_language.items())},
        "n_evaluated": pooled.total,
    }
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as f:
        json.dump(metrics, f, sort_keys=True, indent=2)
        f.write("\n")
    written.append("metrics.json")

    if history:
        acc = {"train": [r["train_acc"] for r in history],
               "val": [r["val_acc"] for r in history]}
        loss = {"train": [r["train_loss"] for r in history],
                "val": [r["val_loss"] for r in history]}
        for name, svg in (("accuracy.svg", _line_chart(acc, "model accuracy", "accuracy")),
                          ("loss.svg", _line_chart(loss, "model loss", "loss"))):
            with open(os.path.join(out_dir, name), "w", encoding="utf-8") as f:
                f.write(svg)
            written.append(name)

    for key, cm in [("all", pooled)] + sorted(by_language.items()):
        name = f"confusion_{key}.svg"
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as f:
            f.write(_heatmap_svg(cm, f"confusion ({key})"))
        written.append(name)
    return written
