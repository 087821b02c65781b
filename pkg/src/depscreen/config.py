"""Flat key=value pipeline configuration.

One file carries every tunable of the pipeline stages.  Unknown keys are
rejected and all values are validated at parse time; CLI flags override
file values.
"""

from dataclasses import dataclass, fields, replace


def _to_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


@dataclass(frozen=True)
class PipelineConfig:
    # corpus
    corpus_mode: str = "synth"          # synth | manifest
    manifest: str = ""
    synth_participants: int = 32
    sample_rate: int = 22050
    # split
    train_frac: float = 0.64
    val_frac: float = 0.16
    test_frac: float = 0.20
    split_unit: str = "utterance"       # utterance | participant
    # framing / features
    frame_length: int = 2048
    hop_length: int = 512
    n_mels: int = 128
    n_mfcc: int = 36
    # augmentation
    augment: bool = True
    noise_factor: float = 0.035
    stretch_rate: float = 0.8
    shift_max_ms: float = 100.0
    pitch_semitones: float = 2.0
    # training
    batch_size: int = 64
    epochs: int = 50
    learning_rate: float = 1e-3
    momentum: float = 0.9
    plateau_patience: int = 5
    plateau_factor: float = 0.4
    min_lr: float = 1e-6
    # global
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.corpus_mode not in ("synth", "manifest"):
            raise ValueError(f"corpus_mode {self.corpus_mode!r}")
        if self.corpus_mode == "manifest" and not self.manifest:
            raise ValueError("corpus_mode=manifest requires a manifest path")
        if abs(self.train_frac + self.val_frac + self.test_frac - 1.0) > 1e-9:
            raise ValueError("train/val/test fractions must sum to 1.0")
        if self.split_unit not in ("utterance", "participant"):
            raise ValueError(f"split_unit {self.split_unit!r}")
        for name in ("sample_rate", "frame_length", "hop_length", "n_mels",
                     "n_mfcc", "batch_size", "epochs", "synth_participants",
                     "jobs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.hop_length > self.frame_length:
            raise ValueError("hop_length must be <= frame_length")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ValueError("plateau_factor must be in (0, 1)")
        if self.noise_factor < 0 or self.shift_max_ms < 0:
            raise ValueError("augmentation amounts must be >= 0")
        if self.stretch_rate <= 0:
            raise ValueError("stretch_rate must be > 0")
        if abs(self.pitch_semitones) > 24:
            raise ValueError("pitch_semitones limited to +-24")


_PARSERS = {bool: _to_bool, int: int, float: float, str: str,
            "bool": _to_bool, "int": int, "float": float, "str": str}
_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def read_key_values(path) -> dict:
    """Parse a flat `key = value` file; '#' starts a comment."""
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            k, v = (part.strip() for part in line.split("=", 1))
            if k in out:
                raise ValueError(f"{path}:{lineno}: duplicate key {k!r}")
            out[k] = v
    return out


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Build a config from an optional file plus typed overrides."""
    raw = read_key_values(path) if path else {}
    unknown = set(raw) - set(_FIELD_TYPES)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    typed = {}
    for k, v in raw.items():
        try:
            typed[k] = _PARSERS[_FIELD_TYPES[k]](v)
        except ValueError as e:
            raise ValueError(f"config key {k!r}: {e}") from e
    cfg = PipelineConfig(**typed)
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg
