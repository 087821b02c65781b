"""Seeded audio augmentation: noise, time stretch, time shift, pitch shift.

All four operators are pure functions of (input, parameters, seed).  Batch
augmentation derives one generator per source clip from the plan seed and
the utterance id, so outputs are identical no matter how the work is
ordered or parallelized.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .audio_io import AudioClip, read_wav, resample_by_ratio, write_wav
from .errors import ClipTooShort, ShiftExceedsClip
from .features import FrameConfig, hann_window, stft_complex


def add_noise(clip: AudioClip, factor: float,
              rng: np.random.Generator) -> AudioClip:
    """Add uniform noise scaled by factor * peak amplitude, clamped to [-1, 1]."""
    if factor < 0:
        raise ValueError("noise factor must be >= 0")
    if factor == 0.0:
        return AudioClip(clip.samples.copy(), clip.sample_rate_hz)
    peak = np.max(np.abs(clip.samples)) if len(clip) else 0.0
    noise = rng.uniform(-1.0, 1.0, size=len(clip))
    out = np.clip(clip.samples + factor * peak * noise, -1.0, 1.0)
    return AudioClip(out, clip.sample_rate_hz)


def _istft(spec: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Weighted overlap-add inverse of stft_complex (centered frames)."""
    win = hann_window(cfg.frame_length)
    frames = np.fft.irfft(spec, n=cfg.n_fft, axis=1)[:, : cfg.frame_length]
    frames *= win
    n_frames = frames.shape[0]
    out_len = cfg.hop_length * (n_frames - 1) + cfg.frame_length
    out = np.zeros(out_len)
    norm = np.zeros(out_len)
    wsq = win ** 2
    for t in range(n_frames):
        s = t * cfg.hop_length
        out[s: s + cfg.frame_length] += frames[t]
        norm[s: s + cfg.frame_length] += wsq
    out /= np.maximum(norm, 1e-12)
    pad = cfg.frame_length // 2
    return out[pad: out_len - pad]


def time_stretch(clip: AudioClip, rate: float,
                 cfg: FrameConfig = FrameConfig()) -> AudioClip:
    """Phase-vocoder time-scale modification; pitch is preserved.

    rate > 1 speeds up (shorter output), rate < 1 slows down.  Output
    length is exactly round(len / rate).
    """
    if rate <= 0:
        raise ValueError("stretch rate must be > 0")
    if len(clip) < cfg.frame_length:
        raise ClipTooShort(
            f"{len(clip)} samples < one analysis frame ({cfg.frame_length})")

    spec = stft_complex(clip.samples, cfg)
    n_frames, n_bins = spec.shape
    steps = np.arange(0, n_frames, rate)

    # Expected phase advance per analysis hop for each bin center.
    omega = 2.0 * np.pi * cfg.hop_length * np.arange(n_bins) / cfg.n_fft

    mag = np.abs(spec)
    phase_in = np.angle(spec)

    out = np.empty((len(steps), n_bins), dtype=np.complex128)
    phase = phase_in[0].copy()
    for i, step in enumerate(steps):
        lo = int(step)
        hi = min(lo + 1, n_frames - 1)
        frac = step - lo
        m = (1.0 - frac) * mag[lo] + frac * mag[hi]
        out[i] = m * np.exp(1j * phase)
        # Accumulate instantaneous phase from the analysis frame pair.
        dphi = phase_in[hi] - phase_in[lo] - omega
        dphi -= 2.0 * np.pi * np.round(dphi / (2.0 * np.pi))
        phase += omega + dphi

    y = _istft(out, cfg)
    target = int(round(len(clip) / rate))
    return AudioClip(_fix_length(y, target), clip.sample_rate_hz)


def _fix_length(x: np.ndarray, n: int) -> np.ndarray:
    if len(x) >= n:
        return x[:n]
    return np.pad(x, (0, n - len(x)))


def shift_samples(clip: AudioClip, shift: int) -> AudioClip:
    """Displace content by `shift` samples; the vacated region is zero."""
    n = len(clip)
    if abs(shift) >= n:
        raise ShiftExceedsClip(f"shift {shift} >= clip length {n}")
    out = np.zeros(n)
    if shift >= 0:
        out[shift:] = clip.samples[: n - shift]
    else:
        out[: n + shift] = clip.samples[-shift:]
    return AudioClip(out, clip.sample_rate_hz)


def time_shift(clip: AudioClip, max_ms: float,
               rng: np.random.Generator) -> AudioClip:
    """Shift by an integer number of samples drawn uniformly in +-max_ms."""
    if max_ms < 0:
        raise ValueError("max_ms must be >= 0")
    max_samples = int(round(max_ms * clip.sample_rate_hz / 1000.0))
    if max_samples >= len(clip):
        raise ShiftExceedsClip(
            f"max shift {max_samples} samples >= clip length {len(clip)}")
    if max_samples == 0:
        return AudioClip(clip.samples.copy(), clip.sample_rate_hz)
    shift = int(rng.integers(-max_samples, max_samples + 1))
    return shift_samples(clip, shift)


def pitch_shift(clip: AudioClip, semitones: float,
                cfg: FrameConfig = FrameConfig()) -> AudioClip:
    """Move pitch by `semitones` while keeping duration.

    Stretches time by 2^(-s/12) with the phase vocoder, then resamples the
    result back to the original length; a tone at f lands at f * 2^(s/12).
    """
    if abs(semitones) > 24:
        raise ValueError("pitch shift limited to +-24 semitones")
    rate = 2.0 ** (-semitones / 12.0)
    stretched = time_stretch(clip, rate, cfg)
    y = resample_by_ratio(stretched.samples, len(clip) / len(stretched))
    return AudioClip(np.clip(_fix_length(y, len(clip)), -1.0, 1.0),
                     clip.sample_rate_hz)


@dataclass(frozen=True)
class AugmentPlan:
    """One output per operator, applied to every input clip."""

    noise_factor: float = 0.035
    stretch_rate: float = 0.8
    shift_max_ms: float = 100.0
    pitch_semitones: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_factor < 0:
            raise ValueError("noise_factor must be >= 0")
        if self.stretch_rate <= 0:
            raise ValueError("stretch_rate must be > 0")
        if self.shift_max_ms < 0:
            raise ValueError("shift_max_ms must be >= 0")
        if abs(self.pitch_semitones) > 24:
            raise ValueError("pitch_semitones limited to +-24")

    @property
    def copies_per_clip(self) -> int:
        return len(self.ops)

    @property
    def ops(self) -> tuple:
        return (
            ("noise", self.noise_factor),
            ("stretch", self.stretch_rate),
            ("shift", self.shift_max_ms),
            ("pitch", self.pitch_semitones),
        )


def load_plan(path) -> AugmentPlan:
    """Read a plan from a flat key=value file ('#' starts a comment)."""
    keys = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, v = (part.strip() for part in line.split("=", 1))
            keys[k] = v
    allowed = {"noise_factor", "stretch_rate", "shift_max_ms",
               "pitch_semitones", "seed"}
    unknown = set(keys) - allowed
    if unknown:
        raise ValueError(f"{path}: unknown plan keys {sorted(unknown)}")
    kwargs = {k: (int(v) if k == "seed" else float(v)) for k, v in keys.items()}
    return AugmentPlan(**kwargs)


def _format_param(value: float) -> str:
    return f"{value:g}"


def augment_clip(clip: AudioClip, uid: str, plan: AugmentPlan):
    """Yield (suffix, augmented clip) for each operator in the plan."""
    for op, param in plan.ops:
        rng = seeding.generator(plan.seed, uid, op)
        if op == "noise":
            out = add_noise(clip, param, rng)
        elif op == "stretch":
            out = time_stretch(clip, param)
        elif op == "shift":
            out = time_shift(clip, param, rng)
        else:
            out = pitch_shift(clip, param)
        yield f"{op}{_format_param(param)}", out


def run_plan(entries, plan: AugmentPlan, out_dir, manifest_dir) -> list:
    """Augment every manifest entry; returns the new entries.

    Writes `<utterance_id>__<op><param>.wav` files alongside an entry per
    output that inherits the source's labels and split.
    """
    from .corpus import ManifestEntry, utterance_id

    os.makedirs(out_dir, exist_ok=True)
    new_entries = []
    for entry in entries:
        src_path = os.path.join(manifest_dir, entry.audio_path)
        clip = read_wav(src_path)
        uid = utterance_id(entry)
        for suffix, out_clip in augment_clip(clip, uid, plan):
            name = f"{uid}__{suffix}.wav"
            write_wav(out_clip, os.path.join(out_dir, name), encoding="float32")
            new_entries.append(ManifestEntry(
                participant_id=entry.participant_id,
                language=entry.language,
                category=entry.category,
                sentence_id=entry.sentence_id,
                audio_path=name,
                phq9_total=entry.phq9_total,
                gad7_total=entry.gad7_total,
                pa_total=entry.pa_total,
                na_total=entry.na_total,
                stai_total=entry.stai_total,
                label_band=entry.label_band,
                split=entry.split,
                augmented_from=uid,
            ))
    return new_entries
