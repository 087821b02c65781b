import os

import numpy as np
import pytest

from depscreen import seeding
from depscreen.audio_io import AudioClip, read_wav
from depscreen.augment import (AugmentPlan, add_noise, augment_clip, load_plan,
                               pitch_shift, run_plan, shift_samples,
                               time_shift, time_stretch)
from depscreen.corpus import ManifestEntry, utterance_id, write_manifest
from depscreen.errors import ClipTooShort, ShiftExceedsClip

from conftest import fft_peak_hz, sine_clip

SR = 22050


# --- noise -------------------------------------------------------------------

def test_noise_factor_zero_is_identity(sine440):
    out = add_noise(sine440, 0.0, seeding.generator(1, "x"))
    assert np.array_equal(out.samples, sine440.samples)


def test_noise_on_silence_stays_silent():
    clip = AudioClip(np.zeros(1000), SR)
    out = add_noise(clip, 0.5, seeding.generator(1, "x"))
    assert np.all(out.samples == 0.0)


def test_noise_amplitude_and_rms(sine440):
    factor = 0.035
    clip = AudioClip(sine_clip(440.0, 1.0, amplitude=1.0).samples, SR)
    out = add_noise(clip, factor, seeding.generator(2, "x"))
    assert len(out) == len(clip)
    delta = out.samples - clip.samples
    # clamping can only shrink the perturbation, never grow it
    assert np.max(np.abs(delta)) <= factor + 1e-12
    inner = np.abs(clip.samples) < 0.9       # away from the clamp region
    rms = np.sqrt(np.mean(delta[inner] ** 2))
    expected = factor / np.sqrt(3)           # RMS of Uniform(-factor, factor)
    assert abs(rms - expected) / expected < 0.10


def test_noise_is_seed_deterministic(sine440):
    a = add_noise(sine440, 0.05, seeding.generator(7, "u"))
    b = add_noise(sine440, 0.05, seeding.generator(7, "u"))
    assert np.array_equal(a.samples, b.samples)


# --- time stretch --------------------------------------------------------------

def test_stretch_rate_one(sine440):
    out = time_stretch(sine440, 1.0)
    assert abs(len(out) - len(sine440)) <= 512
    assert abs(fft_peak_hz(out) - 440.0) / 440.0 <= 0.01


def test_stretch_half_rate_doubles_duration():
    clip = sine_clip(440.0, 1.0)
    out = time_stretch(clip, 0.5)
    assert len(out) == round(len(clip) / 0.5)


def test_stretch_preserves_tone():
    clip = sine_clip(440.0, 1.0)
    out = time_stretch(clip, 0.8)
    assert abs(len(out) - len(clip) / 0.8) <= 2048
    assert abs(fft_peak_hz(out) - 440.0) / 440.0 <= 0.01
    assert out.sample_rate_hz == clip.sample_rate_hz


def test_stretch_too_short():
    with pytest.raises(ClipTooShort):
        time_stretch(AudioClip(np.ones(1000), SR), 0.8)


# --- time shift ----------------------------------------------------------------

def test_shift_zero_is_identity(sine440):
    out = time_shift(sine440, 0.0, seeding.generator(1, "s"))
    assert np.array_equal(out.samples, sine440.samples)


def test_forced_shift_zero_fills():
    clip = sine_clip(440.0, 0.2)
    n = 300
    out = shift_samples(clip, n)
    assert len(out) == len(clip)
    assert np.all(out.samples[:n] == 0.0)
    assert np.array_equal(out.samples[n:], clip.samples[: len(clip) - n])
    back = shift_samples(clip, -n)
    assert np.all(back.samples[len(clip) - n:] == 0.0)
    assert np.array_equal(back.samples[: len(clip) - n], clip.samples[n:])


def test_shift_preserves_content_rms():
    clip = sine_clip(330.0, 0.3)
    n = 500
    out = shift_samples(clip, n)
    # slice-RMS oracle: non-vacated region is a bit-exact copy
    rms_out = np.sqrt(np.mean(out.samples[n:] ** 2))
    rms_in = np.sqrt(np.mean(clip.samples[: len(clip) - n] ** 2))
    assert rms_out == rms_in


def test_shift_exceeds_clip():
    clip = AudioClip(np.ones(100), SR)
    with pytest.raises(ShiftExceedsClip):
        time_shift(clip, 1000.0, seeding.generator(1, "s"))
    with pytest.raises(ShiftExceedsClip):
        shift_samples(clip, 100)


def test_shift_draw_within_bounds(sine440):
    max_ms = 20.0
    max_samples = round(max_ms * SR / 1000)
    for tag in ("a", "b", "c"):
        out = time_shift(sine440, max_ms, seeding.generator(3, tag))
        lead = np.flatnonzero(out.samples)
        assert len(out) == len(sine440)
        if lead.size:
            assert lead[0] <= max_samples


# --- pitch shift ----------------------------------------------------------------

def test_pitch_zero_semitones(sine440):
    out = pitch_shift(sine440, 0.0)
    assert len(out) == len(sine440)
    assert abs(fft_peak_hz(out) - 440.0) / 440.0 <= 0.01


def test_pitch_up_octave():
    clip = sine_clip(440.0, 1.0)
    out = pitch_shift(clip, 12.0)
    assert len(out) == len(clip)
    assert abs(fft_peak_hz(out) - 880.0) / 880.0 <= 0.03


def test_pitch_down_octave():
    clip = sine_clip(880.0, 1.0)
    out = pitch_shift(clip, -12.0)
    assert abs(fft_peak_hz(out) - 440.0) / 440.0 <= 0.03


def test_pitch_two_semitones():
    clip = sine_clip(440.0, 1.0)
    out = pitch_shift(clip, 2.0)
    target = 440.0 * 2 ** (2 / 12)
    assert abs(fft_peak_hz(out) - target) / target <= 0.03


# --- plans / batch -----------------------------------------------------------

def test_load_plan(tmp_path):
    cfg = tmp_path / "plan.cfg"
    cfg.write_text("# comment\nnoise_factor = 0.05\nstretch_rate=0.9\n"
                   "shift_max_ms = 50\npitch_semitones = -3\nseed = 11\n")
    plan = load_plan(cfg)
    assert plan == AugmentPlan(0.05, 0.9, 50.0, -3.0, 11)
    assert plan.copies_per_clip == 4


def test_load_plan_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "plan.cfg"
    cfg.write_text("noise_factor = 0.05\nbogus = 1\n")
    with pytest.raises(ValueError):
        load_plan(cfg)


def _make_entries(tmp_path, n=10):
    from depscreen.audio_io import write_wav
    entries = []
    for i in range(n):
        pid = f"p{i:03d}"
        clip = sine_clip(200.0 + 10 * i, 0.3)
        rel = f"{pid}_en_s01.wav"
        write_wav(clip, tmp_path / rel, "float32")
        entries.append(ManifestEntry(
            participant_id=pid, language="en", category="simple",
            sentence_id=1, audio_path=rel, phq9_total=3, gad7_total=2,
            pa_total=30, na_total=20, stai_total=40, label_band="none",
            split="train", augmented_from=None))
    return entries


def test_run_plan_counts_and_labels(tmp_path):
    entries = _make_entries(tmp_path)
    plan = AugmentPlan(seed=5)
    out = run_plan(entries, plan, tmp_path / "aug", tmp_path)
    assert len(out) == 40                      # 10 clips x 4 ops
    for e in out:
        assert e.augmented_from is not None
        assert e.label_band == "none"
        assert e.split == "train"
        clip = read_wav(tmp_path / "aug" / e.audio_path)
        assert clip.sample_rate_hz == SR


def test_run_plan_deterministic_and_order_independent(tmp_path):
    entries = _make_entries(tmp_path, 6)
    plan = AugmentPlan(seed=9)
    run_plan(entries, plan, tmp_path / "a1", tmp_path)
    run_plan(list(reversed(entries)), plan, tmp_path / "a2", tmp_path)
    names = sorted(os.listdir(tmp_path / "a1"))
    assert names == sorted(os.listdir(tmp_path / "a2"))
    for name in names:
        b1 = (tmp_path / "a1" / name).read_bytes()
        b2 = (tmp_path / "a2" / name).read_bytes()
        assert b1 == b2, name


def test_augment_clip_length_contracts(sine440):
    plan = AugmentPlan(seed=2)
    uid = "u1"
    for suffix, out in augment_clip(sine440, uid, plan):
        assert out.sample_rate_hz == sine440.sample_rate_hz
        if suffix.startswith(("noise", "shift", "pitch")):
            assert len(out) == len(sine440)
        else:
            assert abs(len(out) - len(sine440) / plan.stretch_rate) <= 2048
