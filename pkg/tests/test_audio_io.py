import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depscreen.audio_io import AudioClip, read_wav, resample, write_wav
from depscreen.errors import EmptyAudio, MalformedContainer, UnsupportedEncoding

from conftest import fft_peak_hz, sine_clip


def _raw_wav(payload: bytes, code: int, channels: int, rate: int, bits: int) -> bytes:
    fmt = struct.pack("<HHIIHH", code, channels, rate,
                      rate * channels * bits // 8, channels * bits // 8, bits)
    body = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body


def test_zero_pcm16_frames(tmp_path):
    path = tmp_path / "zeros.wav"
    path.write_bytes(_raw_wav(b"\x00\x00" * 1000, 1, 1, 22050, 16))
    clip = read_wav(path)
    assert len(clip) == 1000
    assert np.all(clip.samples == 0.0)
    assert clip.sample_rate_hz == 22050


def test_stereo_mean_cancels(tmp_path):
    # channels carry +0.5 / -0.5 everywhere; 0.5 is exact in pcm16
    frame = struct.pack("<hh", 16384, -16384)
    path = tmp_path / "stereo.wav"
    path.write_bytes(_raw_wav(frame * 200, 1, 2, 8000, 16))
    clip = read_wav(path)
    assert np.all(clip.samples == 0.0)


def test_mono_mixdown_is_linear(tmp_path):
    rng = np.random.default_rng(0)
    a = rng.uniform(-1, 1, 500)
    b = rng.uniform(-1, 1, 500)
    pa, pb, pab = (tmp_path / n for n in ("a.wav", "b.wav", "ab.wav"))
    write_wav(AudioClip(a, 8000), pa, "float32")
    write_wav(AudioClip(b, 8000), pb, "float32")
    inter = np.empty(1000, dtype=np.float32)
    inter[0::2] = a.astype(np.float32)
    inter[1::2] = b.astype(np.float32)
    pab.write_bytes(_raw_wav(inter.tobytes(), 3, 2, 8000, 32))
    mixed = read_wav(pab).samples
    expected = (read_wav(pa).samples + read_wav(pb).samples) / 2.0
    assert np.allclose(mixed, expected, atol=0)


def test_float32_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    clip = AudioClip(rng.uniform(-1, 1, 3000), 22050)
    path = tmp_path / "f32.wav"
    write_wav(clip, path, "float32")
    back = read_wav(path)
    assert np.array_equal(back.samples,
                          clip.samples.astype(np.float32).astype(np.float64))


def test_pcm16_quantization_bound(tmp_path):
    clip = AudioClip(np.full(100, 0.25), 22050)
    path = tmp_path / "q.wav"
    write_wav(clip, path, "pcm16")
    back = read_wav(path)
    assert np.max(np.abs(back.samples - clip.samples)) <= 1.0 / 32768


def test_pcm16_full_scale_clips_to_max_code(tmp_path):
    clip = AudioClip(np.array([1.0, -1.0, 0.999999]), 8000)
    path = tmp_path / "fs.wav"
    write_wav(clip, path, "pcm16")
    with wave.open(str(path), "rb") as w:
        raw = np.frombuffer(w.readframes(w.getnframes()), dtype="<i2")
    assert raw[0] == 32767  # no wraparound
    assert raw[1] == -32768
    assert read_wav(path).samples[0] == 32767 / 32768


def test_reread_is_idempotent(tmp_path):
    rng = np.random.default_rng(2)
    clip = AudioClip(rng.uniform(-1, 1, 777), 16000)
    p1, p2 = tmp_path / "a.wav", tmp_path / "b.wav"
    write_wav(clip, p1, "pcm16")
    first = read_wav(p1)
    write_wav(first, p2, "pcm16")
    assert np.array_equal(read_wav(p2).samples, first.samples)


def test_wav_readable_by_stdlib(tmp_path):
    # independent container check: python's wave module parses our output
    clip = sine_clip(440.0, 0.1)
    path = tmp_path / "std.wav"
    write_wav(clip, path, "pcm16")
    with wave.open(str(path), "rb") as w:
        assert w.getnchannels() == 1
        assert w.getsampwidth() == 2
        assert w.getframerate() == 22050
        assert w.getnframes() == len(clip)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False),
                min_size=1, max_size=400),
       st.sampled_from(["pcm16", "float32"]))
def test_roundtrip_property(tmp_path_factory, samples, encoding):
    clip = AudioClip(np.array(samples), 8000)
    path = tmp_path_factory.mktemp("rt") / "x.wav"
    write_wav(clip, path, encoding)
    back = read_wav(path)
    assert len(back) == len(clip)
    if encoding == "float32":
        assert np.array_equal(
            back.samples, clip.samples.astype(np.float32).astype(np.float64))
    else:
        assert np.max(np.abs(back.samples - clip.samples)) <= 1.0 / 32768


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"JUNKdata")
    with pytest.raises(MalformedContainer):
        read_wav(path)


def test_truncated_chunk(tmp_path):
    good = _raw_wav(b"\x00\x00" * 10, 1, 1, 8000, 16)
    path = tmp_path / "trunc.wav"
    path.write_bytes(good[:-7])
    with pytest.raises(MalformedContainer):
        read_wav(path)


def test_unsupported_format_code(tmp_path):
    path = tmp_path / "adpcm.wav"
    path.write_bytes(_raw_wav(b"\x00\x00" * 10, 2, 1, 8000, 16))
    with pytest.raises(UnsupportedEncoding):
        read_wav(path)


def test_unsupported_bit_depth(tmp_path):
    path = tmp_path / "b24.wav"
    path.write_bytes(_raw_wav(b"\x00" * 30, 1, 1, 8000, 24))
    with pytest.raises(UnsupportedEncoding):
        read_wav(path)


def test_empty_audio(tmp_path):
    path = tmp_path / "empty.wav"
    path.write_bytes(_raw_wav(b"", 1, 1, 8000, 16))
    with pytest.raises(EmptyAudio):
        read_wav(path)


def test_resample_identity():
    clip = sine_clip(440.0, 0.25)
    out = resample(clip, clip.sample_rate_hz)
    assert np.array_equal(out.samples, clip.samples)


def test_resample_length_ratio():
    clip = AudioClip(np.zeros(22050), 22050)
    out = resample(clip, 44100)
    assert abs(len(out) - 44100) <= 1
    assert out.sample_rate_hz == 44100


def test_resample_preserves_tone():
    # oracle: FFT peak of a generated sine survives 22050 -> 16000
    clip = sine_clip(440.0, 1.0)
    out = resample(clip, 16000)
    bin_width = 16000 / len(out)
    assert abs(fft_peak_hz(out) - 440.0) <= bin_width


def test_resample_roundtrip_rms():
    sr = 22050
    for freq in (440.0, 2000.0, 5000.0):  # below target_rate / 4
        clip = sine_clip(freq, 1.0, sr)
        up = resample(clip, 2 * sr)
        back = resample(up, sr)
        n = min(len(back), len(clip))
        err = back.samples[:n] - clip.samples[:n]
        assert np.sqrt(np.mean(err ** 2)) <= 1e-3


def test_resample_linear_mode():
    clip = sine_clip(100.0, 0.5)
    out = resample(clip, 11025, method="linear")
    assert abs(len(out) - round(len(clip) / 2)) <= 1
    assert abs(fft_peak_hz(out) - 100.0) <= 11025 / len(out)
