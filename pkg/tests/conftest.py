import numpy as np
import pytest

from depscreen.audio_io import AudioClip


def sine_clip(freq_hz: float, duration_s: float = 1.0, sr: int = 22050,
              amplitude: float = 0.8) -> AudioClip:
    t = np.arange(int(round(duration_s * sr))) / sr
    return AudioClip(amplitude * np.sin(2.0 * np.pi * freq_hz * t), sr)


def fft_peak_hz(clip: AudioClip) -> float:
    spec = np.abs(np.fft.rfft(clip.samples))
    return float(np.argmax(spec) * clip.sample_rate_hz / len(clip.samples))


@pytest.fixture
def sine440():
    return sine_clip(440.0)
