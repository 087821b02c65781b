"""Frame-based acoustic features and the 178-dim concatenation.

Five feature families are computed on one shared framing (2048-sample Hann
frames, hop 512, centered with reflect padding) and concatenated per frame:

    [ zcr(1) | chroma(12) | mfcc(36) | energy(1) | mel(128) ]  ->  178 columns

A feature matrix is reduced to a fixed-length vector by per-column time
averaging, which is what the classifier consumes.  The on-disk container
("PSDF") stores one float32 matrix per utterance; a CSV export of vectors
is provided for interop.
"""

import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.fft import dct

from .audio_io import AudioClip
from .errors import ClipTooShort, ConfigMismatch, EmptyMatrix

N_FEATURES = 178
LOG_FLOOR = 1e-10

# Column layout of the concatenated matrix.
ZCR_COL = 0
CHROMA_COLS = slice(1, 13)
MFCC_COLS = slice(13, 49)
ENERGY_COL = 49
MEL_COLS = slice(50, 178)

# Bins below this frequency carry no pitch-class information.
CHROMA_FMIN_HZ = 27.5


@dataclass(frozen=True)
class FrameConfig:
    frame_length: int = 2048
    hop_length: int = 512
    window: str = "hann"
    fft_size: int | None = None
    center: bool = True

    def __post_init__(self):
        if not 0 < self.hop_length <= self.frame_length:
            raise ValueError("need 0 < hop_length <= frame_length")
        if self.window != "hann":
            raise ValueError(f"unsupported window {self.window!r}")
        if self.fft_size is not None and self.fft_size < self.frame_length:
            raise ValueError("fft_size must be >= frame_length")

    @property
    def n_fft(self) -> int:
        return self.fft_size if self.fft_size is not None else self.frame_length

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if self.center:
            return 1 + n_samples // self.hop_length
        if n_samples < self.frame_length:
            raise ClipTooShort(
                f"{n_samples} samples < frame of {self.frame_length}")
        return 1 + (n_samples - self.frame_length) // self.hop_length


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = 128
    fmin: float = 0.0
    fmax: float | None = None   # defaults to sample_rate / 2

    def resolve_fmax(self, sample_rate: int) -> float:
        return self.fmax if self.fmax is not None else sample_rate / 2.0


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_signal(samples: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Slice a signal into overlapping frames, one frame per row.

    With centering, the signal is reflect-padded by half a frame on each
    side so frame t is centered on sample t * hop.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ClipTooShort("empty signal")
    n_frames = cfg.n_frames(len(x))
    if cfg.center:
        pad = cfg.frame_length // 2
        mode = "reflect" if len(x) > 1 else "edge"
        x = np.pad(x, pad, mode=mode)
    starts = np.arange(n_frames) * cfg.hop_length
    view = np.lib.stride_tricks.sliding_window_view(x, cfg.frame_length)
    return view[starts]


def stft_complex(samples: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Complex STFT, frames x (n_fft/2 + 1), Hann-windowed."""
    frames = frame_signal(samples, cfg) * hann_window(cfg.frame_length)
    return np.fft.rfft(frames, n=cfg.n_fft, axis=1)


def stft_power(clip: AudioClip, cfg: FrameConfig = FrameConfig()) -> np.ndarray:
    """Power spectrogram |STFT|^2, frames x (n_fft/2 + 1)."""
    spec = stft_complex(clip.samples, cfg)
    return (spec.real ** 2 + spec.imag ** 2)


def zero_crossing_rate(clip: AudioClip, cfg: FrameConfig = FrameConfig()) -> np.ndarray:
    """Per frame, the fraction of adjacent sample pairs with differing sign.

    Zero counts as positive, so silence has rate 0.
    """
    frames = frame_signal(clip.samples, cfg)
    pos = frames >= 0.0
    crossings = pos[:, 1:] != pos[:, :-1]
    return crossings.mean(axis=1)


def short_time_energy(clip: AudioClip, cfg: FrameConfig = FrameConfig()) -> np.ndarray:
    """Per-frame RMS amplitude of the raw (unwindowed) frame."""
    frames = frame_signal(clip.samples, cfg)
    return np.sqrt(np.mean(frames ** 2, axis=1))


def _hz_to_mel(f):
    """Slaney mel scale: linear below 1 kHz, log above."""
    f = np.asarray(f, dtype=np.float64)
    f_sp = 200.0 / 3.0
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    mel = f / f_sp
    log_region = f >= min_log_hz
    mel = np.where(log_region,
                   min_log_mel + np.log(np.maximum(f, min_log_hz) / min_log_hz) / logstep,
                   mel)
    return mel


def _mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    f_sp = 200.0 / 3.0
    min_log_mel = 15.0
    logstep = np.log(6.4) / 27.0
    hz = f_sp * m
    log_region = m >= min_log_mel
    hz = np.where(log_region, 1000.0 * np.exp(logstep * (m - min_log_mel)), hz)
    return hz


@lru_cache(maxsize=8)
def mel_filterbank(sample_rate: int, n_fft: int,
                   cfg: MelConfig = MelConfig()) -> np.ndarray:
    """Triangular mel filterbank, n_mels x (n_fft/2 + 1).

    Filters are spaced on the Slaney mel scale and area-normalized so each
    triangle integrates to roughly constant energy per band.  Cached per
    (rate, fft size, config); treat the result as read-only.
    """
    fmax = cfg.resolve_fmax(sample_rate)
    fft_freqs = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    mel_pts = _mel_to_hz(np.linspace(_hz_to_mel(cfg.fmin), _hz_to_mel(fmax),
                                     cfg.n_mels + 2))
    fdiff = np.diff(mel_pts)
    ramps = mel_pts[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / fdiff[:-1, None]
    upper = ramps[2:] / fdiff[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    enorm = 2.0 / (mel_pts[2:] - mel_pts[:-2])
    return weights * enorm[:, None]


def mel_spectrogram(power: np.ndarray, sample_rate: int,
                    cfg: MelConfig = MelConfig(),
                    n_fft: int | None = None) -> np.ndarray:
    """Project a power spectrogram onto the mel filterbank (frames x n_mels)."""
    power = np.asarray(power, dtype=np.float64)
    inferred_fft = 2 * (power.shape[1] - 1)
    if n_fft is not None and n_fft != inferred_fft:
        raise ConfigMismatch(
            f"power matrix has {power.shape[1]} bins, fft_size {n_fft} expects "
            f"{n_fft // 2 + 1}")
    fb = mel_filterbank(sample_rate, inferred_fft, cfg)
    return power @ fb.T


def mfcc(power: np.ndarray, sample_rate: int, cfg: MelConfig = MelConfig(),
         n_mfcc: int = 36) -> np.ndarray:
    """First n_mfcc orthonormal DCT-II coefficients of the log mel spectrum."""
    mel = mel_spectrogram(power, sample_rate, cfg)
    return dct(np.log(mel + LOG_FLOOR), type=2, norm="ortho", axis=1)[:, :n_mfcc]


def chroma(power: np.ndarray, sample_rate: int,
           fmin: float = CHROMA_FMIN_HZ) -> np.ndarray:
    """Fold spectral power onto 12 pitch classes (A440 tuning), frames x 12.

    Class 0 is A.  Each frame is normalized by its maximum; all-zero frames
    stay zero, so values lie in [0, 1].
    """
    power = np.asarray(power, dtype=np.float64)
    n_bins = power.shape[1]
    n_fft = 2 * (n_bins - 1)
    freqs = np.arange(n_bins) * sample_rate / n_fft
    valid = freqs >= fmin
    classes = np.zeros(n_bins, dtype=np.int64)
    classes[valid] = np.round(12.0 * np.log2(freqs[valid] / 440.0)).astype(np.int64) % 12

    out = np.zeros((power.shape[0], 12))
    for pc in range(12):
        mask = valid & (classes == pc)
        if mask.any():
            out[:, pc] = power[:, mask].sum(axis=1)
    peak = out.max(axis=1, keepdims=True)
    nonzero = peak[:, 0] > 0
    out[nonzero] /= peak[nonzero]
    return out


@dataclass
class FeatureMatrix:
    """Frames x 178 matrix in the fixed [zcr|chroma|mfcc|energy|mel] layout."""

    data: np.ndarray
    frame_config: FrameConfig = field(default_factory=FrameConfig)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[1] != N_FEATURES:
            raise ConfigMismatch(
                f"feature matrix must be frames x {N_FEATURES}, got {self.data.shape}")

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]


def extract_178(clip: AudioClip, cfg: FrameConfig = FrameConfig(),
                mel_cfg: MelConfig = MelConfig()) -> FeatureMatrix:
    """Compute all five feature families on shared framing and concatenate."""
    power = stft_power(clip, cfg)
    sr = clip.sample_rate_hz
    cols = [
        zero_crossing_rate(clip, cfg)[:, None],
        chroma(power, sr),
        mfcc(power, sr, mel_cfg),
        short_time_energy(clip, cfg)[:, None],
        mel_spectrogram(power, sr, mel_cfg),
    ]
    frame_counts = {c.shape[0] for c in cols}
    assert len(frame_counts) == 1, f"feature families disagree on frames: {frame_counts}"
    return FeatureMatrix(np.hstack(cols), frame_config=cfg)


def aggregate(fm: FeatureMatrix) -> np.ndarray:
    """Per-column time mean: the fixed-length vector fed to the classifier."""
    if fm.n_frames == 0:
        raise EmptyMatrix("cannot aggregate a matrix with zero frames")
    return fm.data.mean(axis=0)


# --- feature container (PSDF) -------------------------------------------

_MAGIC = b"PSDF"
_VERSION = 1


def write_features(path, records) -> None:
    """Write (utterance_id, matrix) records; vectors are stored as 1 x 178."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<H", _VERSION))
        for uid, arr in records:
            arr = np.atleast_2d(np.asarray(arr, dtype=np.float32))
            uid_b = uid.encode("utf-8")
            f.write(struct.pack("<H", len(uid_b)))
            f.write(uid_b)
            f.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            f.write(arr.astype("<f4").tobytes())


def read_features(path) -> list[tuple[str, np.ndarray]]:
    """Read back all records in file order."""
    records = []
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _MAGIC:
            raise ConfigMismatch(f"{path}: bad feature container magic {magic!r}")
        (version,) = struct.unpack("<H", f.read(2))
        if version != _VERSION:
            raise ConfigMismatch(f"{path}: unsupported container version {version}")
        while True:
            head = f.read(2)
            if not head:
                break
            (uid_len,) = struct.unpack("<H", head)
            uid = f.read(uid_len).decode("utf-8")
            rows, cols = struct.unpack("<II", f.read(8))
            payload = f.read(rows * cols * 4)
            if len(payload) != rows * cols * 4:
                raise ConfigMismatch(f"{path}: truncated record for {uid!r}")
            arr = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
            records.append((uid, arr.astype(np.float64)))
    return records


def export_features_csv(path, records) -> None:
    """Plain-text export: utterance_id, f000..f177 (one vector per row)."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("utterance_id," + ",".join(f"f{i:03d}" for i in range(N_FEATURES)) + "\n")
        for uid, arr in records:
            vec = np.asarray(arr, dtype=np.float64)
            if vec.ndim == 2:
                if vec.shape[0] != 1:
                    raise ConfigMismatch(
                        f"CSV export needs vectors, {uid!r} has {vec.shape[0]} rows")
                vec = vec[0]
            f.write(uid + "," + ",".join(repr(float(v)) for v in vec) + "\n")
