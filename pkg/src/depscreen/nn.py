"""From-scratch 1D CNN: forward pass, backprop, SGD training, serialization.

The fixed stack is four same-padded conv blocks (256/256/128/64 filters,
kernel 5, each followed by ReLU and max-pool 5 stride 2, with 20% dropout
before the last block), then flatten -> dense 32 -> ReLU -> 30% dropout ->
dense K -> softmax.  On a 178-long input the lengths evolve
178 -> 87 -> 42 -> 19 -> 8, so the flatten width is 8 * 64 = 512.

All math is float64.  Dropout uses inverted scaling so inference needs no
rescaling.  Training is deterministic for a fixed seed.
"""

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from . import seeding
from .errors import (CorruptFile, EmptyDataset, InputTooShort, LabelOutOfRange,
                     ShapeMismatch, VersionMismatch)

POOL_SIZE = 5
POOL_STRIDE = 2


def pooled_length(n: int) -> int:
    if n < POOL_SIZE:
        raise InputTooShort(f"length {n} < pool size {POOL_SIZE}")
    return (n - POOL_SIZE) // POOL_STRIDE + 1


def _scratch(cache: dict, name: str, shape, dtype=np.float64) -> np.ndarray:
    """Reusable work buffer; reallocated only when the shape changes.

    Fresh numpy allocations of tens of MB pay a page-zeroing cost every
    batch, which dominated the training step before buffers were reused.
    """
    arr = cache.get(name)
    if arr is None or arr.shape != tuple(shape) or arr.dtype != dtype:
        arr = np.empty(shape, dtype=dtype)
        cache[name] = arr
    return arr


def _shift_windows(x: np.ndarray, k: int, cache: dict, tag: str) -> np.ndarray:
    """Stack k shifted copies of a zero-padded (B, L, C) tensor.

    Returns (B, L, k*C) where block j holds x displaced by j - k//2, i.e.
    out[b, t, j*C + c] = x[b, t + j - k//2, c] with zeros out of range.
    Built from contiguous slice copies into a reused buffer, which is much
    faster than reshaping a strided sliding-window view.
    """
    b, length, c = x.shape
    pad = k // 2
    xp = _scratch(cache, tag + "_pad", (b, length + 2 * pad, c))
    xp[:, :pad] = 0.0
    xp[:, pad + length:] = 0.0
    xp[:, pad: pad + length] = x
    flat = _scratch(cache, tag + "_flat", (b, length, k * c))
    for j in range(k):
        flat[:, :, j * c: (j + 1) * c] = xp[:, j: j + length, :]
    return flat


class Conv1D:
    """Same-padded cross-correlation along the time axis."""

    def __init__(self, in_channels: int, filters: int, kernel: int,
                 rng: np.random.Generator):
        if kernel % 2 == 0:
            raise ShapeMismatch("kernel size must be odd for same padding")
        # fan-average scaling keeps activations level through the pool
        # stages; pure fan-in scaling saturates the softmax at init
        limit = np.sqrt(6.0 / (in_channels * kernel + filters * kernel))
        self.w = rng.uniform(-limit, limit, size=(filters, in_channels, kernel))
        self.b = np.zeros(filters)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._buf = {}

    @property
    def params(self):
        return [self.w, self.b]

    @property
    def grads(self):
        return [self.gw, self.gb]

    def forward(self, x, train=False, rng=None):
        filters, cin, k = self.w.shape
        if x.ndim != 3 or x.shape[2] != cin:
            raise ShapeMismatch(f"conv input {x.shape}, expected (*, *, {cin})")
        b, length, _ = x.shape
        flat = _shift_windows(x, k, self._buf, "x")
        # weight layout to match the (tap, channel) window blocks
        w2 = self.w.transpose(2, 1, 0).reshape(k * cin, filters)
        out = _scratch(self._buf, "out", (b, length, filters))
        np.matmul(flat.reshape(b * length, k * cin), w2,
                  out=out.reshape(b * length, filters))
        out += self.b
        return out

    def backward(self, g):
        filters, cin, k = self.w.shape
        flat = self._buf["x_flat"]
        b, length, ck = flat.shape
        gw2 = flat.reshape(b * length, ck).T @ g.reshape(b * length, filters)
        self.gw = np.ascontiguousarray(gw2.reshape(k, cin, filters).transpose(2, 1, 0))
        self.gb = g.sum(axis=(0, 1))
        # dx: correlate the output gradient with the tap-reversed kernel
        gwin = _shift_windows(g, k, self._buf, "g")
        w3 = self.w[:, :, ::-1].transpose(2, 0, 1).reshape(k * filters, cin)
        dx = _scratch(self._buf, "dx", (b, length, cin))
        np.matmul(gwin.reshape(b * length, k * filters), w3,
                  out=dx.reshape(b * length, cin))
        return dx


class ReLU:
    params = ()
    grads = ()

    def __init__(self):
        self._buf = {}

    def forward(self, x, train=False, rng=None):
        mask = _scratch(self._buf, "mask", x.shape, dtype=bool)
        np.greater(x, 0.0, out=mask)
        self._mask = mask
        out = _scratch(self._buf, "out", x.shape)
        return np.multiply(x, mask, out=out)

    def backward(self, g):
        gout = _scratch(self._buf, "gout", g.shape)
        return np.multiply(g, self._mask, out=gout)


class MaxPool1D:
    """Pool 5, stride 2; argmax offsets (lowest on ties) kept for backprop."""

    params = ()
    grads = ()

    def __init__(self):
        self._buf = {}

    def forward(self, x, train=False, rng=None):
        if x.shape[1] < POOL_SIZE:
            raise InputTooShort(f"length {x.shape[1]} < pool size {POOL_SIZE}")
        n_out = pooled_length(x.shape[1])
        out_shape = (x.shape[0], n_out, x.shape[2])
        out = _scratch(self._buf, "out", out_shape)
        arg = _scratch(self._buf, "arg", out_shape, dtype=np.int8)
        better = _scratch(self._buf, "better", out_shape, dtype=bool)
        # running elementwise max over the window offsets; a strict > keeps
        # the lowest offset on ties
        out[...] = x[:, 0:: POOL_STRIDE, :][:, :n_out]
        arg.fill(0)
        for j in range(1, POOL_SIZE):
            sj = x[:, j:: POOL_STRIDE, :][:, :n_out]
            np.greater(sj, out, out=better)
            np.copyto(out, sj, where=better)
            np.copyto(arg, np.int8(j), where=better)
        self._arg = arg
        self._in_shape = x.shape
        return out

    def backward(self, g):
        n_out = g.shape[1]
        dx = _scratch(self._buf, "dx", self._in_shape)
        dx.fill(0.0)
        eq = self._buf["better"]
        routed = _scratch(self._buf, "routed", g.shape)
        # for a fixed offset j the map t -> 2t + j is injective, so each
        # slice assignment accumulates without collisions
        for j in range(POOL_SIZE):
            np.equal(self._arg, j, out=eq)
            np.multiply(g, eq, out=routed)
            dx[:, j:: POOL_STRIDE, :][:, :n_out] += routed
        return dx


class Dropout:
    """Inverted dropout: kept units scaled by 1/(1-p); identity at inference."""

    params = ()
    grads = ()

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.p = p
        self._mask = None

    def forward(self, x, train=False, rng=None):
        if not train or self.p == 0.0:
            self._mask = None
            return x
        self._mask = (rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * self._mask

    def backward(self, g):
        if self._mask is None:
            return g
        return g * self._mask


class Flatten:
    params = ()
    grads = ()

    def forward(self, x, train=False, rng=None):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, g):
        return g.reshape(self._in_shape)


class Dense:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        self.w = rng.uniform(-limit, limit, size=(in_dim, out_dim))
        self.b = np.zeros(out_dim)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)

    @property
    def params(self):
        return [self.w, self.b]

    @property
    def grads(self):
        return [self.gw, self.gb]

    def forward(self, x, train=False, rng=None):
        if x.ndim != 2 or x.shape[1] != self.w.shape[0]:
            raise ShapeMismatch(f"dense input {x.shape}, expected (*, {self.w.shape[0]})")
        self._x = x
        return x @ self.w + self.b

    def backward(self, g):
        self.gw = self._x.T @ g
        self.gb = g.sum(axis=0)
        return g @ self.w.T


@dataclass(frozen=True)
class ModelSpec:
    input_len: int = 178
    n_classes: int = 4
    conv_filters: tuple = (256, 256, 128, 64)
    kernel: int = 5
    dense_hidden: int = 32
    conv_dropout: float = 0.20
    dense_dropout: float = 0.30

    def shape_chain(self) -> list[int]:
        """Sequence length after the input and after each pooling stage."""
        chain = [self.input_len]
        n = self.input_len
        for _ in self.conv_filters:
            n = pooled_length(n)
            chain.append(n)
        return chain

    @property
    def flatten_size(self) -> int:
        return self.shape_chain()[-1] * self.conv_filters[-1]

    def to_json(self) -> str:
        return json.dumps({
            "input_len": self.input_len,
            "n_classes": self.n_classes,
            "conv_filters": list(self.conv_filters),
            "kernel": self.kernel,
            "dense_hidden": self.dense_hidden,
            "conv_dropout": self.conv_dropout,
            "dense_dropout": self.dense_dropout,
        }, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        d = json.loads(text)
        d["conv_filters"] = tuple(d["conv_filters"])
        return cls(**d)


class Model:
    """The fixed conv stack plus dense head; owns the dropout generator."""

    def __init__(self, spec: ModelSpec = ModelSpec(), seed: int = 0):
        self.spec = spec
        chain = spec.shape_chain()
        if spec.input_len == 178:
            if chain != [178, 87, 42, 19, 8] or spec.flatten_size != 512:
                raise ShapeMismatch(
                    f"shape chain {chain} / flatten {spec.flatten_size} does not "
                    "match the documented 178->87->42->19->8, flatten 512")
        self.dropout_rng = seeding.generator(seed, "dropout")

        def lrng(i):
            return seeding.generator(seed, "init", str(i))

        f1, f2, f3, f4 = spec.conv_filters
        k = spec.kernel
        self.layers = [
            Conv1D(1, f1, k, lrng(0)), ReLU(), MaxPool1D(),
            Conv1D(f1, f2, k, lrng(1)), ReLU(), MaxPool1D(),
            Conv1D(f2, f3, k, lrng(2)), ReLU(), MaxPool1D(),
            Dropout(spec.conv_dropout),
            Conv1D(f3, f4, k, lrng(3)), ReLU(), MaxPool1D(),
            Flatten(),
            Dense(spec.flatten_size, spec.dense_hidden, lrng(4)), ReLU(),
            Dropout(spec.dense_dropout),
            Dense(spec.dense_hidden, spec.n_classes, lrng(5)),
        ]

    def parameters(self):
        return [p for layer in self.layers for p in layer.params]

    def gradients(self):
        return [g for layer in self.layers for g in layer.grads]

    def forward_logits(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.spec.input_len:
            raise ShapeMismatch(
                f"input {x.shape}, expected (*, {self.spec.input_len})")
        out = x[:, :, None]
        for layer in self.layers:
            out = layer.forward(out, train=train, rng=self.dropout_rng)
        return out[0] if squeeze else out

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """Class probabilities (softmax of the logits)."""
        return softmax(self.forward_logits(x, train=train))

    def backward(self, dlogits: np.ndarray) -> None:
        g = dlogits
        for layer in reversed(self.layers):
            g = layer.backward(g)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))

def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean categorical cross-entropy from raw logits."""
    ls = log_softmax(np.atleast_2d(logits))
    return float(-ls[np.arange(len(ls)), np.asarray(labels, dtype=np.int64)].mean())


def loss_and_backward(model: Model, x: np.ndarray, labels: np.ndarray,
                      train: bool = False) -> float:
    """One forward/backward pass; leaves gradients on the layers."""
    logits = model.forward_logits(x, train=train)
    logits = np.atleast_2d(logits)
    labels = np.asarray(labels, dtype=np.int64)
    loss = cross_entropy(logits, labels)
    probs = softmax(logits)
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(labels)), labels] = 1.0
    model.backward((probs - onehot) / len(labels))
    return loss


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    epochs: int = 50
    learning_rate: float = 1e-3
    momentum: float = 0.9
    plateau_patience: int = 5
    plateau_factor: float = 0.4
    min_lr: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ValueError("plateau_factor must be in (0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def _infer_metrics(model: Model, x, y, batch: int) -> tuple[float, float]:
    losses = 0.0
    correct = 0
    for s in range(0, len(x), batch):
        xb, yb = x[s: s + batch], y[s: s + batch]
        logits = model.forward_logits(xb, train=False)
        losses += cross_entropy(logits, yb) * len(xb)
        correct += int((logits.argmax(axis=1) == yb).sum())
    return losses / len(x), correct / len(x)


def train(model: Model, train_xy, cfg: TrainConfig, val_xy=None) -> list[dict]:
    """Mini-batch SGD with momentum and reduce-on-plateau.

    `train_xy` and `val_xy` are (X, labels) pairs.  The schedule monitors
    validation loss (training loss if no validation set): after `patience`
    consecutive epochs without strict improvement the learning rate is
    multiplied by `factor`, floored at `min_lr`.  Returns the per-epoch
    history; the model is updated in place.
    """
    x, y = train_xy
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(x) == 0:
        raise EmptyDataset("training set is empty")
    if y.min() < 0 or y.max() >= model.spec.n_classes:
        raise LabelOutOfRange(
            f"labels span {y.min()}..{y.max()}, model has {model.spec.n_classes} classes")
    if val_xy is not None:
        xv = np.asarray(val_xy[0], dtype=np.float64)
        yv = np.asarray(val_xy[1], dtype=np.int64)

    shuffle_rng = seeding.generator(cfg.seed, "shuffle")
    model.dropout_rng = seeding.generator(cfg.seed, "dropout")
    params = model.parameters()
    velocity = [np.zeros_like(p) for p in params]

    lr = cfg.learning_rate
    best = np.inf
    wait = 0
    history = []
    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle_rng.permutation(len(x))
        loss_sum = 0.0
        correct = 0
        for s in range(0, len(x), cfg.batch_size):
            idx = perm[s: s + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            logits = model.forward_logits(xb, train=True)
            loss = cross_entropy(logits, yb)
            probs = softmax(logits)
            onehot = np.zeros_like(probs)
            onehot[np.arange(len(yb)), yb] = 1.0
            model.backward((probs - onehot) / len(yb))
            for p, g, v in zip(params, model.gradients(), velocity):
                v *= cfg.momentum
                v -= lr * g
                p += v
            loss_sum += loss * len(yb)
            correct += int((logits.argmax(axis=1) == yb).sum())

        record = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": loss_sum / len(x),
            "train_acc": correct / len(x),
        }
        if val_xy is not None:
            record["val_loss"], record["val_acc"] = _infer_metrics(
                model, xv, yv, cfg.batch_size)
            monitored = record["val_loss"]
        else:
            record["val_loss"] = record["val_acc"] = None
            monitored = record["train_loss"]
        history.append(record)

        if monitored < best:
            best = monitored
            wait = 0
        else:
            wait += 1
            if wait >= cfg.plateau_patience:
                lr = max(lr * cfg.plateau_factor, cfg.min_lr)
                wait = 0
    return history


def write_history(path, history) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("epoch,lr,train_loss,train_acc,val_loss,val_acc\n")
        for rec in history:
            vals = [str(rec["epoch"]), repr(rec["lr"]),
                    repr(rec["train_loss"]), repr(rec["train_acc"]),
                    "" if rec["val_loss"] is None else repr(rec["val_loss"]),
                    "" if rec["val_acc"] is None else repr(rec["val_acc"])]
            f.write(",".join(vals) + "\n")


# --- serialization ---------------------------------------------------------

_MAGIC = b"PSNN"
_VERSION = 1


def save_model(model: Model, path) -> None:
    """Magic, version, architecture + hash, then float64 LE parameter blobs."""
    arch = model.spec.to_json().encode("utf-8")
    blob = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes()
                    for p in model.parameters())
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<H", _VERSION))
        f.write(struct.pack("<I", len(arch)))
        f.write(arch)
        f.write(hashlib.sha256(arch).digest())
        f.write(blob)
        f.write(hashlib.sha256(blob).digest())


def load_model(path, expect_classes: int | None = None) -> Model:
    with open(path, "rb") as f:
        raw = f.read()

    def take(n, what):
        nonlocal raw
        if len(raw) < n:
            raise CorruptFile(f"{path}: truncated while reading {what}")
        out, raw = raw[:n], raw[n:]
        return out

    if take(4, "magic") != _MAGIC:
        raise CorruptFile(f"{path}: bad magic")
    (version,) = struct.unpack("<H", take(2, "version"))
    if version != _VERSION:
        raise VersionMismatch(f"{path}: file version {version}, expected {_VERSION}")
    (arch_len,) = struct.unpack("<I", take(4, "arch length"))
    arch = take(arch_len, "architecture")
    if take(32, "arch hash") != hashlib.sha256(arch).digest():
        raise CorruptFile(f"{path}: architecture hash mismatch")
    spec = ModelSpec.from_json(arch.decode("utf-8"))
    if expect_classes is not None and spec.n_classes != expect_classes:
        raise VersionMismatch(
            f"{path}: model has {spec.n_classes} classes, caller expects "
            f"{expect_classes}")

    model = Model(spec, seed=0)
    blob_len = sum(p.size * 8 for p in model.parameters())
    blob = take(blob_len, "parameters")
    if take(32, "parameter hash") != hashlib.sha256(blob).digest():
        raise CorruptFile(f"{path}: parameter hash mismatch")
    offset = 0
    for p in model.parameters():
        n = p.size * 8
        p[...] = np.frombuffer(blob[offset: offset + n], dtype="<f8").reshape(p.shape)
        offset += n
    return model
