"""Whisper/normal discriminator: model, training loop, and serialization.

The head is layer normalization over the feature dimension, mean pooling
over time, then two fully connected layers (ReLU between) onto two logits
(normal, whisper). With the 512-channel conv front-end the head holds
264,706 parameters. Training is plain backpropagation with Adam; all math
is numpy float64, authored here rather than delegated to a framework so
gradients can be finite-difference checked.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .audio_io import AudioSegment, LabelKind, SegmentLabel
from .features import (
    ConvStackSpec,
    ConvStackWeights,
    conv_backward,
    conv_forward,
    init_conv_weights,
    mfcc_batch,
)

LN_EPS = 1e-8  # small enough that normalized variance deviates < 1e-6
MFCC_DIM = 13
MFCC_HIDDEN = 64
CONV_HIDDEN = 512

MODEL_MAGIC = b"DVMD"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """Model file is malformed; the message names the offending field."""


class UnsupportedVersionError(ModelFormatError):
    pass


class ConfigurationError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class Frontend(IntEnum):
    MFCC = 0
    CONV = 1


@dataclass
class ClassifierModel:
    frontend: Frontend
    ln_gamma: np.ndarray
    ln_beta: np.ndarray
    fc1_w: np.ndarray  # (dim, hidden)
    fc1_b: np.ndarray
    fc2_w: np.ndarray  # (hidden, 2)
    fc2_b: np.ndarray
    conv_spec: ConvStackSpec | None = None
    conv: ConvStackWeights | None = None

    @property
    def feature_dim(self) -> int:
        return self.fc1_w.shape[0]

    @property
    def hidden(self) -> int:
        return self.fc1_w.shape[1]

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        """All trainable arrays in the documented serialization order."""
        items = [
            ("ln_gamma", self.ln_gamma),
            ("ln_beta", self.ln_beta),
            ("fc1_w", self.fc1_w),
            ("fc1_b", self.fc1_b),
            ("fc2_w", self.fc2_w),
            ("fc2_b", self.fc2_b),
        ]
        if self.frontend == Frontend.CONV:
            for i, (w, b) in enumerate(self.conv.layers):
                items.append((f"conv{i}_w", w))
                items.append((f"conv{i}_b", b))
        return items

    def parameter_count(self, head_only: bool = False) -> int:
        items = self.param_items()
        if head_only:
            items = [it for it in items if not it[0].startswith("conv")]
        return sum(a.size for _, a in items)

    def copy_params(self) -> list[np.ndarray]:
        return [a.copy() for _, a in self.param_items()]

    def load_params(self, arrays: list[np.ndarray]) -> None:
        for (_, dst), src in zip(self.param_items(), arrays):
            dst[...] = src


def _f32(x: np.ndarray) -> np.ndarray:
    # pass through float32 so a freshly initialized model survives the
    # float32 file format bit-exactly
    return x.astype(np.float32).astype(np.float64)


def init_model(
    frontend: Frontend,
    seed: int = 0,
    hidden: int | None = None,
    conv_spec: ConvStackSpec | None = None,
) -> ClassifierModel:
    rng = np.random.default_rng(seed)
    if frontend == Frontend.MFCC:
        dim = MFCC_DIM
        hidden = MFCC_HIDDEN if hidden is None else hidden
        conv_spec = None
        conv = None
    else:
        conv_spec = conv_spec or ConvStackSpec.desk_scale()
        dim = conv_spec.feature_dim
        hidden = CONV_HIDDEN if hidden is None else hidden
        conv = init_conv_weights(conv_spec, rng)
    return ClassifierModel(
        frontend=frontend,
        ln_gamma=np.ones(dim),
        ln_beta=np.zeros(dim),
        fc1_w=_f32(rng.standard_normal((dim, hidden)) * np.sqrt(2.0 / dim)),
        fc1_b=np.zeros(hidden),
        fc2_w=_f32(rng.standard_normal((hidden, 2)) * np.sqrt(2.0 / hidden)),
        fc2_b=np.zeros(2),
        conv_spec=conv_spec,
        conv=conv,
    )


def zero_model(frontend: Frontend = Frontend.MFCC) -> ClassifierModel:
    """All-zero parameters: every input maps to probabilities (0.5, 0.5).

    Useful as a fully deterministic stand-in where only the plumbing is
    under test (wire conformance, throughput).
    """
    model = init_model(frontend, seed=0)
    for _, a in model.param_items():
        a[...] = 0.0
    return model


# ---------------------------------------------------------------------------
# Forward / backward


def layer_norm(feats: np.ndarray, gamma: np.ndarray, beta: np.ndarray):
    mu = feats.mean(axis=-1, keepdims=True)
    centered = feats - mu
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = centered * inv_std
    return gamma * xhat + beta, xhat, inv_std


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _head_forward(model: ClassifierModel, feats: np.ndarray, want_cache: bool = False):
    normed, xhat, inv_std = layer_norm(feats, model.ln_gamma, model.ln_beta)
    pooled = normed.mean(axis=1)
    z1 = pooled @ model.fc1_w + model.fc1_b
    a1 = np.maximum(z1, 0.0)
    logits = a1 @ model.fc2_w + model.fc2_b
    probs = _softmax(logits)
    if not want_cache:
        return probs
    return probs, (feats, xhat, inv_std, z1, a1)


def features_for(model: ClassifierModel, batch: np.ndarray) -> np.ndarray:
    """Front-end features for a (B, n) sample batch -> (B, T, dim)."""
    if model.frontend == Frontend.MFCC:
        return mfcc_batch(batch)
    return conv_forward(batch, model.conv_spec, model.conv)


def penultimate(model: ClassifierModel, batch: np.ndarray) -> np.ndarray:
    """The pooled hidden vectors fed to the final layer, shape (B, hidden)."""
    feats = features_for(model, batch)
    normed, _, _ = layer_norm(feats, model.ln_gamma, model.ln_beta)
    z1 = normed.mean(axis=1) @ model.fc1_w + model.fc1_b
    return np.maximum(z1, 0.0)


def classify_batch(segments, model: ClassifierModel) -> list[SegmentLabel]:
    batch = np.stack([seg.samples for seg in segments])
    feats = features_for(model, batch)
    if feats.shape[1] == 0:
        raise RuntimeError("front-end produced no frames for a full segment")
    probs = _head_forward(model, feats)
    labels = []
    for p in probs:
        # exact tie degrades to ordinary dictation rather than a command
        kind = LabelKind.NORMAL if p[0] >= p[1] else LabelKind.WHISPER
        labels.append(SegmentLabel(kind, float(p[kind])))
    return labels


def classify(seg: AudioSegment, model: ClassifierModel) -> SegmentLabel:
    """Label one gated-in segment as normal or whispered speech."""
    return classify_batch([seg], model)[0]


def _cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, 1e-300))))


def _head_loss(model, feats, labels) -> float:
    return _cross_entropy(_head_forward(model, feats), labels)


def _joint_loss(model, samples, labels) -> float:
    return _cross_entropy(_head_forward(model, features_for(model, samples)), labels)


def _head_backward(model, cache, probs, labels):
    feats, xhat, inv_std, z1, a1 = cache
    b, t, _ = feats.shape
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b
    grads = {
        "fc2_w": a1.T @ dlogits,
        "fc2_b": dlogits.sum(axis=0),
    }
    da1 = dlogits @ model.fc2_w.T
    dz1 = da1 * (z1 > 0.0)
    pooled = xhat.mean(axis=1) * model.ln_gamma + model.ln_beta  # = normed pooled
    grads["fc1_w"] = pooled.T @ dz1
    grads["fc1_b"] = dz1.sum(axis=0)
    dpooled = dz1 @ model.fc1_w.T
    dnormed = np.broadcast_to(dpooled[:, None, :] / t, feats.shape)
    grads["ln_gamma"] = np.sum(dnormed * xhat, axis=(0, 1))
    grads["ln_beta"] = np.sum(dnormed, axis=(0, 1))
    dxhat = dnormed * model.ln_gamma
    dfeats = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * np.mean(dxhat * xhat, axis=-1, keepdims=True)
    )
    return grads, dfeats


def loss_and_grads(model: ClassifierModel, inputs: np.ndarray, labels: np.ndarray):
    """Loss plus gradients for every trainable array.

    `inputs` is a feature batch (B, T, dim) for the MFCC front-end (MFCC has
    no trainable parameters, so features are precomputed once) or a raw
    sample batch (B, n) for the conv front-end.
    """
    if model.frontend == Frontend.MFCC:
        feats = inputs
        conv_cache = None
    else:
        feats, conv_cache = conv_forward(
            inputs, model.conv_spec, model.conv, want_cache=True
        )
    probs, cache = _head_forward(model, feats, want_cache=True)
    loss = _cross_entropy(probs, labels)
    grads, dfeats = _head_backward(model, cache, probs, labels)
    if model.frontend == Frontend.CONV:
        conv_grads = conv_backward(dfeats, model.conv_spec, model.conv, conv_cache)
        for i, (dw, db) in enumerate(conv_grads):
            grads[f"conv{i}_w"] = dw
            grads[f"conv{i}_b"] = db
    return loss, grads, probs


# ---------------------------------------------------------------------------
# Training


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    patience: int = 5  # epochs without validation improvement before stopping


class _Adam:
    def __init__(self, params: list[np.ndarray], cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        cfg = self.cfg
        self.t += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g
            m_hat = self.m[i] / (1.0 - cfg.beta1**self.t)
            v_hat = self.v[i] / (1.0 - cfg.beta2**self.t)
            p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


def _as_arrays(data) -> tuple[np.ndarray, np.ndarray]:
    samples = np.stack([np.asarray(s, dtype=np.float64) for s, _ in data])
    labels = np.array([int(lab) for _, lab in data], dtype=np.int64)
    return samples, labels


def evaluate(model: ClassifierModel, data) -> tuple[float, float]:
    """Mean cross-entropy and accuracy over (samples, label) pairs."""
    samples, labels = _as_arrays(data)
    probs = _head_forward(model, features_for(model, samples))
    loss = _cross_entropy(probs, labels)
    acc = float(np.mean(probs.argmax(axis=1) == labels))
    return loss, acc


def train(
    train_data,
    val_data,
    cfg: TrainConfig,
    frontend: Frontend = Frontend.MFCC,
    conv_spec: ConvStackSpec | None = None,
) -> tuple[ClassifierModel, list[dict]]:
    """Train a fresh model; returns the best-validation model and history.

    `train_data`/`val_data` are sequences of (samples, label) with label in
    {0 normal, 1 whisper}. Reproducible: the same seed, config, and data
    order give identical parameters and history.
    """
    x_train, y_train = _as_arrays(train_data)
    x_val, y_val = _as_arrays(val_data)
    classes = set(y_train.tolist())
    if classes != {0, 1}:
        raise ConfigurationError(
            f"training data must contain both classes, got labels {sorted(classes)}"
        )

    model = init_model(frontend, seed=cfg.seed, conv_spec=conv_spec)
    params = [a for _, a in model.param_items()]
    names = [n for n, _ in model.param_items()]
    adam = _Adam(params, cfg)
    rng = np.random.default_rng(cfg.seed)

    if frontend == Frontend.MFCC:
        train_inputs = mfcc_batch(x_train)
        val_inputs = mfcc_batch(x_val)
    else:
        train_inputs = x_train
        val_inputs = x_val

    history: list[dict] = []
    best: tuple[float, list[np.ndarray]] | None = None
    stall = 0
    n = len(x_train)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses, correct = [], 0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            loss, grads, probs = loss_and_grads(model, train_inputs[idx], y_train[idx])
            if not np.isfinite(loss):
                raise DivergenceError(epoch, bi)
            adam.step([grads[name] for name in names])
            losses.append(loss * len(idx))
            correct += int(np.sum(probs.argmax(axis=1) == y_train[idx]))
        val_probs = _head_forward(
            model,
            val_inputs
            if frontend == Frontend.MFCC
            else features_for(model, val_inputs),
        )
        val_loss = _cross_entropy(val_probs, y_val)
        val_acc = float(np.mean(val_probs.argmax(axis=1) == y_val))
        history.append(
            {
                "epoch": epoch,
                "train_loss": sum(losses) / n,
                "train_acc": correct / n,
                "val_loss": val_loss,
                "val_acc": val_acc,
            }
        )
        if best is None or val_acc >= best[0]:
            # ties keep the later snapshot: same accuracy, better-trained logits
            if best is not None and val_acc == best[0]:
                stall += 1
            else:
                stall = 0
            best = (val_acc, model.copy_params())
        else:
            stall += 1
        if stall >= cfg.patience:
            break
    model.load_params(best[1])
    return model, history


# ---------------------------------------------------------------------------
# Gradient checking


def grad_check(
    model: ClassifierModel,
    samples: np.ndarray,
    labels: np.ndarray,
    h: float = 1e-5,
    max_checks: int = 4_000,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Every parameter is checked when the model has at most `max_checks` of
    them; larger models (the joint conv stack) get a seeded random subset
    that still covers every parameter array. Entries where both gradients
    are below 1e-8 in magnitude (dead ReLU paths) count as zero error.
    """
    if model.frontend == Frontend.MFCC:
        inputs = mfcc_batch(samples)
        loss_fn = _head_loss
    else:
        inputs = samples
        loss_fn = _joint_loss
    _, grads, _ = loss_and_grads(model, inputs, labels)

    items = model.param_items()
    total = sum(a.size for _, a in items)
    rng = np.random.default_rng(seed)
    max_err = 0.0
    for name, arr in items:
        flat = arr.reshape(-1)
        if total <= max_checks:
            indices = np.arange(flat.size)
        else:
            quota = max(8, int(round(max_checks * flat.size / total)))
            quota = min(quota, flat.size)
            indices = rng.choice(flat.size, size=quota, replace=False)
        g_flat = grads[name].reshape(-1)
        for i in indices:
            saved = flat[i]
            flat[i] = saved + h
            loss_plus = loss_fn(model, inputs, labels)
            flat[i] = saved - h
            loss_minus = loss_fn(model, inputs, labels)
            flat[i] = saved
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            analytic = g_flat[i]
            if abs(analytic) < 1e-8 and abs(numeric) < 1e-8:
                continue
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric))
            max_err = max(max_err, err)
    return max_err


# ---------------------------------------------------------------------------
# Serialization

_HEADER = struct.Struct("<4sBBIII")


def save_model(model: ClassifierModel, path) -> None:
    """Write the binary model file.

    Layout: magic "DVMD", u8 version, u8 frontend id, u32 LE feature dim,
    hidden width, conv channel count (0 for MFCC); then every parameter
    array in param_items() order as little-endian float32, C order.
    """
    channels = 0
    if model.frontend == Frontend.CONV:
        channels = model.conv_spec.uniform_channels
    blob = bytearray(
        _HEADER.pack(
            MODEL_MAGIC,
            MODEL_VERSION,
            int(model.frontend),
            model.feature_dim,
            model.hidden,
            channels,
        )
    )
    for _, arr in model.param_items():
        blob += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(blob)


def _expected_shapes(frontend, dim, hidden, spec):
    shapes = [
        (dim,),
        (dim,),
        (dim, hidden),
        (hidden,),
        (hidden, 2),
        (2,),
    ]
    if frontend == Frontend.CONV:
        c_in = 1
        for block in spec.blocks:
            shapes.append((block.channels, c_in, block.kernel))
            shapes.append((block.channels,))
            c_in = block.channels
    return shapes


def load_model(path) -> ClassifierModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise ModelFormatError("truncated file: incomplete header")
    magic, version, frontend_id, dim, hidden, channels = _HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if version != MODEL_VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if frontend_id not in (int(Frontend.MFCC), int(Frontend.CONV)):
        raise ModelFormatError(f"unknown frontend id {frontend_id}")
    frontend = Frontend(frontend_id)
    if hidden < 1:
        raise ModelFormatError(f"bad hidden width {hidden}")
    if frontend == Frontend.MFCC:
        if dim != MFCC_DIM:
            raise ModelFormatError(f"feature dim {dim} mismatches MFCC front-end ({MFCC_DIM})")
        if channels != 0:
            raise ModelFormatError(f"conv channel count {channels} must be 0 for MFCC")
        spec = None
    else:
        if channels < 1:
            raise ModelFormatError(f"bad conv channel count {channels}")
        if dim != channels:
            raise ModelFormatError(
                f"feature dim {dim} mismatches conv channel count {channels}"
            )
        spec = ConvStackSpec.default(channels)
    shapes = _expected_shapes(frontend, dim, hidden, spec)
    expected = _HEADER.size + 4 * sum(int(np.prod(s)) for s in shapes)
    if len(data) < expected:
        raise ModelFormatError("truncated file: parameter block too short")
    if len(data) > expected:
        raise ModelFormatError("trailing data after parameter block")
    offset = _HEADER.size
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        arr = (
            np.frombuffer(data, dtype="<f4", count=count, offset=offset)
            .astype(np.float64)
            .reshape(shape)
        )
        arrays.append(arr)
        offset += 4 * count
    conv = None
    if frontend == Frontend.CONV:
        conv_arrays = arrays[6:]
        conv = ConvStackWeights(
            [(conv_arrays[2 * i], conv_arrays[2 * i + 1]) for i in range(7)]
        )
    return ClassifierModel(
        frontend=frontend,
        ln_gamma=arrays[0],
        ln_beta=arrays[1],
        fc1_w=arrays[2],
        fc1_b=arrays[3],
        fc2_w=arrays[4],
        fc2_b=arrays[5],
        conv_spec=spec,
        conv=conv,
    )


def export_features(dataset, model: ClassifierModel, path) -> None:
    """Dump pooled pre-output feature vectors with labels as CSV.

    One row per segment: label name, then the `hidden` vector components.
    Intended for external 2-D projection of the learned separation.
    """
    samples, labels = _as_arrays(dataset)
    vectors = penultimate(model, samples)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{i}" for i in range(vectors.shape[1])])
        for label, vec in zip(labels, vectors):
            writer.writerow([LabelKind(label).name.lower()] + [f"{v:.9g}" for v in vec])
