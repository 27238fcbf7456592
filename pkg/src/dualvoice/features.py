"""Audio front-ends: the MFCC pipeline and the strided 1-D conv feature stack.

Both front-ends map a sample sequence to a sequence of fixed-dimension
feature vectors. The conv stack is seven valid (no-padding) temporal
convolution blocks with kernels (10,3,3,3,3,2,2) and strides
(5,2,2,2,2,2,2), GELU activation, one output vector per ~20 ms. The MFCC
pipeline: 25 ms frames, 10 ms hop, Hann window, 512-point magnitude FFT,
40 triangular mel filters over 0-8 kHz, log floor 1e-10, orthonormal
DCT-II, coefficients 0..12.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct
from scipy.special import erf

from .audio_io import SAMPLE_RATE

MFCC_FRAME = 400  # 25 ms
MFCC_HOP = 160  # 10 ms
MFCC_NFFT = 512
MFCC_FILTERS = 40
MFCC_COEFFS = 13
MFCC_LOG_FLOOR = 1e-10
MEL_HIGH_HZ = 8_000.0

CONV_KERNELS = (10, 3, 3, 3, 3, 2, 2)
CONV_STRIDES = (5, 2, 2, 2, 2, 2, 2)
FULL_SCALE_CHANNELS = 512
DESK_SCALE_CHANNELS = 64


@dataclass(frozen=True)
class FeatureSequence:
    """A (frame_count, dim) block of feature vectors, possibly empty."""

    frames: np.ndarray

    def __post_init__(self):
        if self.frames.ndim != 2:
            raise ValueError(f"frames must be 2-D, got shape {self.frames.shape}")
        if self.frames.size and not np.all(np.isfinite(self.frames)):
            raise ValueError("feature frames contain non-finite values")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


# ---------------------------------------------------------------------------
# MFCC


def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_filters: int = MFCC_FILTERS,
    nfft: int = MFCC_NFFT,
    sample_rate: int = SAMPLE_RATE,
    high_hz: float = MEL_HIGH_HZ,
) -> tuple[np.ndarray, np.ndarray]:
    """Triangular mel filters evaluated at FFT bin frequencies.

    Returns (filterbank (n_filters, nfft//2+1), center frequencies in Hz).
    Edges are spaced linearly in mel between 0 Hz and `high_hz`; each
    triangle peaks at 1.0 at its center frequency.
    """
    edges_hz = _mel_to_hz(np.linspace(_hz_to_mel(0.0), _hz_to_mel(high_hz), n_filters + 2))
    bin_hz = np.arange(nfft // 2 + 1) * (sample_rate / nfft)
    fb = np.zeros((n_filters, nfft // 2 + 1))
    for j in range(n_filters):
        left, center, right = edges_hz[j], edges_hz[j + 1], edges_hz[j + 2]
        rising = (bin_hz - left) / (center - left)
        falling = (right - bin_hz) / (right - center)
        fb[j] = np.clip(np.minimum(rising, falling), 0.0, 1.0)
    return fb, edges_hz[1:-1]


_FILTERBANK, _FILTER_CENTERS_HZ = mel_filterbank()
_HANN = np.hanning(MFCC_FRAME)


def mel_filter_centers_hz() -> np.ndarray:
    return _FILTER_CENTERS_HZ.copy()


def mfcc_frame_count(n_samples: int) -> int:
    if n_samples < MFCC_FRAME:
        return 0
    return (n_samples - MFCC_FRAME) // MFCC_HOP + 1


def log_mel_batch(batch: np.ndarray) -> np.ndarray:
    """Log mel-filterbank energies for a (B, n) sample batch -> (B, T, 40)."""
    x = np.asarray(batch, dtype=np.float64)
    n = x.shape[1]
    t = mfcc_frame_count(n)
    if t == 0:
        return np.zeros((x.shape[0], 0, MFCC_FILTERS))
    frames = sliding_window_view(x, MFCC_FRAME, axis=1)[:, ::MFCC_HOP][:, :t] * _HANN
    spectrum = np.abs(np.fft.rfft(frames, n=MFCC_NFFT, axis=2))
    energies = spectrum @ _FILTERBANK.T
    return np.log(np.maximum(energies, MFCC_LOG_FLOOR))


def log_mel_energies(samples) -> np.ndarray:
    return log_mel_batch(np.asarray(samples, dtype=np.float64)[None, :])[0]


def mfcc_batch(batch: np.ndarray) -> np.ndarray:
    """MFCC features for a (B, n) sample batch -> (B, T, 13)."""
    logmel = log_mel_batch(batch)
    if logmel.shape[1] == 0:
        return np.zeros((logmel.shape[0], 0, MFCC_COEFFS))
    return dct(logmel, type=2, axis=2, norm="ortho")[:, :, :MFCC_COEFFS]


def mfcc(samples) -> FeatureSequence:
    """MFCC features for one sample sequence; empty if shorter than a frame."""
    return FeatureSequence(mfcc_batch(np.asarray(samples, dtype=np.float64)[None, :])[0])


# ---------------------------------------------------------------------------
# Strided convolutional feature stack


@dataclass(frozen=True)
class ConvBlock:
    channels: int
    kernel: int
    stride: int

    def __post_init__(self):
        if self.channels < 1 or self.kernel < 1 or self.stride < 1:
            raise ValueError(f"conv block fields must be positive: {self}")


@dataclass(frozen=True)
class ConvStackSpec:
    """Geometry of the 7-block temporal conv stack."""

    blocks: tuple[ConvBlock, ...]

    def __post_init__(self):
        if len(self.blocks) != 7:
            raise ValueError(f"conv stack must have exactly 7 blocks, got {len(self.blocks)}")

    @classmethod
    def default(cls, channels: int = FULL_SCALE_CHANNELS) -> "ConvStackSpec":
        return cls(
            tuple(
                ConvBlock(channels, k, s)
                for k, s in zip(CONV_KERNELS, CONV_STRIDES)
            )
        )

    @classmethod
    def desk_scale(cls) -> "ConvStackSpec":
        """64-channel variant, small enough to train jointly on a CPU."""
        return cls.default(DESK_SCALE_CHANNELS)

    @property
    def feature_dim(self) -> int:
        return self.blocks[-1].channels

    @property
    def uniform_channels(self) -> int:
        channels = {b.channels for b in self.blocks}
        if len(channels) != 1:
            raise ValueError("conv stack channels are not uniform")
        return channels.pop()


def frame_count(n_samples: int, spec: ConvStackSpec) -> int:
    """Output frame count of the stack; analytic twin of conv_forward."""
    length = n_samples
    for block in spec.blocks:
        if length < block.kernel:
            return 0
        length = (length - block.kernel) // block.stride + 1
    return length


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / np.sqrt(2.0))) + x * np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


@dataclass
class ConvStackWeights:
    """Per-block (W, b); W has shape (C_out, C_in, kernel), b (C_out,)."""

    layers: list[tuple[np.ndarray, np.ndarray]]


def init_conv_weights(spec: ConvStackSpec, rng: np.random.Generator) -> ConvStackWeights:
    """He-scaled weights, zero biases; values pass through float32 so a fresh
    model round-trips the float32 file format bit-exactly."""
    layers = []
    c_in = 1
    for block in spec.blocks:
        fan_in = c_in * block.kernel
        w = rng.standard_normal((block.channels, c_in, block.kernel)) * np.sqrt(2.0 / fan_in)
        layers.append((w.astype(np.float32).astype(np.float64), np.zeros(block.channels)))
        c_in = block.channels
    return ConvStackWeights(layers)


def _conv_block_forward(x, w, b, stride):
    # x: (B, C_in, L); returns pre-activation (B, C_out, T) and the windows
    kernel = w.shape[2]
    t = (x.shape[2] - kernel) // stride + 1
    windows = sliding_window_view(x, kernel, axis=2)[:, :, ::stride][:, :, :t]
    z = np.einsum("bitk,oik->bot", windows, w, optimize=True) + b[None, :, None]
    return z


def conv_forward(
    batch: np.ndarray,
    spec: ConvStackSpec,
    weights: ConvStackWeights,
    activation: str = "gelu",
    want_cache: bool = False,
):
    """Run the conv stack over a (B, n) sample batch.

    Returns features of shape (B, T, C) plus, when requested, the per-block
    cache needed by conv_backward. `activation` is "gelu" or "identity";
    identity exists for linearity testing only.
    """
    if activation not in ("gelu", "identity"):
        raise ValueError(f"unknown activation {activation!r}")
    x = np.asarray(batch, dtype=np.float64)[:, None, :]  # (B, 1, n)
    t_out = frame_count(batch.shape[1], spec)
    if t_out == 0:
        empty = np.zeros((batch.shape[0], 0, spec.feature_dim))
        return (empty, None) if want_cache else empty
    cache = []
    for block, (w, b) in zip(spec.blocks, weights.layers):
        z = _conv_block_forward(x, w, b, block.stride)
        y = gelu(z) if activation == "gelu" else z
        if want_cache:
            cache.append((x, z))
        x = y
    out = np.ascontiguousarray(x.transpose(0, 2, 1))  # (B, T, C)
    return (out, cache) if want_cache else out


def conv_backward(
    d_out: np.ndarray,
    spec: ConvStackSpec,
    weights: ConvStackWeights,
    cache,
    activation: str = "gelu",
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gradients of the conv weights given d(loss)/d(features).

    `d_out` has the (B, T, C) layout of conv_forward's output; the returned
    list matches weights.layers: per block (dW, db).
    """
    dy = np.ascontiguousarray(d_out.transpose(0, 2, 1))  # (B, C, T)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(spec.blocks)
    for i in range(len(spec.blocks) - 1, -1, -1):
        block = spec.blocks[i]
        w, _ = weights.layers[i]
        x, z = cache[i]
        dz = dy * gelu_grad(z) if activation == "gelu" else dy
        kernel, stride = block.kernel, block.stride
        t = dz.shape[2]
        windows = sliding_window_view(x, kernel, axis=2)[:, :, ::stride][:, :, :t]
        dw = np.einsum("bot,bitk->oik", dz, windows, optimize=True)
        db = dz.sum(axis=(0, 2))
        grads[i] = (dw, db)
        if i > 0:
            # scatter window gradients back onto the input; for a fixed
            # kernel offset the target positions never overlap
            dxw = np.einsum("bot,oik->bitk", dz, w, optimize=True)
            dx = np.zeros_like(x)
            for k in range(kernel):
                dx[:, :, k : k + t * stride : stride] += dxw[:, :, :, k]
            dy = dx
    return grads


def conv_extract(
    samples,
    spec: ConvStackSpec,
    weights: ConvStackWeights,
    activation: str = "gelu",
) -> FeatureSequence:
    """Feature sequence for one sample sequence; empty if too short."""
    batch = np.asarray(samples, dtype=np.float64)[None, :]
    return FeatureSequence(conv_forward(batch, spec, weights, activation=activation)[0])
