"""WAV input/output, packetization into 100 ms segments, and the silence gate.

Audio everywhere in this package is mono 16 kHz float64 in [-1.0, +1.0].
The unit of classification and routing is a 1,600-sample packet (100 ms).
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

SAMPLE_RATE = 16_000
SEGMENT_SAMPLES = 1_600  # 100 ms at 16 kHz
DEFAULT_GATE_DBFS = -20.0
SILENCE_FLOOR_DBFS = -300.0  # sentinel for all-zero segments
_INT16_FULL_SCALE = 32_768.0


class AudioFormatError(ValueError):
    """The WAV file is malformed or in a format this pipeline rejects."""


class LabelKind(IntEnum):
    """Packet classes. Values double as the wire encoding."""

    NORMAL = 0
    WHISPER = 1
    SILENCE = 2


@dataclass(frozen=True)
class SegmentLabel:
    kind: LabelKind
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class AudioSegment:
    """One 1,600-sample packet of normalized samples.

    `index` is the packet counter within its stream; it is monotone and
    shared by the two routed output streams.
    """

    samples: np.ndarray
    index: int
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.samples.shape != (SEGMENT_SAMPLES,):
            raise ValueError(
                f"segment must hold exactly {SEGMENT_SAMPLES} samples, "
                f"got shape {self.samples.shape}"
            )
        peak = float(np.max(np.abs(self.samples))) if self.samples.size else 0.0
        if peak > 1.0:
            raise ValueError(f"samples exceed full scale (peak {peak})")


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a RIFF PCM16LE mono 16 kHz file into float64 samples in [-1, +1).

    Other layouts are rejected, never resampled or downmixed, so the DSP
    path stays bit-reproducible.
    """
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            if channels != 1:
                raise AudioFormatError(
                    f"unsupported channel count {channels}: mono required"
                )
            if width != 2:
                raise AudioFormatError(
                    f"unsupported sample width {8 * width} bit: 16-bit PCM required"
                )
            if rate != SAMPLE_RATE:
                raise AudioFormatError(
                    f"unsupported sample rate {rate} Hz: {SAMPLE_RATE} Hz required"
                )
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise AudioFormatError(f"malformed WAV file: {exc}") from exc
    except EOFError as exc:
        raise AudioFormatError("malformed WAV file: truncated header") from exc
    ints = np.frombuffer(raw, dtype="<i2")
    return ints.astype(np.float64) / _INT16_FULL_SCALE, rate


def write_wav(path, samples, sample_rate: int = SAMPLE_RATE) -> None:
    """Write float samples as RIFF PCM16LE mono, clipping to full scale."""
    x = np.asarray(samples, dtype=np.float64)
    ints = np.clip(np.round(x * _INT16_FULL_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(ints.tobytes())


def segment_stream(samples, start_index: int = 0) -> tuple[list[AudioSegment], int]:
    """Split samples into consecutive non-overlapping 1,600-sample packets.

    Offline mode: a trailing remainder shorter than one packet is dropped;
    the second return value counts the dropped samples. Streaming callers
    that must not lose the tail use :class:`StreamSegmenter` instead.
    """
    x = np.asarray(samples, dtype=np.float64)
    n_full = len(x) // SEGMENT_SAMPLES
    dropped = len(x) - n_full * SEGMENT_SAMPLES
    segments = [
        AudioSegment(x[i * SEGMENT_SAMPLES : (i + 1) * SEGMENT_SAMPLES], start_index + i)
        for i in range(n_full)
    ]
    return segments, dropped


class StreamSegmenter:
    """Streaming packetizer: buffers the tail until it fills a packet.

    Single-owner: one producer pushes chunks, one consumer takes the
    returned segments. Not safe for concurrent push.
    """

    def __init__(self):
        self._buffer = np.empty(0, dtype=np.float64)
        self._next_index = 0

    @property
    def pending(self) -> int:
        """Samples currently buffered, always < 1,600."""
        return len(self._buffer)

    def push(self, chunk) -> list[AudioSegment]:
        data = np.concatenate([self._buffer, np.asarray(chunk, dtype=np.float64)])
        segments, _ = segment_stream(data, start_index=self._next_index)
        self._next_index += len(segments)
        self._buffer = data[len(segments) * SEGMENT_SAMPLES :]
        return segments


def power_dbfs(samples) -> float:
    """Average power of a sample block as 20*log10(RMS), full scale 1.0."""
    x = np.asarray(samples, dtype=np.float64)
    rms = float(np.sqrt(np.mean(np.square(x)))) if x.size else 0.0
    if rms == 0.0:
        return SILENCE_FLOOR_DBFS
    return max(20.0 * np.log10(rms), SILENCE_FLOOR_DBFS)


def segment_power_dbfs(seg: AudioSegment) -> float:
    return power_dbfs(seg.samples)


def gate(seg: AudioSegment, threshold: float = DEFAULT_GATE_DBFS) -> SegmentLabel | None:
    """Silence gate: packets below `threshold` dBFS never reach the classifier.

    Returns a Silence label (confidence 1.0) for gated packets, None for
    packets that proceed to classification.
    """
    if segment_power_dbfs(seg) < threshold:
        return SegmentLabel(LabelKind.SILENCE, 1.0)
    return None
