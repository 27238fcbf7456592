"""Label a packet stream and split it into complementary audio streams.

Each packet is gated, classified, then smoothed with a majority vote over
a centered window of three non-silence labels (one packet of lookahead,
100 ms). Routing substitutes digital-zero packets for the other class, so
NormalStream + WhisperStream reconstructs the gated input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .audio_io import (
    DEFAULT_GATE_DBFS,
    SEGMENT_SAMPLES,
    AudioSegment,
    LabelKind,
    SegmentLabel,
    gate,
)
from .classifier import ClassifierModel, classify_batch


class Channel(Enum):
    NORMAL_STREAM = "normal"
    WHISPER_STREAM = "whisper"


@dataclass(frozen=True)
class LabeledSegment:
    segment: AudioSegment
    raw_label: SegmentLabel
    smoothed_label: SegmentLabel


@dataclass(frozen=True)
class RoutedPacket:
    channel: Channel
    samples: np.ndarray  # original samples or the all-zero substitute
    index: int


def smooth_labels(kinds) -> list[LabelKind]:
    """Majority vote over the centered 3-packet window, silence abstaining.

    Only the adjacent packets i-1 and i+1 vote, so the decision for packet
    i is final once packet i+1 has arrived (one packet of lookahead).
    Silence labels come from the gate and are never overturned, and they
    cast no vote. Ties fall back to the previous smoothed speech label, or
    the raw label at stream start.
    """
    kinds = list(kinds)
    smoothed = list(kinds)
    previous = None
    for i, kind in enumerate(kinds):
        if kind == LabelKind.SILENCE:
            continue
        window = [kind]
        if i > 0 and kinds[i - 1] != LabelKind.SILENCE:
            window.append(kinds[i - 1])
        if i + 1 < len(kinds) and kinds[i + 1] != LabelKind.SILENCE:
            window.append(kinds[i + 1])
        normals = sum(1 for k in window if k == LabelKind.NORMAL)
        whispers = len(window) - normals
        if normals > whispers:
            label = LabelKind.NORMAL
        elif whispers > normals:
            label = LabelKind.WHISPER
        else:
            label = previous if previous is not None else kind
        smoothed[i] = label
        previous = label
    return smoothed


def label_stream(
    segments,
    model: ClassifierModel,
    gate_threshold: float = DEFAULT_GATE_DBFS,
) -> list[LabeledSegment]:
    """Gate, classify, and smooth a packet sequence."""
    segments = list(segments)
    raw: list[SegmentLabel | None] = [gate(seg, gate_threshold) for seg in segments]
    survivors = [i for i, lab in enumerate(raw) if lab is None]
    if survivors:
        classified = classify_batch([segments[i] for i in survivors], model)
        for i, lab in zip(survivors, classified):
            raw[i] = lab
    smoothed_kinds = smooth_labels([lab.kind for lab in raw])
    out = []
    for seg, raw_label, kind in zip(segments, raw, smoothed_kinds):
        if kind == raw_label.kind:
            smoothed = raw_label
        else:
            # two-class flip: the classifier's mass on the other class
            smoothed = SegmentLabel(kind, 1.0 - raw_label.confidence)
        out.append(LabeledSegment(seg, raw_label, smoothed))
    return out


_ZEROS = np.zeros(SEGMENT_SAMPLES)


def route(labeled) -> tuple[list[RoutedPacket], list[RoutedPacket]]:
    """Split labeled packets into the normal-only and whisper-only streams.

    Both outputs have the same length and indices as the input; for each
    index exactly one stream carries the original samples unless the label
    is Silence, in which case both carry zeros.
    """
    normal_stream = []
    whisper_stream = []
    for item in labeled:
        kind = item.smoothed_label.kind
        seg = item.segment
        normal_stream.append(
            RoutedPacket(
                Channel.NORMAL_STREAM,
                seg.samples if kind == LabelKind.NORMAL else _ZEROS,
                seg.index,
            )
        )
        whisper_stream.append(
            RoutedPacket(
                Channel.WHISPER_STREAM,
                seg.samples if kind == LabelKind.WHISPER else _ZEROS,
                seg.index,
            )
        )
    return normal_stream, whisper_stream
