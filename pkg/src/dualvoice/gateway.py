"""Turn routed audio streams into transcripts via pluggable recognizers.

Utterances are delimited by runs of zero packets (the silence substitute),
default 300 ms. The mock recognizer replays a ledger of scripted
utterances so the whole pipeline is testable without any external ASR; the
external backend streams a span's AUDIO frames over the wire protocol and
awaits one TRANSCRIPT reply.
"""

from __future__ import annotations

import socket
from dataclasses import dataclass, field

import numpy as np

from . import wire
from .router import Channel, RoutedPacket


class UnknownUtteranceError(KeyError):
    pass


class BackendUnavailableError(RuntimeError):
    pass


@dataclass(frozen=True)
class TranscriptEvent:
    channel: Channel
    text: str
    alternatives: tuple[str, ...]
    t_start: int  # packet indices
    t_end: int

    def __post_init__(self):
        if not self.alternatives:
            raise ValueError("alternatives must be non-empty")
        if self.text != self.alternatives[0]:
            raise ValueError("text must equal alternatives[0]")
        if self.t_start > self.t_end:
            raise ValueError(f"t_start {self.t_start} > t_end {self.t_end}")


@dataclass(frozen=True)
class UtteranceBoundaryRule:
    end_silence: int = 3  # consecutive zero packets that close an utterance

    def __post_init__(self):
        if self.end_silence < 1:
            raise ValueError("end_silence must be >= 1")


@dataclass(frozen=True)
class UtteranceSpan:
    channel: Channel
    start: int  # packet indices, inclusive
    end: int


def segment_utterances(
    packets: list[RoutedPacket],
    rule: UtteranceBoundaryRule = UtteranceBoundaryRule(),
) -> list[UtteranceSpan]:
    """Maximal runs of non-zero packets separated by >= end_silence zeros."""
    active = [p.index for p in packets if np.any(p.samples)]
    if not active:
        return []
    channel = packets[0].channel
    spans = []
    start = prev = active[0]
    for idx in active[1:]:
        if idx - prev - 1 >= rule.end_silence:
            spans.append(UtteranceSpan(channel, start, prev))
            start = idx
        prev = idx
    spans.append(UtteranceSpan(channel, start, prev))
    return spans


@dataclass(frozen=True)
class MockUtterance:
    """Ledger entry: what the recognizer reports for a packet range.

    `text` is the reported transcription (which may be a scripted
    misrecognition); `alternatives` is the full ranked candidate list with
    `text` first, so correction scenarios can place the true text at a
    chosen rank.
    """

    channel: Channel
    start: int
    end: int
    text: str
    alternatives: tuple[str, ...] = ()

    def __post_init__(self):
        alts = self.alternatives or (self.text,)
        object.__setattr__(self, "alternatives", tuple(alts))
        if self.alternatives[0] != self.text:
            raise ValueError("alternatives[0] must equal text")


class MockRecognizer:
    """Deterministic recognizer: matches spans to ledger entries by overlap."""

    def __init__(self, ledger: list[MockUtterance]):
        self.ledger = list(ledger)

    def recognize(self, span: UtteranceSpan, packets=None) -> TranscriptEvent:
        best = None
        best_overlap = 0
        for entry in self.ledger:
            if entry.channel != span.channel:
                continue
            overlap = min(span.end, entry.end) - max(span.start, entry.start) + 1
            if overlap > best_overlap:
                best, best_overlap = entry, overlap
        if best is None:
            raise UnknownUtteranceError(
                f"no ledger entry overlaps {span.channel.value} packets "
                f"{span.start}..{span.end}"
            )
        return TranscriptEvent(
            channel=span.channel,
            text=best.text,
            alternatives=best.alternatives,
            t_start=span.start,
            t_end=span.end,
        )


class ExternalBackend:
    """Speaks the wire protocol to a remote recognizer, one connection per
    utterance span: stream the span's AUDIO frames, half-close, await one
    TRANSCRIPT reply."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.host = host
        self.port = port
        self.timeout = timeout

    def recognize(self, span: UtteranceSpan, packets: list[RoutedPacket]) -> TranscriptEvent:
        by_index = {p.index: p for p in packets}
        try:
            with socket.create_connection((self.host, self.port), timeout=self.timeout) as sock:
                sock.settimeout(self.timeout)
                for idx in range(span.start, span.end + 1):
                    sock.sendall(wire.encode_audio(by_index[idx].samples))
                sock.shutdown(socket.SHUT_WR)
                reader = sock.makefile("rb")
                try:
                    msg_type, payload = wire.read_frame(reader)
                except EOFError as exc:
                    raise wire.WireProtocolError("backend closed without replying") from exc
                except wire.FrameError as exc:
                    raise wire.WireProtocolError(f"malformed backend frame: {exc}") from exc
        except (TimeoutError, socket.timeout) as exc:
            raise BackendUnavailableError(
                f"recognizer at {self.host}:{self.port} timed out after {self.timeout}s"
            ) from exc
        except ConnectionError as exc:
            raise BackendUnavailableError(str(exc)) from exc
        if msg_type != wire.MSG_TRANSCRIPT:
            raise wire.WireProtocolError(f"expected TRANSCRIPT reply, got type 0x{msg_type:02x}")
        doc = wire.decode_transcript_payload(payload)
        if not doc["alternatives"]:
            raise wire.WireProtocolError("transcript reply has empty alternatives")
        if doc["channel"] != span.channel.value:
            raise wire.WireProtocolError(
                f"transcript channel {doc['channel']!r} mismatches span {span.channel.value!r}"
            )
        return TranscriptEvent(
            channel=span.channel,
            text=doc["text"],
            alternatives=tuple(doc["alternatives"]),
            t_start=span.start,
            t_end=span.end,
        )


@dataclass
class RecognitionResult:
    events: list[TranscriptEvent] = field(default_factory=list)
    unrecognized: list[UtteranceSpan] = field(default_factory=list)


def recognize_stream(
    packets: list[RoutedPacket],
    recognizer,
    rule: UtteranceBoundaryRule = UtteranceBoundaryRule(),
) -> RecognitionResult:
    """Recognize every utterance span of one routed stream, in span order.

    An unavailable backend marks the span unrecognized and the pipeline
    continues; protocol violations propagate.
    """
    result = RecognitionResult()
    for span in segment_utterances(packets, rule):
        try:
            result.events.append(recognizer.recognize(span, packets))
        except BackendUnavailableError:
            result.unrecognized.append(span)
    return result
