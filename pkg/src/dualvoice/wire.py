"""Length-prefixed binary framing shared by the discriminator service and
recognizer backends.

Frame layout (both directions): u32 big-endian payload length, u8 message
type, payload. Types: 0x01 AUDIO (3,200 bytes: 1,600 x int16 LE), 0x02
LABEL (u8 kind {0 normal, 1 whisper, 2 silence} + f32 LE confidence), 0x03
TRANSCRIPT (UTF-8 JSON with keys channel, text, alternatives, t_start,
t_end in that order), 0x7F ERROR (UTF-8 reason). Payloads above 64 KiB are
rejected without being read.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .audio_io import SEGMENT_SAMPLES, LabelKind

MSG_AUDIO = 0x01
MSG_LABEL = 0x02
MSG_TRANSCRIPT = 0x03
MSG_ERROR = 0x7F

MAX_PAYLOAD = 64 * 1024
AUDIO_PAYLOAD_BYTES = 2 * SEGMENT_SAMPLES

_HEADER = struct.Struct(">IB")
_LABEL = struct.Struct("<Bf")


class FrameError(ValueError):
    """Malformed frame; the connection carrying it must be closed."""


class WireProtocolError(RuntimeError):
    """The peer replied with a frame that violates the protocol."""


def encode_frame(msg_type: int, payload: bytes) -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise ValueError(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return _HEADER.pack(len(payload), msg_type) + payload


def read_frame(stream) -> tuple[int, bytes]:
    """Read one frame from a blocking binary stream (e.g. socket makefile).

    Raises EOFError on a clean end of stream before any header byte.
    """
    header = stream.read(_HEADER.size)
    if not header:
        raise EOFError
    if len(header) < _HEADER.size:
        raise FrameError("truncated frame header")
    length, msg_type = _HEADER.unpack(header)
    if length > MAX_PAYLOAD:
        raise FrameError("oversized")
    payload = stream.read(length)
    if len(payload) < length:
        raise FrameError("truncated frame payload")
    return msg_type, payload


def encode_audio(samples) -> bytes:
    x = np.asarray(samples, dtype=np.float64)
    ints = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    return encode_frame(MSG_AUDIO, ints.tobytes())


def decode_audio_payload(payload: bytes) -> np.ndarray:
    if len(payload) != AUDIO_PAYLOAD_BYTES:
        raise FrameError("bad-length")
    return np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32768.0


def encode_label(kind: LabelKind, confidence: float) -> bytes:
    return encode_frame(MSG_LABEL, _LABEL.pack(int(kind), confidence))


def decode_label_payload(payload: bytes) -> tuple[LabelKind, float]:
    if len(payload) != _LABEL.size:
        raise FrameError("bad label payload length")
    kind, confidence = _LABEL.unpack(payload)
    return LabelKind(kind), confidence


def encode_error(reason: str) -> bytes:
    return encode_frame(MSG_ERROR, reason.encode("utf-8"))


def encode_transcript(channel: str, text: str, alternatives, t_start: int, t_end: int) -> bytes:
    payload = json.dumps(
        {
            "channel": channel,
            "text": text,
            "alternatives": list(alternatives),
            "t_start": t_start,
            "t_end": t_end,
        },
        ensure_ascii=False,
    ).encode("utf-8")
    return encode_frame(MSG_TRANSCRIPT, payload)


def decode_transcript_payload(payload: bytes) -> dict:
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WireProtocolError(f"unparsable transcript payload: {exc}") from exc
    for key in ("channel", "text", "alternatives", "t_start", "t_end"):
        if key not in doc:
            raise WireProtocolError(f"transcript payload missing {key!r}")
    return doc
