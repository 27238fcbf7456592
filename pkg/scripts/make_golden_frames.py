#!/usr/bin/env python3
"""Regenerate the frozen wire-protocol conformance frames.

Frames are assembled with struct only, independent of the package's wire
module, so the golden bytes stay an oracle for it. Replies assume the
discriminator runs an all-zero model (probabilities 0.5/0.5, ties resolve
to normal) and the default -20 dBFS gate.
"""

import struct
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "golden"


def frame(msg_type: int, payload: bytes) -> bytes:
    return struct.pack(">IB", len(payload), msg_type) + payload


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    silence = struct.pack("<1600h", *([0] * 1600))
    tone = struct.pack("<1600h", *([16384] * 1600))  # 0.5 full scale, -6 dBFS

    cases = {
        # request -> expected reply
        "audio_silence": (frame(0x01, silence), frame(0x02, struct.pack("<Bf", 2, 1.0))),
        "audio_tone": (frame(0x01, tone), frame(0x02, struct.pack("<Bf", 0, 0.5))),
        "bad_length": (frame(0x01, b"\x00" * 10), frame(0x7F, b"bad-length")),
        "bad_type": (frame(0x55, b"xx"), frame(0x7F, b"bad-type")),
        "oversized": (struct.pack(">IB", 65537, 0x01), frame(0x7F, b"oversized")),
    }
    for name, (request, reply) in cases.items():
        (OUT / f"req_{name}.bin").write_bytes(request)
        (OUT / f"reply_{name}.bin").write_bytes(reply)
        print(f"{name}: request {len(request)} bytes, reply {len(reply)} bytes")


if __name__ == "__main__":
    main()
