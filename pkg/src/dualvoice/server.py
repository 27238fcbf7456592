"""TCP discriminator service: AUDIO frames in, LABEL frames out.

Stateless per packet (no smoothing, which would need lookahead): each
AUDIO frame is gated, classified if it survives, and answered in order.
Malformed frames get one ERROR frame and the connection is closed.
"""

from __future__ import annotations

import socketserver
import threading

from . import wire
from .audio_io import DEFAULT_GATE_DBFS, AudioSegment, gate
from .classifier import ClassifierModel, classify


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server: DiscriminatorServer = self.server
        index = 0
        while True:
            try:
                msg_type, payload = wire.read_frame(self.rfile)
            except EOFError:
                return
            except wire.FrameError as exc:
                self._fail(str(exc))
                return
            if msg_type != wire.MSG_AUDIO:
                self._fail("bad-type")
                return
            try:
                samples = wire.decode_audio_payload(payload)
            except wire.FrameError as exc:
                self._fail(str(exc))
                return
            seg = AudioSegment(samples, index)
            index += 1
            label = gate(seg, server.gate_threshold) or classify(seg, server.model)
            self.wfile.write(wire.encode_label(label.kind, label.confidence))
            self.wfile.flush()

    def _fail(self, reason: str):
        try:
            self.wfile.write(wire.encode_error(reason))
            self.wfile.flush()
        except OSError:
            pass


class DiscriminatorServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address, model: ClassifierModel, gate_threshold: float):
        self.model = model
        self.gate_threshold = gate_threshold
        super().__init__(address, _Handler)


def serve_discriminator(
    model: ClassifierModel,
    port: int,
    host: str = "127.0.0.1",
    gate_threshold: float = DEFAULT_GATE_DBFS,
    background: bool = False,
) -> DiscriminatorServer:
    """Start the packet service; pass port 0 for an ephemeral port.

    With background=True the accept loop runs in a daemon thread and the
    caller shuts it down via server.shutdown().
    """
    server = DiscriminatorServer((host, port), model, gate_threshold)
    if background:
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
    else:
        server.serve_forever()
    return server
