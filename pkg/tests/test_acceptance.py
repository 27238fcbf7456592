"""Acceptance criteria, one test per criterion.

Each test prints a single `ACCEPTANCE <name>: PASS|FAIL (...)` line; run
with `pytest tests/test_acceptance.py -v -s` to see them. The front-end
comparison criterion is reported, not gated, and never fails the suite.
"""

import functools
import io
import socket
import time
from pathlib import Path

import numpy as np
import pytest

from dualvoice import wire
from dualvoice.audio_io import SEGMENT_SAMPLES, AudioSegment, LabelKind, SegmentLabel, segment_stream
from dualvoice.classifier import (
    Frontend,
    TrainConfig,
    evaluate,
    grad_check,
    init_model,
    train,
    zero_model,
)
from dualvoice.features import (
    CONV_KERNELS,
    CONV_STRIDES,
    ConvBlock,
    ConvStackSpec,
    conv_forward,
    frame_count,
    init_conv_weights,
)
from dualvoice.metrics import edit_distance, wer
from dualvoice.router import label_stream, route
from dualvoice.router import LabeledSegment
from dualvoice.server import serve_discriminator
from dualvoice.session import load_script, run_session
from dualvoice.synth import gen_corpus

SCENARIOS = Path(__file__).parent.parent / "scenarios"
GOLDEN = Path(__file__).parent / "data" / "golden"

CORPUS_N = 500
CORPUS_SEED = 7


def _report(name: str, passed: bool, detail: str) -> bool:
    print(f"\nACCEPTANCE {name}: {'PASS' if passed else 'FAIL'} ({detail})")
    return passed


@pytest.fixture(scope="module")
def corpus500():
    return gen_corpus(CORPUS_N, seed=CORPUS_SEED)


@pytest.fixture(scope="module")
def mfcc_result(corpus500):
    started = time.perf_counter()
    model, history = train(
        corpus500.train, corpus500.val, TrainConfig(seed=0), frontend=Frontend.MFCC
    )
    elapsed = time.perf_counter() - started
    _, accuracy = evaluate(model, corpus500.val)
    return model, accuracy, elapsed, history


@pytest.fixture(scope="module")
def conv_accuracy(corpus500):
    # the synthetic task converges within two joint epochs on a CPU
    model, _ = train(
        corpus500.train,
        corpus500.val,
        TrainConfig(seed=0, epochs=2),
        frontend=Frontend.CONV,
    )
    _, accuracy = evaluate(model, corpus500.val)
    return accuracy


def test_classifier_accuracy(mfcc_result):
    _, accuracy, elapsed, _ = mfcc_result
    passed = accuracy >= 0.95 and elapsed <= 300.0
    _report(
        "classifier-accuracy",
        passed,
        f"held-out accuracy {accuracy:.4f} >= 0.95, "
        f"n={CORPUS_N}/class seed={CORPUS_SEED} MFCC, trained in {elapsed:.1f}s <= 300s",
    )
    assert passed


def test_frontend_comparison(mfcc_result, conv_accuracy):
    _, mfcc_acc, _, _ = mfcc_result
    passed = conv_accuracy >= mfcc_acc - 0.02
    _report(
        "frontend-comparison",
        passed,
        f"conv {conv_accuracy:.4f} vs mfcc {mfcc_acc:.4f} - 0.02; reported, not gated",
    )
    # soft check by design: the ordering is reported, never enforced


def test_gradient_correctness():
    seeds = (0, 1, 2, 3, 4)
    worst_mfcc = 0.0
    worst_conv = 0.0
    for seed in seeds:
        rng = np.random.default_rng(1000 + seed)
        model = init_model(Frontend.MFCC, seed=seed)
        err = grad_check(model, rng.uniform(-0.5, 0.5, (8, 1600)), rng.integers(0, 2, 8))
        worst_mfcc = max(worst_mfcc, err)
        conv_model = init_model(Frontend.CONV, seed=seed)
        err = grad_check(
            conv_model,
            rng.uniform(-0.5, 0.5, (4, 400)),
            rng.integers(0, 2, 4),
            max_checks=400,
            seed=seed,
        )
        worst_conv = max(worst_conv, err)
    passed = worst_mfcc < 1e-4 and worst_conv < 1e-3
    _report(
        "gradient-correctness",
        passed,
        f"max rel err over 5 seeds: mfcc {worst_mfcc:.2e} < 1e-4, conv {worst_conv:.2e} < 1e-3",
    )
    assert passed


def test_stream_complementarity():
    rng = np.random.default_rng(99)
    kinds = (LabelKind.NORMAL, LabelKind.WHISPER, LabelKind.SILENCE)
    checked = 0
    for _ in range(1000):
        length = int(rng.integers(1, 201))
        labeled = []
        for i in range(length):
            kind = kinds[rng.integers(0, 3)]
            samples = rng.uniform(-0.9, 0.9, SEGMENT_SAMPLES)
            label = SegmentLabel(kind, 1.0)
            labeled.append(LabeledSegment(AudioSegment(samples, i), label, label))
        normal, whisper = route(labeled)
        zeros = np.zeros(SEGMENT_SAMPLES)
        for item, n, w in zip(labeled, normal, whisper):
            gated = (
                item.segment.samples
                if item.smoothed_label.kind != LabelKind.SILENCE
                else zeros
            )
            assert np.array_equal(n.samples + w.samples, gated)
        assert len(normal) == len(whisper) == length
        checked += 1
    _report(
        "stream-complementarity",
        True,
        f"{checked} random label sequences reconstruct the gated input exactly",
    )


def test_conv_geometry():
    # channel count cannot change output length; a 1-channel stack makes the
    # exhaustive 0..48,000 sweep tractable at a desk
    thin = ConvStackSpec(
        tuple(ConvBlock(1, k, s) for k, s in zip(CONV_KERNELS, CONV_STRIDES))
    )
    weights = init_conv_weights(thin, np.random.default_rng(0))
    mismatches = 0
    for n in range(0, 48_001):
        emitted = conv_forward(np.zeros((1, n)), thin, weights).shape[1]
        if emitted != frame_count(n, thin):
            mismatches += 1
    desk = ConvStackSpec.desk_scale()
    desk_weights = init_conv_weights(desk, np.random.default_rng(1))
    spot = {
        n: conv_forward(np.zeros((1, n)), desk, desk_weights).shape[1]
        for n in (400, 1600, 16_000)
    }
    passed = (
        mismatches == 0
        and spot[400] == 1
        and spot[1600] == 4
        and spot[16_000] == 49
    )
    _report(
        "conv-geometry",
        passed,
        f"0 mismatches over lengths 0..48000; 16000 samples -> {spot[16_000]} frames",
    )
    assert passed


@functools.cache
def _brute(a: tuple, b: tuple) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(
        _brute(a[1:], b) + 1,
        _brute(a, b[1:]) + 1,
        _brute(a[1:], b[1:]) + (a[0] != b[0]),
    )


def test_wer_cer_oracle():
    rng = np.random.default_rng(2024)
    alphabet = list("abcde")
    exact = 0
    for _ in range(500):
        ref = tuple(rng.choice(alphabet) for _ in range(rng.integers(0, 21)))
        hyp = tuple(rng.choice(alphabet) for _ in range(rng.integers(0, 21)))
        if edit_distance(ref, hyp) == _brute(ref, hyp):
            exact += 1
    fixed = wer("a b c d", "a x c d")
    passed = exact == 500 and fixed == 0.25
    _report(
        "wer-cer-oracle",
        passed,
        f"{exact}/500 random pairs match brute force; substitution case = {fixed}",
    )
    assert passed


def test_end_to_end_sessions(mfcc_result):
    model = mfcc_result[0]
    names = ("menu_correction", "symbol_entry", "spell_word", "emoji_entry")
    started = time.perf_counter()
    results = {}
    for name in names:
        report = run_session(load_script(SCENARIOS / f"{name}.json"), model)
        results[name] = report
    elapsed = time.perf_counter() - started
    all_passed = all(r.passed for r in results.values())
    passed = all_passed and elapsed < 30.0
    detail = ", ".join(f"{n}={'ok' if r.passed else 'FAIL'}" for n, r in results.items())
    _report("end-to-end-sessions", passed, f"{detail}; total {elapsed:.1f}s < 30s")
    for name, report in results.items():
        assert report.passed, f"{name}: {report.first_divergence}"
    assert elapsed < 30.0


def test_throughput(mfcc_result):
    model = mfcc_result[0]
    rng = np.random.default_rng(5)
    # 600 packets (60 s of audio): speech bursts with silence gaps
    blocks = []
    for _ in range(60):
        blocks.append(rng.uniform(-0.5, 0.5, 7 * SEGMENT_SAMPLES))
        blocks.append(np.zeros(3 * SEGMENT_SAMPLES))
    segments, _ = segment_stream(np.concatenate(blocks))
    started = time.perf_counter()
    labeled = label_stream(segments, model)
    route(labeled)
    elapsed = time.perf_counter() - started
    rate = len(segments) / elapsed
    passed = rate >= 100.0
    _report(
        "throughput",
        passed,
        f"{rate:.0f} packets/s over {len(segments)} packets (>= 100/s, 10x real time)",
    )
    assert passed


def test_wire_protocol():
    server = serve_discriminator(zero_model(), port=0, background=True)
    cases = ("audio_silence", "audio_tone", "bad_length", "bad_type", "oversized")
    try:
        byte_exact = 0
        for case in cases:
            request = (GOLDEN / f"req_{case}.bin").read_bytes()
            expected = (GOLDEN / f"reply_{case}.bin").read_bytes()
            with socket.create_connection(server.server_address, timeout=5.0) as sock:
                sock.sendall(request)
                sock.shutdown(socket.SHUT_WR)
                got = b""
                while True:
                    chunk = sock.recv(65536)
                    if not chunk:
                        break
                    got += chunk
            if got == expected:
                byte_exact += 1
        # malformed frame must also close the connection
        with socket.create_connection(server.server_address, timeout=5.0) as sock:
            sock.sendall((GOLDEN / "req_bad_length.bin").read_bytes())
            reply = sock.recv(65536)
            closed = sock.recv(65536) == b""
        error_type = wire.read_frame(io.BytesIO(reply))[0] == wire.MSG_ERROR
    finally:
        server.shutdown()
        server.server_close()
    passed = byte_exact == len(cases) and closed and error_type
    _report(
        "wire-protocol",
        passed,
        f"{byte_exact}/{len(cases)} golden exchanges byte-exact; "
        f"malformed frame -> ERROR and close",
    )
    assert passed
