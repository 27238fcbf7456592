"""Command-line entry points tying the pipeline together."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .audio_io import DEFAULT_GATE_DBFS, read_wav, segment_stream, write_wav
from .classifier import Frontend, TrainConfig, load_model, save_model, train
from .commands import EventLog
from .router import label_stream, route
from .server import serve_discriminator
from .session import load_script, run_session
from .synth import gen_corpus, load_corpus


def _add_gate(parser):
    parser.add_argument(
        "--gate-db",
        type=float,
        default=DEFAULT_GATE_DBFS,
        help="silence gate threshold in dBFS (default %(default)s)",
    )


def cmd_gen_corpus(args) -> int:
    corpus = gen_corpus(args.n, args.seed, out_dir=args.out)
    print(
        f"wrote {len(corpus.utterances)} utterances "
        f"({len(corpus.train)} train / {len(corpus.val)} val segments) to {args.out}"
    )
    return 0


def cmd_train(args) -> int:
    corpus = load_corpus(args.corpus)
    frontend = Frontend.MFCC if args.frontend == "mfcc" else Frontend.CONV
    cfg = TrainConfig(seed=args.seed, epochs=args.epochs)
    started = time.perf_counter()
    model, history = train(corpus.train, corpus.val, cfg, frontend=frontend)
    elapsed = time.perf_counter() - started
    save_model(model, args.out)
    best = max(h["val_acc"] for h in history)
    print(
        f"trained {args.frontend} model in {elapsed:.1f}s over {len(history)} epochs; "
        f"best validation accuracy {best:.4f}; saved to {args.out}"
    )
    return 0


def cmd_classify(args) -> int:
    model = load_model(args.model)
    samples, _ = read_wav(args.wav)
    segments, dropped = segment_stream(samples)
    for item in label_stream(segments, model, args.gate_db):
        lab = item.smoothed_label
        print(f"{item.segment.index}\t{lab.kind.name.lower()}\t{lab.confidence:.4f}")
    if dropped:
        print(f"# dropped {dropped} trailing samples", file=sys.stderr)
    return 0


def cmd_route(args) -> int:
    model = load_model(args.model)
    samples, _ = read_wav(args.wav)
    segments, _ = segment_stream(samples)
    labeled = label_stream(segments, model, args.gate_db)
    normal_stream, whisper_stream = route(labeled)
    write_wav(args.out_normal, np.concatenate([p.samples for p in normal_stream]))
    write_wav(args.out_whisper, np.concatenate([p.samples for p in whisper_stream]))
    counts = {"normal": 0, "whisper": 0, "silence": 0}
    for item in labeled:
        counts[item.smoothed_label.kind.name.lower()] += 1
    print(
        f"routed {len(labeled)} packets: {counts['normal']} normal, "
        f"{counts['whisper']} whisper, {counts['silence']} silence"
    )
    return 0


def cmd_session_run(args) -> int:
    script = load_script(args.script)
    model = load_model(args.model)
    log = EventLog()
    report = run_session(script, model, gate_threshold=args.gate_db, log=log)
    if args.events:
        log.write(args.events)
    print(f"label accuracy: {report.label_accuracy:.3f}")
    for step in report.steps:
        print(
            f"  step {step.index} [{step.mode}] {step.text!r} "
            f"packets {step.start}-{step.end} accuracy {step.accuracy:.2f}"
        )
    for warning in report.warnings:
        print(f"  warning: {warning}")
    print(f"final document: {report.final_document!r}")
    if report.passed:
        print("PASS: document matches expected")
        return 0
    print(f"FAIL: {report.first_divergence}")
    return 0 if args.loose else 1


def cmd_serve(args) -> int:
    model = load_model(args.model)
    print(f"serving discriminator on {args.host}:{args.port}")
    serve_discriminator(model, args.port, host=args.host, gate_threshold=args.gate_db)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualvoice",
        description="dual-stream speech interaction engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="synthesize a labeled training corpus")
    p.add_argument("--n", type=int, required=True, help="utterances per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train", help="train a whisper/normal classifier")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--frontend", choices=("mfcc", "conv"), default="mfcc")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=50)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="label each packet of a WAV file")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--wav", type=Path, required=True)
    _add_gate(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("route", help="split a WAV into normal/whisper streams")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--wav", type=Path, required=True)
    p.add_argument("--out-normal", type=Path, required=True)
    p.add_argument("--out-whisper", type=Path, required=True)
    _add_gate(p)
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("session", help="scripted end-to-end sessions")
    session_sub = p.add_subparsers(dest="session_command", required=True)
    run_p = session_sub.add_parser("run", help="run a session script")
    run_p.add_argument("script", type=Path)
    run_p.add_argument("--model", type=Path, required=True)
    run_p.add_argument("--events", type=Path, help="write the event log as JSON lines")
    run_p.add_argument(
        "--loose",
        action="store_true",
        help="exit 0 even when the document mismatches (console driver mode)",
    )
    _add_gate(run_p)
    run_p.set_defaults(func=cmd_session_run)

    p = sub.add_parser("serve", help="run the TCP packet discriminator")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--model", type=Path, required=True)
    _add_gate(p)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
