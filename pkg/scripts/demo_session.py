#!/usr/bin/env python3
"""Run the bundled interaction scenarios end to end and print the documents.

Trains a small MFCC classifier first (a few seconds), then pushes each
scenario's synthesized audio through gate, classifier, smoothing, routing,
recognition, and the command engine.

Usage: python scripts/demo_session.py [--model model.dvm]
"""

import argparse
from pathlib import Path

from dualvoice.classifier import Frontend, TrainConfig, load_model, train
from dualvoice.session import load_script, run_session
from dualvoice.synth import gen_corpus

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", type=Path, help="reuse a trained model file")
    args = parser.parse_args()

    if args.model:
        model = load_model(args.model)
    else:
        print("training a small classifier on a synthetic corpus...")
        corpus = gen_corpus(60, seed=3)
        model, _ = train(
            corpus.train, corpus.val, TrainConfig(seed=0, patience=15), frontend=Frontend.MFCC
        )

    for path in sorted(SCENARIOS.glob("*.json")):
        report = run_session(load_script(path), model)
        status = "PASS" if report.passed else f"FAIL ({report.first_divergence})"
        print(f"\n{path.stem}: {status}")
        print(f"  label accuracy: {report.label_accuracy:.3f}")
        print(f"  document: {report.final_document!r}")


if __name__ == "__main__":
    main()
