#!/usr/bin/env python3
"""Train both front-ends on one synthetic corpus and compare accuracies.

Also dumps the pooled pre-output feature vectors of the MFCC model to CSV
for external 2-D projection (t-SNE, PCA, ...).

Usage: python scripts/train_and_eval.py [--n 200] [--seed 7] [--out results/]
"""

import argparse
import time
from pathlib import Path

from dualvoice.classifier import Frontend, TrainConfig, evaluate, export_features, save_model, train
from dualvoice.synth import gen_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200, help="utterances per class")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--conv-epochs", type=int, default=2)
    parser.add_argument("--out", type=Path, default=Path("results"))
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    print(f"generating corpus: {args.n} utterances/class, seed {args.seed}")
    corpus = gen_corpus(args.n, seed=args.seed)
    print(f"  {len(corpus.train)} train / {len(corpus.val)} validation segments")

    results = {}
    for frontend, cfg in (
        (Frontend.MFCC, TrainConfig(seed=0)),
        (Frontend.CONV, TrainConfig(seed=0, epochs=args.conv_epochs)),
    ):
        name = frontend.name.lower()
        started = time.perf_counter()
        model, history = train(corpus.train, corpus.val, cfg, frontend=frontend)
        elapsed = time.perf_counter() - started
        _, acc = evaluate(model, corpus.val)
        results[name] = acc
        save_model(model, args.out / f"{name}.dvm")
        print(f"{name}: accuracy {acc:.4f} ({len(history)} epochs, {elapsed:.1f}s)")
        if frontend == Frontend.MFCC:
            export_features(corpus.val, model, args.out / "features_mfcc.csv")

    print()
    print(f"{'front-end':<12} accuracy")
    for name, acc in results.items():
        print(f"{name:<12} {acc:.4f}")
    delta = results["conv"] - results["mfcc"]
    print(f"conv - mfcc = {delta:+.4f}")


if __name__ == "__main__":
    main()
