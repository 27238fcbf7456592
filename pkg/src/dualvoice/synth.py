"""Synthetic speech-like audio and the labeled training corpus.

Normal-voice clips are a band-limited harmonic pulse train (fundamental
100-220 Hz) through two or three formant resonators plus 1% noise;
whispered clips drive the same resonators with white noise, so the classes
differ exactly in phonation. The documented class-contrast oracle is the
normalized autocorrelation peak over the pitch-lag range: high for normal,
low for whisper.

Corpus protocol mirrors the per-user recording recipe: every phrase of the
command inventory is repeated across utterances, and utterances are split
80/20 into train/validation so no utterance straddles the split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio_io import (
    DEFAULT_GATE_DBFS,
    SAMPLE_RATE,
    SEGMENT_SAMPLES,
    LabelKind,
    power_dbfs,
    read_wav,
    segment_stream,
    write_wav,
)
from .commands import TRAINING_PHRASES

NORMAL_LEVEL_DBFS = -6.0
WHISPER_LEVEL_DBFS = -15.0
F0_MIN, F0_MAX = 100.0, 220.0
EDGE_RAMP_SAMPLES = 80  # 5 ms fade against clicks


@dataclass(frozen=True)
class SyntheticUtteranceSpec:
    mode: LabelKind  # NORMAL or WHISPER
    text: str
    duration: float  # seconds
    formants: tuple[tuple[float, float], ...]  # (center Hz, bandwidth Hz)
    level_dbfs: float
    seed: int
    f0: float | None = None  # normal mode only

    def __post_init__(self):
        if self.mode == LabelKind.WHISPER and self.f0 is not None:
            raise ValueError("whisper mode has no periodic excitation")
        if self.mode == LabelKind.NORMAL and not (F0_MIN <= self.f0 <= F0_MAX):
            raise ValueError(f"f0 {self.f0} outside [{F0_MIN}, {F0_MAX}] Hz")
        if self.level_dbfs <= DEFAULT_GATE_DBFS:
            raise ValueError(f"level {self.level_dbfs} dBFS would be gated")
        if not 2 <= len(self.formants) <= 3:
            raise ValueError("expected 2 or 3 formant resonators")


def _resonate(x: np.ndarray, formants) -> np.ndarray:
    """Cascade of two-pole resonators at the given centers/bandwidths."""
    y = x
    for center, bandwidth in formants:
        r = np.exp(-np.pi * bandwidth / SAMPLE_RATE)
        theta = 2.0 * np.pi * center / SAMPLE_RATE
        y = lfilter([1.0 - r], [1.0, -2.0 * r * np.cos(theta), r * r], y)
    return y


def _scale_to_level(x: np.ndarray, level_dbfs: float) -> np.ndarray:
    target_rms = 10.0 ** (level_dbfs / 20.0)
    for _ in range(3):  # clipping shaves energy; a couple of passes converge
        rms = np.sqrt(np.mean(x * x))
        x = np.clip(x * (target_rms / rms), -1.0, 1.0)
        if abs(20.0 * np.log10(np.sqrt(np.mean(x * x))) - level_dbfs) < 0.05:
            break
    return x


def gen_utterance(spec: SyntheticUtteranceSpec) -> np.ndarray:
    """Deterministic synthetic clip for one utterance spec."""
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.duration * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE
    if spec.mode == LabelKind.NORMAL:
        # random-phase harmonic sum with 1/k roll-off, band-limited to 7.2 kHz
        harmonics = int(0.45 * SAMPLE_RATE / spec.f0)
        phases = rng.uniform(0.0, 2.0 * np.pi, harmonics)
        excitation = np.zeros(n)
        for k in range(1, harmonics + 1):
            excitation += np.cos(2.0 * np.pi * k * spec.f0 * t + phases[k - 1]) / k
        voiced = _resonate(excitation, spec.formants)
        noise = rng.standard_normal(n)
        signal = voiced + 0.01 * np.sqrt(np.mean(voiced**2) / np.mean(noise**2)) * noise
    else:
        signal = _resonate(rng.standard_normal(n), spec.formants)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(EDGE_RAMP_SAMPLES) / EDGE_RAMP_SAMPLES)
    signal[:EDGE_RAMP_SAMPLES] *= ramp
    signal[-EDGE_RAMP_SAMPLES:] *= ramp[::-1]
    return _scale_to_level(signal, spec.level_dbfs)


def autocorrelation_peak(samples: np.ndarray) -> float:
    """Peak normalized autocorrelation over the pitch-lag range.

    This is the class-contrast oracle: phonated clips score near 1, noise
    excitation decays with the narrowest formant bandwidth.
    """
    x = np.asarray(samples, dtype=np.float64)
    lag_lo = int(SAMPLE_RATE / F0_MAX)
    lag_hi = int(np.ceil(SAMPLE_RATE / F0_MIN))
    peak = 0.0
    for lag in range(lag_lo, lag_hi + 1):
        a, b = x[:-lag], x[lag:]
        denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
        if denom > 0:
            peak = max(peak, float(np.dot(a, b) / denom))
    return peak


def draw_formants(rng: np.random.Generator) -> tuple[tuple[float, float], ...]:
    # bandwidths >= 120 Hz keep the whisper autocorrelation oracle below 0.3
    f1 = rng.uniform(350.0, 850.0)
    f2 = f1 + rng.uniform(350.0, 1100.0)
    f3 = rng.uniform(2300.0, 2900.0)
    bw = rng.uniform(120.0, 260.0, 3)
    return ((f1, bw[0]), (f2, bw[1]), (f3, bw[2]))


def draw_f0(rng: np.random.Generator) -> float:
    # integer pitch periods keep the clip exactly periodic at 16 kHz
    period = int(rng.integers(int(SAMPLE_RATE / F0_MAX) + 1, int(SAMPLE_RATE / F0_MIN)))
    return SAMPLE_RATE / period


@dataclass
class UtteranceRecord:
    uid: str
    label: LabelKind
    text: str
    split: str  # "train" | "val"
    n_segments: int
    seed: int
    level_dbfs: float
    f0: float | None

    def to_json(self) -> dict:
        return {
            "uid": self.uid,
            "label": self.label.name.lower(),
            "text": self.text,
            "split": self.split,
            "n_segments": self.n_segments,
            "seed": self.seed,
            "level_dbfs": self.level_dbfs,
            "f0": self.f0,
        }


@dataclass
class Corpus:
    """Labeled 1,600-sample clips plus the utterance ledger."""

    train: list[tuple[np.ndarray, int]] = field(default_factory=list)
    val: list[tuple[np.ndarray, int]] = field(default_factory=list)
    utterances: list[UtteranceRecord] = field(default_factory=list)
    gated_out: int = 0


def _utterance_spec(label: LabelKind, text: str, seed: int) -> SyntheticUtteranceSpec:
    rng = np.random.default_rng(seed)
    n_packets = int(rng.integers(4, 10))  # 0.4 to 0.9 s, whole packets
    return SyntheticUtteranceSpec(
        mode=label,
        text=text,
        duration=n_packets * (SEGMENT_SAMPLES / SAMPLE_RATE),
        formants=draw_formants(rng),
        level_dbfs=NORMAL_LEVEL_DBFS if label == LabelKind.NORMAL else WHISPER_LEVEL_DBFS,
        seed=seed,
        f0=draw_f0(rng) if label == LabelKind.NORMAL else None,
    )


def gen_corpus(
    n_per_class: int,
    seed: int,
    gate_threshold: float = DEFAULT_GATE_DBFS,
    out_dir: Path | str | None = None,
) -> Corpus:
    """Balanced synthetic corpus of 2*n utterances, split 80/20 by utterance.

    Per-utterance seeds derive from `seed` plus the utterance index, so
    generation order (or parallelization) cannot change the audio. With
    `out_dir` set, per-utterance WAVs and a JSON ledger are also written.
    """
    corpus = Corpus()
    split_rng = np.random.default_rng(seed)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    global_index = 0
    for label in (LabelKind.NORMAL, LabelKind.WHISPER):
        n_train = round(0.8 * n_per_class)
        splits = np.array(["train"] * n_train + ["val"] * (n_per_class - n_train))
        split_rng.shuffle(splits)
        for i in range(n_per_class):
            text = TRAINING_PHRASES[i % len(TRAINING_PHRASES)]
            spec = _utterance_spec(label, text, seed + global_index)
            samples = gen_utterance(spec)
            segments, _ = segment_stream(samples)
            kept = [s for s in segments if power_dbfs(s.samples) >= gate_threshold]
            corpus.gated_out += len(segments) - len(kept)
            record = UtteranceRecord(
                uid=f"{label.name.lower()}-{i:04d}",
                label=label,
                text=text,
                split=str(splits[i]),
                n_segments=len(kept),
                seed=spec.seed,
                level_dbfs=spec.level_dbfs,
                f0=spec.f0,
            )
            corpus.utterances.append(record)
            bucket = corpus.train if record.split == "train" else corpus.val
            bucket.extend((s.samples, int(label)) for s in kept)
            if out_path is not None:
                write_wav(out_path / f"{record.uid}.wav", samples)
            global_index += 1
    if out_path is not None:
        ledger = {
            "n_per_class": n_per_class,
            "seed": seed,
            "gate_dbfs": gate_threshold,
            "utterances": [u.to_json() for u in corpus.utterances],
        }
        (out_path / "ledger.json").write_text(
            json.dumps(ledger, indent=2), encoding="utf-8"
        )
    return corpus


def load_corpus(corpus_dir: Path | str, gate_threshold: float = DEFAULT_GATE_DBFS) -> Corpus:
    """Rebuild a Corpus from a directory written by gen_corpus."""
    corpus_dir = Path(corpus_dir)
    ledger = json.loads((corpus_dir / "ledger.json").read_text(encoding="utf-8"))
    corpus = Corpus()
    for entry in ledger["utterances"]:
        label = LabelKind[entry["label"].upper()]
        samples, _ = read_wav(corpus_dir / f"{entry['uid']}.wav")
        segments, _ = segment_stream(samples)
        kept = [s for s in segments if power_dbfs(s.samples) >= gate_threshold]
        record = UtteranceRecord(
            uid=entry["uid"],
            label=label,
            text=entry["text"],
            split=entry["split"],
            n_segments=len(kept),
            seed=entry["seed"],
            level_dbfs=entry["level_dbfs"],
            f0=entry["f0"],
        )
        corpus.utterances.append(record)
        bucket = corpus.train if record.split == "train" else corpus.val
        bucket.extend((s.samples, int(label)) for s in kept)
    return corpus
