"""Scripted end-to-end sessions: audio in, edited document out.

Each step of a script is synthesized as a normal or whispered utterance,
the concatenated stream runs through gate, classifier, smoothing, routing,
and utterance recognition (mock, scripted by the step ledger), and the
merged transcript events drive the command engine. A session passes when
the final document equals the expected text byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import (
    DEFAULT_GATE_DBFS,
    SAMPLE_RATE,
    SEGMENT_SAMPLES,
    LabelKind,
    segment_stream,
)
from .classifier import ClassifierModel
from .commands import CommandEngine, EventLog
from .gateway import (
    MockRecognizer,
    MockUtterance,
    UtteranceBoundaryRule,
    recognize_stream,
)
from .router import Channel, label_stream, route
from .synth import (
    NORMAL_LEVEL_DBFS,
    WHISPER_LEVEL_DBFS,
    SyntheticUtteranceSpec,
    draw_f0,
    draw_formants,
    gen_utterance,
)

GAP_PACKETS = 4  # inter-utterance silence, > the 300 ms endpointing rule


@dataclass(frozen=True)
class SessionStep:
    """One spoken step. `reported` scripts a misrecognition: the recognizer
    reports it instead of `text`, with the true text wherever the
    alternatives list ranks it."""

    mode: LabelKind  # NORMAL or WHISPER
    text: str
    reported: str | None = None
    alternatives: tuple[str, ...] = ()

    @property
    def transcript(self) -> str:
        return self.reported if self.reported is not None else self.text

    @property
    def candidate_list(self) -> tuple[str, ...]:
        return self.alternatives or (self.transcript,)


@dataclass
class SessionScript:
    steps: list[SessionStep]
    expected: str
    seed: int = 0

    def __post_init__(self):
        if not self.steps:
            raise ValueError("script needs at least one step")
        if self.expected is None:
            raise ValueError("expected document must not be null")


def script_from_dict(doc: dict) -> SessionScript:
    steps = []
    for raw in doc["steps"]:
        steps.append(
            SessionStep(
                mode=LabelKind[raw["mode"].upper()],
                text=raw["text"],
                reported=raw.get("reported"),
                alternatives=tuple(raw.get("alternatives", ())),
            )
        )
    return SessionScript(steps=steps, expected=doc["expected"], seed=doc.get("seed", 0))


def load_script(path) -> SessionScript:
    return script_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def script_to_dict(script: SessionScript) -> dict:
    return {
        "seed": script.seed,
        "steps": [
            {
                "mode": s.mode.name.lower(),
                "text": s.text,
                **({"reported": s.reported} if s.reported is not None else {}),
                **({"alternatives": list(s.alternatives)} if s.alternatives else {}),
            }
            for s in script.steps
        ],
        "expected": script.expected,
    }


def _step_packets(text: str) -> int:
    return max(3, min(12, 2 + (len(text) + 5) // 6))


def synthesize_session(script: SessionScript):
    """Audio for the whole script plus the mock-recognizer ledger.

    Utterance durations are whole packets and steps are separated by
    GAP_PACKETS of digital silence, so every packet belongs to exactly one
    utterance and spans match the ledger ranges exactly.
    """
    chunks: list[np.ndarray] = []
    ledger: list[MockUtterance] = []
    expected_kinds: list[LabelKind] = []
    cursor = 0
    gap = np.zeros(GAP_PACKETS * SEGMENT_SAMPLES)
    for i, step in enumerate(script.steps):
        rng = np.random.default_rng(script.seed * 100_003 + i)
        n_packets = _step_packets(step.text)
        spec = SyntheticUtteranceSpec(
            mode=step.mode,
            text=step.text,
            duration=n_packets * (SEGMENT_SAMPLES / SAMPLE_RATE),
            formants=draw_formants(rng),
            level_dbfs=NORMAL_LEVEL_DBFS
            if step.mode == LabelKind.NORMAL
            else WHISPER_LEVEL_DBFS,
            seed=int(rng.integers(0, 2**31)),
            f0=draw_f0(rng) if step.mode == LabelKind.NORMAL else None,
        )
        chunks.append(gen_utterance(spec))
        channel = (
            Channel.NORMAL_STREAM
            if step.mode == LabelKind.NORMAL
            else Channel.WHISPER_STREAM
        )
        ledger.append(
            MockUtterance(
                channel=channel,
                start=cursor,
                end=cursor + n_packets - 1,
                text=step.transcript,
                alternatives=step.candidate_list,
            )
        )
        expected_kinds.extend([step.mode] * n_packets)
        chunks.append(gap)
        expected_kinds.extend([LabelKind.SILENCE] * GAP_PACKETS)
        cursor += n_packets + GAP_PACKETS
    return np.concatenate(chunks), ledger, expected_kinds


@dataclass
class StepReport:
    index: int
    mode: str
    text: str
    start: int
    end: int
    labels: list[str]
    accuracy: float


@dataclass
class SessionReport:
    final_document: str
    expected: str
    passed: bool
    label_accuracy: float
    steps: list[StepReport]
    first_divergence: str | None
    warnings: list[str] = field(default_factory=list)


def _first_divergence(expected: str, actual: str) -> str:
    limit = min(len(expected), len(actual))
    pos = next((i for i in range(limit) if expected[i] != actual[i]), limit)
    return (
        f"documents diverge at character {pos}: "
        f"expected {expected[pos : pos + 20]!r}, got {actual[pos : pos + 20]!r}"
    )


def run_session(
    script: SessionScript,
    model: ClassifierModel,
    gate_threshold: float = DEFAULT_GATE_DBFS,
    rule: UtteranceBoundaryRule = UtteranceBoundaryRule(),
    log: EventLog | None = None,
) -> SessionReport:
    samples, ledger, expected_kinds = synthesize_session(script)
    segments, _ = segment_stream(samples)
    labeled = label_stream(segments, model, gate_threshold)
    if log is not None:
        for item in labeled:
            log.emit(
                "label",
                {
                    "index": item.segment.index,
                    "kind": item.smoothed_label.kind.name.lower(),
                    "confidence": round(item.smoothed_label.confidence, 6),
                },
            )
    normal_stream, whisper_stream = route(labeled)
    recognizer = MockRecognizer(ledger)
    events = (
        recognize_stream(normal_stream, recognizer, rule).events
        + recognize_stream(whisper_stream, recognizer, rule).events
    )
    engine = CommandEngine(log=log)
    engine.apply_events(events)

    kinds = [item.smoothed_label.kind for item in labeled]
    steps = []
    speech_total = speech_correct = 0
    for i, (step, entry) in enumerate(zip(script.steps, ledger)):
        got = kinds[entry.start : entry.end + 1]
        correct = sum(1 for k in got if k == step.mode)
        speech_total += len(got)
        speech_correct += correct
        steps.append(
            StepReport(
                index=i,
                mode=step.mode.name.lower(),
                text=step.text,
                start=entry.start,
                end=entry.end,
                labels=[k.name.lower() for k in got],
                accuracy=correct / len(got),
            )
        )
    final = engine.state.text
    passed = final == script.expected
    return SessionReport(
        final_document=final,
        expected=script.expected,
        passed=passed,
        label_accuracy=speech_correct / speech_total if speech_total else 1.0,
        steps=steps,
        first_divergence=None if passed else _first_divergence(script.expected, final),
        warnings=list(engine.warnings),
    )
