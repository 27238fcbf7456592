"""DualVoice-style dual-stream speech interaction engine.

Packets of 100 ms audio are gated, classified as whispered or normal
speech, routed into two complementary streams, recognized per channel, and
interpreted: normal voice inserts text, whispered phrases execute editing
commands.
"""

from .audio_io import (
    AudioSegment,
    LabelKind,
    SegmentLabel,
    StreamSegmenter,
    gate,
    read_wav,
    segment_power_dbfs,
    segment_stream,
    write_wav,
)
from .classifier import (
    ClassifierModel,
    Frontend,
    TrainConfig,
    classify,
    export_features,
    grad_check,
    load_model,
    save_model,
    train,
)
from .commands import CommandEngine, EditorState, EventLog, default_grammar
from .features import ConvStackSpec, FeatureSequence, conv_extract, frame_count, mfcc
from .gateway import (
    ExternalBackend,
    MockRecognizer,
    MockUtterance,
    TranscriptEvent,
    UtteranceBoundaryRule,
    segment_utterances,
)
from .metrics import cer, edit_distance, wer
from .router import Channel, LabeledSegment, RoutedPacket, label_stream, route
from .server import serve_discriminator
from .session import SessionReport, SessionScript, SessionStep, load_script, run_session
from .synth import Corpus, SyntheticUtteranceSpec, gen_corpus, gen_utterance

__all__ = [
    "AudioSegment",
    "Channel",
    "ClassifierModel",
    "CommandEngine",
    "ConvStackSpec",
    "Corpus",
    "EditorState",
    "EventLog",
    "ExternalBackend",
    "FeatureSequence",
    "Frontend",
    "LabelKind",
    "LabeledSegment",
    "MockRecognizer",
    "MockUtterance",
    "RoutedPacket",
    "SegmentLabel",
    "SessionReport",
    "SessionScript",
    "SessionStep",
    "StreamSegmenter",
    "SyntheticUtteranceSpec",
    "TrainConfig",
    "TranscriptEvent",
    "UtteranceBoundaryRule",
    "cer",
    "classify",
    "conv_extract",
    "default_grammar",
    "edit_distance",
    "export_features",
    "frame_count",
    "gate",
    "gen_corpus",
    "gen_utterance",
    "grad_check",
    "label_stream",
    "load_model",
    "load_script",
    "mfcc",
    "read_wav",
    "route",
    "run_session",
    "save_model",
    "segment_power_dbfs",
    "segment_stream",
    "segment_utterances",
    "serve_discriminator",
    "train",
    "wer",
    "write_wav",
]
