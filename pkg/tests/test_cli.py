import json
import socket
from pathlib import Path

import numpy as np
import pytest

from dualvoice import wire
from dualvoice.audio_io import LabelKind, read_wav, write_wav
from dualvoice.cli import main
from dualvoice.classifier import load_model, save_model
from dualvoice.server import serve_discriminator
from dualvoice.session import load_script, script_to_dict
from dualvoice.synth import SyntheticUtteranceSpec, draw_f0, draw_formants, gen_utterance

SCENARIOS = Path(__file__).parent.parent / "scenarios"


@pytest.fixture(scope="module")
def model_path(tmp_path_factory, small_model):
    path = tmp_path_factory.mktemp("cli") / "model.dvm"
    save_model(small_model, path)
    return path


def test_gen_corpus_and_train(tmp_path, capsys):
    corpus_dir = tmp_path / "corpus"
    assert main(["gen-corpus", "--n", "8", "--seed", "5", "--out", str(corpus_dir)]) == 0
    ledger = json.loads((corpus_dir / "ledger.json").read_text())
    assert len(ledger["utterances"]) == 16

    out_model = tmp_path / "m.dvm"
    args = ["train", "--corpus", str(corpus_dir), "--frontend", "mfcc",
            "--out", str(out_model), "--epochs", "4"]
    assert main(args) == 0
    assert load_model(out_model).feature_dim == 13
    assert "best validation accuracy" in capsys.readouterr().out


def test_classify_and_route(model_path, tmp_path, capsys):
    rng = np.random.default_rng(3)
    spec = SyntheticUtteranceSpec(
        mode=LabelKind.NORMAL,
        text="probe",
        duration=0.5,
        formants=draw_formants(rng),
        level_dbfs=-6.0,
        seed=3,
        f0=draw_f0(rng),
    )
    wav = tmp_path / "in.wav"
    write_wav(wav, np.concatenate([gen_utterance(spec), np.zeros(3200)]))

    assert main(["classify", "--model", str(model_path), "--wav", str(wav)]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l]
    assert len(lines) == 7
    assert lines[-1].split("\t")[1] == "silence"

    out_n, out_w = tmp_path / "n.wav", tmp_path / "w.wav"
    args = ["route", "--model", str(model_path), "--wav", str(wav),
            "--out-normal", str(out_n), "--out-whisper", str(out_w)]
    assert main(args) == 0
    normal, _ = read_wav(out_n)
    whisper, _ = read_wav(out_w)
    assert len(normal) == len(whisper) == 7 * 1600
    assert np.any(normal) and not np.any(whisper)


def test_session_run_cli(model_path, tmp_path, capsys):
    events = tmp_path / "events.jsonl"
    args = ["session", "run", str(SCENARIOS / "symbol_entry.json"),
            "--model", str(model_path), "--events", str(events)]
    assert main(args) == 0
    assert "PASS" in capsys.readouterr().out
    records = [json.loads(line) for line in events.read_text().splitlines()]
    assert records[0]["seq"] == 1
    assert any(r["kind"] == "editor_state" for r in records)


def test_session_run_failure_exit_code(model_path, tmp_path, capsys):
    doc = script_to_dict(load_script(SCENARIOS / "symbol_entry.json"))
    doc["expected"] = "wrong"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["session", "run", str(bad), "--model", str(model_path)]) == 1
    assert main(["session", "run", str(bad), "--model", str(model_path), "--loose"]) == 0


def test_serve_smoke(model_path):
    server = serve_discriminator(load_model(model_path), port=0, background=True)
    try:
        with socket.create_connection(server.server_address, timeout=5.0) as sock:
            sock.sendall(wire.encode_audio(np.zeros(1600)))
            msg_type, payload = wire.read_frame(sock.makefile("rb"))
            assert msg_type == wire.MSG_LABEL
            kind, confidence = wire.decode_label_payload(payload)
            assert kind == LabelKind.SILENCE
            assert confidence == 1.0
    finally:
        server.shutdown()
        server.server_close()
