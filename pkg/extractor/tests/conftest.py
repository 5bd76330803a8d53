import json
import wave
from pathlib import Path

import numpy as np
import pytest

CLAIMS = [
    {"claim_id": "c1", "debate_id": "d1", "speaker": "ada", "text": "We doubled the budget last year.",
     "label": "half-true", "split": "train"},
    {"claim_id": "c2", "debate_id": "d1", "speaker": "ben", "text": "He never voted for the trade deal.",
     "label": "false", "split": "train"},
    {"claim_id": "c3", "debate_id": "d2", "speaker": "ada", "text": "Exports grew in all three regions.",
     "label": "true", "split": "test"},
]


def write_wav(path: Path, samples: np.ndarray, rate: int, channels: int = 1) -> None:
    data = np.clip(samples, -1.0, 1.0)
    pcm = (data * 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(channels)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(pcm.tobytes())


def make_clip(seed: int, seconds: float, rate: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    t = np.arange(int(seconds * rate)) / rate
    tone = 0.4 * np.sin(2 * np.pi * (120 + 40 * seed) * t)
    return tone + 0.05 * rng.standard_normal(len(t))


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("fixture")
    claims_path = root / "claims.jsonl"
    claims_path.write_text("".join(json.dumps(c) + "\n" for c in CLAIMS), encoding="utf-8")

    clips = root / "clips"
    clips.mkdir()
    write_wav(clips / "c1.wav", make_clip(1, 0.8, 16000), 16000)
    write_wav(clips / "c2.wav", make_clip(2, 0.5, 8000), 8000)  # resample path
    stereo = np.column_stack([make_clip(3, 0.4, 44100), make_clip(4, 0.4, 44100)]).ravel()
    write_wav(clips / "c3.wav", stereo, 44100, channels=2)  # mixdown path

    rng = np.random.default_rng(99)
    with open(root / "ivectors.csv", "w", encoding="utf-8") as fh:
        fh.write("claim_id," + ",".join(f"f{i}" for i in range(600)) + "\n")
        for c in CLAIMS:
            vec = rng.standard_normal(600)
            fh.write(c["claim_id"] + "," + ",".join(repr(float(x)) for x in vec) + "\n")
    return root
