"""Session fixtures: tiny checkpoint plus a synthetic WAV corpus."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.io import wavfile

from lga_exporter.tiny import build_tiny_model


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    return build_tiny_model(tmp_path_factory.mktemp("tiny-model"), seed=0)


def synth_wave(seed: int, seconds: float = 0.25, rate: int = 16_000) -> np.ndarray:
    """Deterministic tone mixture with noise, int16 range."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(seconds * rate)) / rate
    wave = np.zeros_like(t)
    for _ in range(3):
        freq = rng.uniform(80, 3000)
        wave += rng.uniform(0.1, 0.4) * np.sin(2 * np.pi * freq * t + rng.uniform(0, 6))
    wave += rng.normal(scale=0.05, size=t.shape)
    wave /= np.abs(wave).max() * 1.1
    return (wave * 32767).astype(np.int16)


@pytest.fixture(scope="session")
def audio_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("audio")
    for i in range(5):
        wavfile.write(directory / f"utt{i}.wav", 16_000, synth_wave(seed=100 + i))
    return directory


@pytest.fixture(scope="session")
def audio_8k(tmp_path_factory):
    directory = tmp_path_factory.mktemp("audio8k")
    path = directory / "low.wav"
    wavfile.write(path, 8_000, synth_wave(seed=7, rate=8_000))
    return path
