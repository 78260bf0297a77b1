"""WAV loading: mono float32 at 16 kHz, resampling when needed."""

from __future__ import annotations

import math

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

TARGET_RATE = 16_000

_INT_SCALES = {
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
    np.dtype(np.uint8): 128.0,
}


class AudioError(Exception):
    """Audio file could not be read or converted."""


def load_waveform(path) -> np.ndarray:
    """Read a WAV file as mono float32 at 16 kHz."""
    try:
        rate, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        raise AudioError(f"cannot read {path}: {exc}") from exc
    if data.size == 0:
        raise AudioError(f"{path} contains no samples")

    if data.dtype in _INT_SCALES:
        scale = _INT_SCALES[data.dtype]
        offset = scale if data.dtype == np.dtype(np.uint8) else 0.0
        wav = (data.astype(np.float64) - offset) / scale
    else:
        wav = data.astype(np.float64)
    if wav.ndim == 2:
        wav = wav.mean(axis=1)

    if rate != TARGET_RATE:
        divisor = math.gcd(rate, TARGET_RATE)
        wav = resample_poly(wav, TARGET_RATE // divisor, rate // divisor)
    return wav.astype(np.float32)
