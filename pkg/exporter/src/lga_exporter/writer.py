"""Standalone LGA1 container writer.

Implements the published byte layout directly so the exporter depends
only on the format, not on the decoder toolkit's code:

    bytes 0-3   ASCII magic "LGA1"
    bytes 4-7   u32 little-endian header length
    bytes 8-..  UTF-8 JSON header (format_version, meta, vocab, tensors)
    payload     float32 little-endian row-major sections, offsets relative
                to the payload start and 64-byte aligned
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

MAGIC = b"LGA1"
FORMAT_VERSION = 1
ALIGNMENT = 64


@dataclass
class DumpPayload:
    """Everything that goes into one utterance dump."""

    model_name: str
    sample_id: str
    reference_text: str | None
    hidden_states: np.ndarray  # [L+1, T, d]
    head_weight: np.ndarray  # [C, d]
    head_bias: np.ndarray  # [C]
    tokens: list[str]
    blank_id: int
    word_delimiter_id: int
    unk_id: int | None
    attentions: np.ndarray | None = None  # [L, heads, T, T]


def _f32(values: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=np.float32)


def _align(offset: int) -> int:
    return (offset + ALIGNMENT - 1) // ALIGNMENT * ALIGNMENT


def write_lga(payload: DumpPayload, sink: BinaryIO) -> int:
    """Serialize a dump; returns the number of bytes written."""
    hidden = _f32(payload.hidden_states)
    weight = _f32(payload.head_weight)
    bias = _f32(payload.head_bias)
    layers_plus_1, seq_len, hidden_dim = hidden.shape
    if weight.shape != (len(payload.tokens), hidden_dim):
        raise ValueError(
            f"head weight {weight.shape} inconsistent with vocab "
            f"{len(payload.tokens)} and hidden dim {hidden_dim}"
        )

    tensors = [("hidden_states", hidden)]
    if payload.attentions is not None:
        tensors.append(("attentions", _f32(payload.attentions)))
    tensors.append(("head_weight", weight))
    tensors.append(("head_bias", bias))

    directory = []
    offset = 0
    for name, arr in tensors:
        offset = _align(offset)
        directory.append(
            {
                "name": name,
                "dtype": "f32",
                "shape": list(arr.shape),
                "offset": offset,
                "byte_len": arr.nbytes,
            }
        )
        offset += arr.nbytes

    header = {
        "format_version": FORMAT_VERSION,
        "meta": {
            "format_version": FORMAT_VERSION,
            "model_name": payload.model_name,
            "num_layers": layers_plus_1 - 1,
            "seq_len": seq_len,
            "hidden_dim": hidden_dim,
            "sample_id": payload.sample_id,
            "reference_text": payload.reference_text,
        },
        "vocab": {
            "tokens": list(payload.tokens),
            "blank_id": payload.blank_id,
            "word_delimiter_id": payload.word_delimiter_id,
            "unk_id": payload.unk_id,
        },
        "tensors": directory,
    }
    header_bytes = json.dumps(header, separators=(",", ":"), ensure_ascii=True).encode(
        "utf-8"
    )

    written = sink.write(MAGIC)
    written += sink.write(len(header_bytes).to_bytes(4, "little"))
    written += sink.write(header_bytes)
    cursor = 0
    for entry, (_, arr) in zip(directory, tensors):
        if entry["offset"] > cursor:
            written += sink.write(b"\x00" * (entry["offset"] - cursor))
            cursor = entry["offset"]
        written += sink.write(arr.tobytes(order="C"))
        cursor += arr.nbytes
    return written


def save_lga(payload: DumpPayload, path) -> int:
    with open(path, "wb") as fh:
        return write_lga(payload, fh)
