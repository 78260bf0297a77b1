"""Reader/writer for the LGA1 model-dump container.

An LGA1 file carries everything the decoding toolkit needs for one
utterance: per-layer hidden states, optional attention maps, the linear
projection head and the vocabulary.  The layout is bit-exact so dumps can
be produced by any exporter in any language:

    bytes 0-3   ASCII magic ``LGA1``
    bytes 4-7   u32 little-endian header length
    bytes 8-..  UTF-8 JSON header (meta, vocab, tensor directory)
    payload     concatenated float32 little-endian row-major tensor
                sections; offsets are relative to the payload start and
                64-byte aligned

One utterance per file; batches are directories of ``.lga`` files.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

MAGIC = b"LGA1"
FORMAT_VERSION = 1

_ALIGNMENT = 64
_ATTENTION_ROW_SUM_TOL = 1e-4
_ATTENTION_RANGE_TOL = 1e-6


class DumpError(Exception):
    """Base class for container failures."""


class DumpFormatError(DumpError):
    """Byte stream is not a well-formed LGA1 container."""


class DumpValidationError(DumpError):
    """Container parsed but the contents violate a dump invariant."""


@dataclass
class DumpMeta:
    """Identifying metadata for one utterance dump."""

    model_name: str
    num_layers: int
    seq_len: int
    hidden_dim: int
    sample_id: str
    reference_text: str | None = None
    format_version: int = FORMAT_VERSION

    def validate(self) -> None:
        if self.format_version != FORMAT_VERSION:
            raise DumpValidationError(
                f"unsupported format_version {self.format_version}"
            )
        if self.num_layers < 1:
            raise DumpValidationError("num_layers must be >= 1")
        if self.seq_len < 1:
            raise DumpValidationError("seq_len must be >= 1")
        if self.hidden_dim < 1:
            raise DumpValidationError("hidden_dim must be >= 1")


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token inventory with the special CTC indices."""

    tokens: tuple[str, ...]
    blank_id: int
    word_delimiter_id: int
    unk_id: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def validate(self) -> None:
        if len(set(self.tokens)) != len(self.tokens):
            raise DumpValidationError("vocabulary tokens must be unique")
        if self.blank_id == self.word_delimiter_id:
            raise DumpValidationError("blank_id must differ from word_delimiter_id")
        ids = [self.blank_id, self.word_delimiter_id]
        if self.unk_id is not None:
            ids.append(self.unk_id)
        for i in ids:
            if not 0 <= i < len(self.tokens):
                raise DumpValidationError(f"special token index {i} out of range")

    def render(self, token_ids) -> str:
        """Render collapsed token ids to text.

        The word delimiter maps to a space; leading/trailing delimiters and
        delimiter runs normalize away, matching both the scoring
        normalization and the upstream tokenizers' decode convention.
        """
        pieces = [
            " " if i == self.word_delimiter_id else self.tokens[i] for i in token_ids
        ]
        return " ".join("".join(pieces).split())


@dataclass
class ProjectionHead:
    """Affine map from hidden dimension to vocabulary logits."""

    weight: np.ndarray  # [C, d] float32
    bias: np.ndarray  # [C] float32

    def __post_init__(self) -> None:
        self.weight = _as_f32(self.weight)
        self.bias = _as_f32(self.bias)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProjectionHead):
            return NotImplemented
        return (
            self.weight.shape == other.weight.shape
            and self.bias.shape == other.bias.shape
            and self.weight.tobytes() == other.weight.tobytes()
            and self.bias.tobytes() == other.bias.tobytes()
        )


@dataclass(eq=False)
class ModelDump:
    """Immutable per-utterance bundle of states, head and vocabulary.

    ``hidden_states[0]`` holds the contextual module's input embedding and
    ``hidden_states[n]`` the output of transformer layer ``n``; aggregation
    operations index transformer layers 1..L only.
    """

    meta: DumpMeta
    hidden_states: np.ndarray  # [L+1, T, d] float32
    head: ProjectionHead
    vocab: Vocabulary
    attentions: np.ndarray | None = None  # [L, heads, T, T] float32

    def __post_init__(self) -> None:
        self.hidden_states = _as_f32(self.hidden_states)
        if self.attentions is not None:
            self.attentions = _as_f32(self.attentions)

    @property
    def num_layers(self) -> int:
        return self.meta.num_layers

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelDump):
            return NotImplemented
        if self.meta != other.meta or self.vocab != other.vocab:
            return False
        if self.head != other.head:
            return False
        if self.hidden_states.shape != other.hidden_states.shape:
            return False
        if self.hidden_states.tobytes() != other.hidden_states.tobytes():
            return False
        if (self.attentions is None) != (other.attentions is None):
            return False
        if self.attentions is not None:
            assert other.attentions is not None
            if self.attentions.shape != other.attentions.shape:
                return False
            if self.attentions.tobytes() != other.attentions.tobytes():
                return False
        return True

    def validate(self) -> None:
        """Check every dump invariant, raising DumpValidationError on failure."""
        self.meta.validate()
        self.vocab.validate()
        num_layers = self.meta.num_layers
        seq_len = self.meta.seq_len
        hidden_dim = self.meta.hidden_dim
        vocab_size = len(self.vocab)

        expected = (num_layers + 1, seq_len, hidden_dim)
        if self.hidden_states.shape != expected:
            raise DumpValidationError(
                f"hidden_states shape {self.hidden_states.shape} != {expected}"
            )
        if not np.isfinite(self.hidden_states).all():
            raise DumpValidationError("hidden_states contains NaN/Inf")

        if self.head.weight.ndim != 2 or self.head.bias.ndim != 1:
            raise DumpValidationError("projection head must be a matrix and a vector")
        if self.head.weight.shape != (vocab_size, hidden_dim):
            raise DumpValidationError(
                f"head weight shape {self.head.weight.shape} != "
                f"({vocab_size}, {hidden_dim})"
            )
        if self.head.bias.shape != (vocab_size,):
            raise DumpValidationError(
                f"head bias shape {self.head.bias.shape} != ({vocab_size},)"
            )
        if not np.isfinite(self.head.weight).all() or not np.isfinite(self.head.bias).all():
            raise DumpValidationError("projection head contains NaN/Inf")

        if self.attentions is not None:
            att = self.attentions
            if att.ndim != 4 or att.shape != (num_layers, att.shape[1], seq_len, seq_len):
                raise DumpValidationError(
                    f"attentions shape {att.shape} incompatible with "
                    f"[{num_layers}, heads, {seq_len}, {seq_len}]"
                )
            if not np.isfinite(att).all():
                raise DumpValidationError("attentions contains NaN/Inf")
            lo = float(att.min())
            hi = float(att.max())
            if lo < -_ATTENTION_RANGE_TOL or hi > 1.0 + _ATTENTION_RANGE_TOL:
                raise DumpValidationError(
                    f"attention weights outside [0, 1]: min {lo}, max {hi}"
                )
            row_sums = att.astype(np.float64).sum(axis=-1)
            err = float(np.abs(row_sums - 1.0).max())
            if err > _ATTENTION_ROW_SUM_TOL:
                raise DumpValidationError(
                    f"attention rows deviate from sum 1 by {err}"
                )


def _as_f32(values) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=np.float32)


def _align(offset: int) -> int:
    return (offset + _ALIGNMENT - 1) // _ALIGNMENT * _ALIGNMENT


def write_dump(dump: ModelDump, sink: BinaryIO) -> int:
    """Serialize a dump to ``sink``; returns the number of bytes written.

    Refuses to serialize a dump that violates any invariant, so a readable
    stream always round-trips to a valid ModelDump.
    """
    dump.validate()

    tensors = [("hidden_states", dump.hidden_states)]
    if dump.attentions is not None:
        tensors.append(("attentions", dump.attentions))
    tensors.append(("head_weight", dump.head.weight))
    tensors.append(("head_bias", dump.head.bias))

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
            "format_version": dump.meta.format_version,
            "model_name": dump.meta.model_name,
            "num_layers": dump.meta.num_layers,
            "seq_len": dump.meta.seq_len,
            "hidden_dim": dump.meta.hidden_dim,
            "sample_id": dump.meta.sample_id,
            "reference_text": dump.meta.reference_text,
        },
        "vocab": {
            "tokens": list(dump.vocab.tokens),
            "blank_id": dump.vocab.blank_id,
            "word_delimiter_id": dump.vocab.word_delimiter_id,
            "unk_id": dump.vocab.unk_id,
        },
        "tensors": directory,
    }
    header_bytes = json.dumps(header, separators=(",", ":"), ensure_ascii=True).encode(
        "utf-8"
    )

    written = 0
    written += sink.write(MAGIC)
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


def read_dump(source: BinaryIO) -> ModelDump:
    """Parse an LGA1 byte stream into a validated ModelDump."""
    magic = source.read(4)
    if magic != MAGIC:
        raise DumpFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    len_bytes = source.read(4)
    if len(len_bytes) != 4:
        raise DumpFormatError("truncated stream: missing header length")
    header_len = int.from_bytes(len_bytes, "little")
    header_bytes = source.read(header_len)
    if len(header_bytes) != header_len:
        raise DumpFormatError("truncated stream: incomplete header")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DumpFormatError(f"malformed JSON header: {exc}") from exc

    if not isinstance(header, dict):
        raise DumpFormatError("JSON header is not an object")
    if header.get("format_version") != FORMAT_VERSION:
        raise DumpFormatError(
            f"unsupported format_version {header.get('format_version')!r}"
        )

    payload = source.read()
    arrays = _read_tensors(header, payload)

    try:
        meta_obj = header["meta"]
        vocab_obj = header["vocab"]
        meta = DumpMeta(
            model_name=meta_obj["model_name"],
            num_layers=int(meta_obj["num_layers"]),
            seq_len=int(meta_obj["seq_len"]),
            hidden_dim=int(meta_obj["hidden_dim"]),
            sample_id=meta_obj["sample_id"],
            reference_text=meta_obj.get("reference_text"),
            format_version=int(meta_obj.get("format_version", FORMAT_VERSION)),
        )
        vocab = Vocabulary(
            tokens=tuple(vocab_obj["tokens"]),
            blank_id=int(vocab_obj["blank_id"]),
            word_delimiter_id=int(vocab_obj["word_delimiter_id"]),
            unk_id=(None if vocab_obj.get("unk_id") is None else int(vocab_obj["unk_id"])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DumpFormatError(f"malformed header fields: {exc}") from exc

    missing = {"hidden_states", "head_weight", "head_bias"} - set(arrays)
    if missing:
        raise DumpFormatError(f"missing tensor sections: {sorted(missing)}")

    head = ProjectionHead(weight=arrays["head_weight"], bias=arrays["head_bias"])
    dump = ModelDump(
        meta=meta,
        hidden_states=arrays["hidden_states"],
        head=head,
        vocab=vocab,
        attentions=arrays.get("attentions"),
    )
    dump.validate()
    return dump


def _read_tensors(header: dict, payload: bytes) -> dict[str, np.ndarray]:
    entries = header.get("tensors")
    if not isinstance(entries, list):
        raise DumpFormatError("header lacks a tensor directory")
    known = {"hidden_states", "attentions", "head_weight", "head_bias"}
    arrays: dict[str, np.ndarray] = {}
    for entry in entries:
        try:
            name = entry["name"]
            dtype = entry["dtype"]
            shape = tuple(int(s) for s in entry["shape"])
            offset = int(entry["offset"])
            byte_len = int(entry["byte_len"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DumpFormatError(f"malformed tensor entry: {exc}") from exc
        if name not in known:
            raise DumpFormatError(f"unknown tensor section {name!r}")
        if name in arrays:
            raise DumpFormatError(f"duplicate tensor section {name!r}")
        if dtype != "f32":
            raise DumpFormatError(f"unsupported dtype {dtype!r} for {name}")
        if offset % _ALIGNMENT != 0:
            raise DumpFormatError(f"tensor {name} offset {offset} not 64-byte aligned")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if byte_len != count * 4:
            raise DumpFormatError(
                f"tensor {name}: byte_len {byte_len} does not match shape {shape}"
            )
        if offset + byte_len > len(payload):
            raise DumpFormatError(
                f"tensor {name}: section [{offset}, {offset + byte_len}) "
                f"beyond payload end {len(payload)}"
            )
        flat = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        arrays[name] = flat.reshape(shape).copy()
    return arrays


def dump_to_bytes(dump: ModelDump) -> bytes:
    buf = io.BytesIO()
    write_dump(dump, buf)
    return buf.getvalue()


def load_dump(path) -> ModelDump:
    """Read a dump from a filesystem path."""
    with open(path, "rb") as fh:
        return read_dump(fh)


def save_dump(dump: ModelDump, path) -> int:
    """Write a dump to a filesystem path; returns bytes written."""
    with open(path, "wb") as fh:
        return write_dump(dump, fh)
