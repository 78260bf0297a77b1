import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lga.container import (
    DumpFormatError,
    DumpValidationError,
    ProjectionHead,
    Vocabulary,
    dump_to_bytes,
    read_dump,
    write_dump,
)

from helpers import make_dump


def minimal_dump(attentions=None):
    # L=1, T=1, d=1, C=2
    return make_dump(
        hidden_states=np.array([[[0.5]], [[2.0]]], dtype=np.float32),
        weight=np.array([[1.0], [-1.0]], dtype=np.float32),
        bias=np.array([0.0, 0.25], dtype=np.float32),
        vocab=Vocabulary(tokens=("<blank>", "A"), blank_id=0, word_delimiter_id=1),
        attentions=attentions,
    )


def test_minimal_round_trip():
    dump = minimal_dump()
    data = dump_to_bytes(dump)
    assert read_dump(io.BytesIO(data)) == dump


def test_round_trip_with_attentions():
    att = np.ones((1, 2, 1, 1), dtype=np.float32)
    dump = minimal_dump(attentions=att)
    back = read_dump(io.BytesIO(dump_to_bytes(dump)))
    assert back == dump
    assert back.attentions is not None
    assert back.attentions.shape == (1, 2, 1, 1)


def test_optional_attentions_symmetry():
    data = dump_to_bytes(minimal_dump())
    header_len = int.from_bytes(data[4:8], "little")
    header = json.loads(data[8 : 8 + header_len])
    assert [t["name"] for t in header["tensors"]] == [
        "hidden_states",
        "head_weight",
        "head_bias",
    ]
    assert read_dump(io.BytesIO(data)).attentions is None


def test_writer_rejects_inconsistent_head_shape():
    dump = minimal_dump()
    dump.head = ProjectionHead(
        weight=np.zeros((2, 3), dtype=np.float32), bias=np.zeros(2, dtype=np.float32)
    )
    with pytest.raises(DumpValidationError):
        write_dump(dump, io.BytesIO())


def test_writer_rejects_nan_hidden_states():
    dump = minimal_dump()
    dump.hidden_states[0, 0, 0] = np.nan
    with pytest.raises(DumpValidationError):
        write_dump(dump, io.BytesIO())


def test_bad_magic():
    with pytest.raises(DumpFormatError, match="magic"):
        read_dump(io.BytesIO(b"XXXX" + b"\x00" * 64))


def test_truncated_payload():
    data = dump_to_bytes(minimal_dump())
    with pytest.raises(DumpFormatError, match="beyond payload end"):
        read_dump(io.BytesIO(data[:-1]))


def test_truncated_header():
    data = dump_to_bytes(minimal_dump())
    with pytest.raises(DumpFormatError, match="header"):
        read_dump(io.BytesIO(data[:10]))


def test_malformed_json_header():
    payload = b"{not json"
    data = b"LGA1" + len(payload).to_bytes(4, "little") + payload
    with pytest.raises(DumpFormatError, match="JSON"):
        read_dump(io.BytesIO(data))


def _mutate_header(data: bytes, mutate) -> bytes:
    header_len = int.from_bytes(data[4:8], "little")
    header = json.loads(data[8 : 8 + header_len])
    mutate(header)
    new_header = json.dumps(header, separators=(",", ":")).encode()
    return (
        b"LGA1"
        + len(new_header).to_bytes(4, "little")
        + new_header
        + data[8 + header_len :]
    )


@pytest.mark.parametrize("tensor_index", [0, 1, 2])
def test_header_shape_corruption_detected(tensor_index):
    dump = make_dump(
        hidden_states=np.arange(2 * 3 * 4, dtype=np.float32).reshape(2, 3, 4) / 10.0,
        weight=np.ones((5, 4), dtype=np.float32),
        bias=np.zeros(5, dtype=np.float32),
        vocab=Vocabulary(
            tokens=("<blank>", "A", "B", "C", "|"), blank_id=0, word_delimiter_id=4
        ),
    )
    data = dump_to_bytes(dump)

    def flip_shape(header):
        shape = header["tensors"][tensor_index]["shape"]
        shape[0] = shape[0] + 1

    with pytest.raises((DumpFormatError, DumpValidationError)):
        read_dump(io.BytesIO(_mutate_header(data, flip_shape)))


def test_transposed_shape_detected():
    # byte_len stays valid when two unequal dims swap; the meta cross-check
    # must still refuse the tensor.
    dump = make_dump(
        hidden_states=np.ones((2, 3, 4), dtype=np.float32),
        weight=np.ones((5, 4), dtype=np.float32),
        bias=np.zeros(5, dtype=np.float32),
        vocab=Vocabulary(
            tokens=("<blank>", "A", "B", "C", "|"), blank_id=0, word_delimiter_id=4
        ),
    )
    data = dump_to_bytes(dump)

    def swap(header):
        shape = header["tensors"][0]["shape"]
        shape[1], shape[2] = shape[2], shape[1]

    with pytest.raises(DumpValidationError, match="shape"):
        read_dump(io.BytesIO(_mutate_header(data, swap)))


def test_unsupported_version():
    data = dump_to_bytes(minimal_dump())

    def bump(header):
        header["format_version"] = 99

    with pytest.raises(DumpFormatError, match="format_version"):
        read_dump(io.BytesIO(_mutate_header(data, bump)))


def test_deterministic_serialization():
    dump = minimal_dump(attentions=np.ones((1, 2, 1, 1), dtype=np.float32))
    assert dump_to_bytes(dump) == dump_to_bytes(dump)


def test_payload_alignment():
    dump = minimal_dump()
    data = dump_to_bytes(dump)
    header_len = int.from_bytes(data[4:8], "little")
    header = json.loads(data[8 : 8 + header_len])
    for entry in header["tensors"]:
        assert entry["offset"] % 64 == 0


def test_vocab_validation():
    with pytest.raises(DumpValidationError, match="unique"):
        Vocabulary(tokens=("a", "a"), blank_id=0, word_delimiter_id=1).validate()
    with pytest.raises(DumpValidationError, match="blank_id"):
        Vocabulary(tokens=("a", "b"), blank_id=0, word_delimiter_id=0).validate()
    with pytest.raises(DumpValidationError, match="out of range"):
        Vocabulary(tokens=("a", "b"), blank_id=0, word_delimiter_id=5).validate()


def test_attention_row_sum_validation():
    att = np.full((1, 1, 2, 2), 0.25, dtype=np.float32)
    with pytest.raises(DumpValidationError, match="sum 1"):
        make_dump(
            hidden_states=np.ones((2, 2, 2), dtype=np.float32),
            attentions=att,
        )


def test_render_maps_delimiter_to_space():
    vocab = Vocabulary(tokens=("<blank>", "A", "B", "|"), blank_id=0, word_delimiter_id=3)
    assert vocab.render([1, 3, 2]) == "A B"
    assert vocab.render([1, 3]) == "A"
    assert vocab.render([3, 1, 3, 3, 2]) == "A B"  # delimiter runs normalize
    assert vocab.render([]) == ""


@st.composite
def dumps(draw):
    num_layers = draw(st.integers(min_value=1, max_value=3))
    seq_len = draw(st.integers(min_value=1, max_value=4))
    hidden_dim = draw(st.integers(min_value=1, max_value=3))
    vocab_size = draw(st.integers(min_value=2, max_value=4))
    finite = st.floats(
        min_value=-100, max_value=100, allow_nan=False, width=32
    )

    def tensor(shape):
        flat = draw(
            st.lists(
                finite,
                min_size=int(np.prod(shape)),
                max_size=int(np.prod(shape)),
            )
        )
        return np.array(flat, dtype=np.float32).reshape(shape)

    hidden = tensor((num_layers + 1, seq_len, hidden_dim))
    weight = tensor((vocab_size, hidden_dim))
    bias = tensor((vocab_size,))
    tokens = tuple(f"t{i}" for i in range(vocab_size))
    reference = draw(st.one_of(st.none(), st.text(max_size=8)))
    return make_dump(
        hidden_states=hidden,
        weight=weight,
        bias=bias,
        vocab=Vocabulary(tokens=tokens, blank_id=0, word_delimiter_id=1),
        reference_text=reference,
        sample_id=draw(st.text(max_size=6)),
    )


@settings(max_examples=40, deadline=None)
@given(dumps())
def test_round_trip_property(dump):
    back = read_dump(io.BytesIO(dump_to_bytes(dump)))
    assert back == dump
    assert back.hidden_states.tobytes() == dump.hidden_states.tobytes()
