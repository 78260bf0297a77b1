"""Shared builders: tiny hand-built dumps, vocabularies, the ARPA fixture."""

from __future__ import annotations

import numpy as np

from lga.container import DumpMeta, ModelDump, ProjectionHead, Vocabulary

# Order matches the spec-side hand computations used throughout the tests:
# unigrams a (-0.5, backoff -0.3) and b (-0.7, backoff -0.1), one bigram
# "a b" at -0.2.
FIXTURE_ARPA = """\
\\data\\
ngram 1=2
ngram 2=1

\\1-grams:
-0.5\ta\t-0.3
-0.7\tb\t-0.1

\\2-grams:
-0.2\ta b

\\end\\
"""


def letter_vocab(letters: str = "AB") -> Vocabulary:
    """<blank>, letters..., | as the word delimiter."""
    tokens = ("<blank>", *letters, "|")
    return Vocabulary(
        tokens=tokens, blank_id=0, word_delimiter_id=len(tokens) - 1, unk_id=None
    )


def make_dump(
    hidden_states: np.ndarray,
    weight: np.ndarray | None = None,
    bias: np.ndarray | None = None,
    vocab: Vocabulary | None = None,
    attentions: np.ndarray | None = None,
    sample_id: str = "utt0",
    reference_text: str | None = None,
    model_name: str = "test-model",
) -> ModelDump:
    """Assemble a valid ModelDump from raw arrays, defaulting to an
    identity head sized to the hidden dimension."""
    hidden_states = np.asarray(hidden_states, dtype=np.float32)
    layers_plus_1, seq_len, hidden_dim = hidden_states.shape
    if weight is None:
        weight = np.eye(hidden_dim, dtype=np.float32)
    weight = np.asarray(weight, dtype=np.float32)
    if bias is None:
        bias = np.zeros(weight.shape[0], dtype=np.float32)
    if vocab is None:
        tokens = tuple(f"t{i}" for i in range(weight.shape[0]))
        vocab = Vocabulary(
            tokens=tokens, blank_id=0, word_delimiter_id=weight.shape[0] - 1
        )
    meta = DumpMeta(
        model_name=model_name,
        num_layers=layers_plus_1 - 1,
        seq_len=seq_len,
        hidden_dim=hidden_dim,
        sample_id=sample_id,
        reference_text=reference_text,
    )
    dump = ModelDump(
        meta=meta,
        hidden_states=hidden_states,
        head=ProjectionHead(weight=weight, bias=np.asarray(bias, dtype=np.float32)),
        vocab=vocab,
        attentions=attentions,
    )
    dump.validate()
    return dump
