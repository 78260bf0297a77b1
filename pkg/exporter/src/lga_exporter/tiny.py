"""Tiny randomly-initialized CTC checkpoint for offline integration tests.

A few-layer wav2vec2-style model with a fixed seed: small enough to build
in milliseconds, real enough that the whole export path (feature
extractor, encoder stack, projection head, tokenizer) behaves like a
production checkpoint. No downloads involved.
"""

from __future__ import annotations

import json
from pathlib import Path

TINY_LETTERS = "ETAONIS"


def build_tiny_model(out_dir, seed: int = 0) -> Path:
    """Materialize the fixture checkpoint under ``out_dir``."""
    import torch
    from transformers import (
        Wav2Vec2Config,
        Wav2Vec2CTCTokenizer,
        Wav2Vec2FeatureExtractor,
        Wav2Vec2ForCTC,
    )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    vocab = {"<pad>": 0, "<unk>": 1, "|": 2}
    for i, letter in enumerate(TINY_LETTERS):
        vocab[letter] = 3 + i
    vocab_path = out_dir / "vocab.json"
    vocab_path.write_text(json.dumps(vocab), encoding="utf-8")

    tokenizer = Wav2Vec2CTCTokenizer(
        str(vocab_path),
        unk_token="<unk>",
        pad_token="<pad>",
        word_delimiter_token="|",
    )
    feature_extractor = Wav2Vec2FeatureExtractor(
        feature_size=1,
        sampling_rate=16_000,
        do_normalize=True,
        return_attention_mask=False,
    )
    config = Wav2Vec2Config(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=3,
        num_attention_heads=2,
        intermediate_size=48,
        conv_dim=(16, 16, 32),
        conv_kernel=(10, 3, 3),
        conv_stride=(5, 2, 2),
        num_feat_extract_layers=3,
        num_conv_pos_embeddings=16,
        num_conv_pos_embedding_groups=4,
        do_stable_layer_norm=False,
        feat_extract_norm="group",
        layerdrop=0.0,
        mask_time_prob=0.0,
        pad_token_id=vocab["<pad>"],
    )
    torch.manual_seed(seed)
    model = Wav2Vec2ForCTC(config).eval()

    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    feature_extractor.save_pretrained(out_dir)
    return out_dir
