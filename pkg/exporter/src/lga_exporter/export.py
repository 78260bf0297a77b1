"""Run a pretrained CTC checkpoint over audio and serialize LGA1 dumps.

The exporter captures, per utterance, the full stack of encoder hidden
states (input embedding plus every transformer layer), optionally the
post-softmax attention maps, the checkpoint's projection head and its
vocabulary, so the decoder toolkit can re-derive or re-mix predictions
offline without touching the model again.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from lga_exporter.audio import TARGET_RATE, load_waveform
from lga_exporter.writer import DumpPayload, save_lga

log = logging.getLogger("lga_exporter")


class ExportError(Exception):
    """Checkpoint unusable for CTC export."""


@dataclass
class ExportSpec:
    """One export run: a checkpoint plus the audio it should transcribe."""

    model_id: str
    audio_paths: list[Path]
    output_dir: Path
    include_attentions: bool = False
    device: str = "cpu"
    transcripts: dict[str, str] = field(default_factory=dict)


class CheckpointExporter:
    """Loads one checkpoint and exports utterances from it."""

    def __init__(self, model_id: str, device: str = "cpu"):
        from transformers import AutoModelForCTC, AutoProcessor

        self.model_id = model_id
        # eager attention keeps attention weights retrievable
        self.model = AutoModelForCTC.from_pretrained(
            model_id, attn_implementation="eager"
        )
        self.model.to(device).eval()
        self.device = device
        self.processor = AutoProcessor.from_pretrained(model_id)

        head = getattr(self.model, "lm_head", None)
        if not isinstance(head, torch.nn.Linear):
            raise ExportError(f"{model_id} lacks a linear CTC head")
        self._check_tokenizer()

    def _check_tokenizer(self) -> None:
        tokenizer = self.processor.tokenizer
        for attr in ("pad_token_id", "word_delimiter_token"):
            if getattr(tokenizer, attr, None) is None:
                raise ExportError(f"tokenizer lacks {attr}; not a CTC vocabulary")

    def _vocab(self) -> tuple[list[str], int, int, int | None]:
        tokenizer = self.processor.tokenizer
        vocab_size = self.model.lm_head.out_features
        tokens = []
        for i in range(vocab_size):
            token = tokenizer.convert_ids_to_tokens(i)
            tokens.append(token if token is not None else f"<extra_{i}>")
        delimiter_id = tokenizer.convert_tokens_to_ids(tokenizer.word_delimiter_token)
        return tokens, int(tokenizer.pad_token_id), int(delimiter_id), (
            None if tokenizer.unk_token_id is None else int(tokenizer.unk_token_id)
        )

    @torch.no_grad()
    def forward(self, waveform: np.ndarray, include_attentions: bool):
        inputs = self.processor(
            waveform, sampling_rate=TARGET_RATE, return_tensors="pt"
        )
        out = self.model(
            inputs.input_values.to(self.device),
            output_hidden_states=True,
            output_attentions=include_attentions,
        )
        hidden = torch.stack([h[0] for h in out.hidden_states]).cpu()
        attentions = None
        if include_attentions:
            attentions = torch.stack([a[0] for a in out.attentions]).cpu()
        return hidden, attentions, out.logits[0].cpu()

    def export_utterance(
        self,
        audio_path: Path,
        output_dir: Path,
        include_attentions: bool = False,
        reference_text: str | None = None,
    ) -> Path:
        """Export one utterance; returns the written .lga path."""
        waveform = load_waveform(audio_path)
        hidden, attentions, _ = self.forward(waveform, include_attentions)
        expected_layers = self.model.config.num_hidden_layers + 1
        if hidden.shape[0] != expected_layers:
            raise ExportError(
                f"captured {hidden.shape[0]} hidden-state layers, "
                f"expected {expected_layers}"
            )

        tokens, blank_id, delimiter_id, unk_id = self._vocab()
        head = self.model.lm_head
        bias = (
            head.bias.detach().cpu().numpy()
            if head.bias is not None
            else np.zeros(head.out_features, dtype=np.float32)
        )
        sample_id = Path(audio_path).stem
        payload = DumpPayload(
            model_name=self.model_id,
            sample_id=sample_id,
            reference_text=reference_text,
            hidden_states=hidden.numpy(),
            head_weight=head.weight.detach().cpu().numpy(),
            head_bias=bias,
            tokens=tokens,
            blank_id=blank_id,
            word_delimiter_id=delimiter_id,
            unk_id=unk_id,
            attentions=None if attentions is None else attentions.numpy(),
        )
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        target = output_dir / f"{sample_id}.lga"
        save_lga(payload, target)
        log.info("wrote %s (T=%d)", target, hidden.shape[1])
        return target


def read_transcripts(path) -> dict[str, str]:
    """TSV of sample_id<TAB>text."""
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{lineno}: expected sample_id<TAB>text")
            sample_id, text = line.split("\t", 1)
            table[sample_id] = text
    return table


def run_export(spec: ExportSpec) -> list[Path]:
    """Export every utterance in the spec, sequentially."""
    exporter = CheckpointExporter(spec.model_id, device=spec.device)
    written = []
    for audio_path in spec.audio_paths:
        reference = spec.transcripts.get(Path(audio_path).stem)
        written.append(
            exporter.export_utterance(
                audio_path,
                spec.output_dir,
                include_attentions=spec.include_attentions,
                reference_text=reference,
            )
        )
    return written
