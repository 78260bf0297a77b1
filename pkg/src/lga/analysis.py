"""Layer-wise diagnostics: confidence evolution, token evolution and
head-averaged attention.

Confidence is reported two ways per layer, the mean/median of the
per-timestep softmax maximum and the mean Shannon entropy in nats, since
"how peaked is the distribution" has no single canonical statistic.
Canonical outputs are data files (CSV for profiles and diagonality, JSON
for token grids); figure rendering lives in :mod:`lga.figures`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from lga.container import ModelDump, Vocabulary
from lga.projection import log_softmax, project


@dataclass(frozen=True)
class LayerConfidence:
    layer: int
    mean_max_prob: float
    median_max_prob: float
    mean_entropy: float


@dataclass
class ConfidenceProfile:
    """Per-layer confidence statistics over all (kept) timesteps."""

    per_layer: list[LayerConfidence]

    def to_csv(self, stream: IO[str]) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["layer", "mean_max_prob", "median_max_prob", "mean_entropy"])
        for row in self.per_layer:
            writer.writerow(
                [
                    row.layer,
                    repr(row.mean_max_prob),
                    repr(row.median_max_prob),
                    repr(row.mean_entropy),
                ]
            )


@dataclass
class TokenEvolutionTable:
    """Argmax token id per (layer, timestep)."""

    layers: list[int]
    grid: np.ndarray  # [len(layers), T] int

    def to_json_obj(self) -> dict:
        return {
            "layers": list(self.layers),
            "tokens": [[int(t) for t in row] for row in self.grid],
        }

    def render(self, vocab: Vocabulary) -> list[list[str]]:
        return [[vocab.tokens[int(t)] for t in row] for row in self.grid]


@dataclass
class AttentionMap:
    """Head-averaged attention for one layer; rows stay stochastic."""

    layer: int
    values: np.ndarray  # [T, T] float64


def _check_layers(layers: Sequence[int], num_layers: int) -> list[int]:
    layer_list = list(layers)
    if not layer_list:
        raise ValueError("empty layer range")
    for layer in layer_list:
        if not 1 <= layer <= num_layers:
            raise ValueError(f"layer {layer} out of range [1, {num_layers}]")
    return layer_list


def confidence_profile(
    dump: ModelDump,
    layers: Sequence[int],
    exclude_blank_frames: bool = False,
) -> ConfidenceProfile:
    """Softmax peakedness statistics for each requested transformer layer.

    With ``exclude_blank_frames`` the timesteps whose top-layer argmax is
    blank are dropped from the statistics of every layer; silence frames
    otherwise saturate the confidence numbers.
    """
    layer_list = _check_layers(layers, dump.meta.num_layers)
    keep = np.ones(dump.meta.seq_len, dtype=bool)
    if exclude_blank_frames:
        top = project(dump, dump.meta.num_layers)
        keep = np.argmax(top.values, axis=-1) != dump.vocab.blank_id
        if not keep.any():
            raise ValueError(
                "every frame is blank at the top layer; nothing left to profile"
            )
    rows = []
    for layer in layer_list:
        logp = log_softmax(project(dump, layer)).values[keep]
        probs = np.exp(logp)
        maxima = probs.max(axis=-1)
        entropy = -(probs * logp).sum(axis=-1)
        rows.append(
            LayerConfidence(
                layer=layer,
                mean_max_prob=float(maxima.mean()),
                median_max_prob=float(np.median(maxima)),
                mean_entropy=float(entropy.mean()),
            )
        )
    return ConfidenceProfile(per_layer=rows)


def token_evolution(dump: ModelDump, layers: Sequence[int]) -> TokenEvolutionTable:
    """Argmax token of each layer's projected logits at each timestep."""
    layer_list = _check_layers(layers, dump.meta.num_layers)
    grid = np.stack(
        [np.argmax(project(dump, layer).values, axis=-1) for layer in layer_list]
    )
    return TokenEvolutionTable(layers=layer_list, grid=grid)


def average_attention(dump: ModelDump, layer: int) -> AttentionMap:
    """Arithmetic mean over the heads of one layer's attention maps."""
    if dump.attentions is None:
        raise ValueError("dump carries no attention tensors")
    if not 1 <= layer <= dump.meta.num_layers:
        raise ValueError(f"layer {layer} out of range [1, {dump.meta.num_layers}]")
    values = dump.attentions[layer - 1].astype(np.float64).mean(axis=0)
    return AttentionMap(layer=layer, values=values)


def diagonality_score(attention: AttentionMap, window: int) -> float:
    """Average fraction of each row's mass within ±window of the diagonal."""
    if window < 0:
        raise ValueError("window must be >= 0")
    values = attention.values
    seq_len = values.shape[0]
    fractions = []
    for t in range(seq_len):
        row = values[t]
        total = row.sum()
        if total <= 0:
            fractions.append(0.0)
            continue
        lo = max(0, t - window)
        hi = min(seq_len, t + window + 1)
        fractions.append(float(row[lo:hi].sum() / total))
    return float(np.mean(fractions))


def write_diagonality_csv(
    stream: IO[str], rows: Sequence[tuple[int, int, float]]
) -> None:
    """Write (layer, window, diagonality) rows as CSV."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["layer", "window", "diagonality"])
    for layer, window, score in rows:
        writer.writerow([layer, window, repr(score)])
