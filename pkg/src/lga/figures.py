"""Matplotlib rendering of the analysis and tuning reports.

Figures are a convenience companion to the canonical CSV/JSON outputs and
are written next to them.  Everything renders through the Agg backend so
the CLI works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from lga.analysis import AttentionMap, ConfidenceProfile, TokenEvolutionTable
from lga.container import Vocabulary
from lga.tuning import TuneResult


def save_confidence_figure(profile: ConfidenceProfile, path: Path) -> None:
    layers = [row.layer for row in profile.per_layer]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(layers, [r.mean_max_prob for r in profile.per_layer], "o-", label="mean max prob")
    ax.plot(
        layers,
        [r.median_max_prob for r in profile.per_layer],
        "s--",
        label="median max prob",
    )
    ax.set_xlabel("transformer layer")
    ax.set_ylabel("softmax maximum")
    ax.set_ylim(0.0, 1.05)
    twin = ax.twinx()
    twin.plot(
        layers,
        [r.mean_entropy for r in profile.per_layer],
        "^:",
        color="tab:red",
        label="mean entropy",
    )
    twin.set_ylabel("entropy (nats)", color="tab:red")
    handles, labels = ax.get_legend_handles_labels()
    handles2, labels2 = twin.get_legend_handles_labels()
    ax.legend(handles + handles2, labels + labels2, loc="center right", fontsize=8)
    ax.set_title("per-layer prediction confidence")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_token_evolution_figure(
    table: TokenEvolutionTable, vocab: Vocabulary, path: Path
) -> None:
    grid = np.asarray(table.grid)
    fig, ax = plt.subplots(
        figsize=(max(4.0, 0.35 * grid.shape[1]), max(3.0, 0.35 * grid.shape[0]))
    )
    ax.imshow(grid, aspect="auto", cmap="tab20", interpolation="nearest")
    if grid.size <= 400:
        for i in range(grid.shape[0]):
            for j in range(grid.shape[1]):
                ax.text(
                    j,
                    i,
                    vocab.tokens[int(grid[i, j])],
                    ha="center",
                    va="center",
                    fontsize=7,
                )
    ax.set_yticks(range(len(table.layers)), [str(l) for l in table.layers])
    ax.set_xlabel("timestep")
    ax.set_ylabel("layer")
    ax.set_title("argmax token per layer and timestep")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_attention_figure(attention: AttentionMap, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    image = ax.imshow(attention.values, cmap="viridis", interpolation="nearest")
    fig.colorbar(image, ax=ax, fraction=0.046)
    ax.set_xlabel("key timestep")
    ax.set_ylabel("query timestep")
    ax.set_title(f"head-averaged attention, layer {attention.layer}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_tune_heatmap(result: TuneResult, path: Path) -> None:
    """WER over the (beta, m) plane, minimized over the alpha axes."""
    betas = sorted({row.point.beta for row in result.table})
    counts = sorted({row.point.m for row in result.table})
    grid = np.full((len(betas), len(counts)), np.nan)
    for row in result.table:
        i = betas.index(row.point.beta)
        j = counts.index(row.point.m)
        if np.isnan(grid[i, j]) or row.wer < grid[i, j]:
            grid[i, j] = row.wer
    fig, ax = plt.subplots(figsize=(5, 4))
    image = ax.imshow(grid, cmap="magma_r", interpolation="nearest")
    fig.colorbar(image, ax=ax, fraction=0.046, label="corpus WER")
    ax.set_xticks(range(len(counts)), [str(c) for c in counts])
    ax.set_yticks(range(len(betas)), [f"{b:g}" for b in betas])
    ax.set_xlabel("aggregated layers")
    ax.set_ylabel("interpolation weight")
    best = result.best
    ax.scatter(
        [counts.index(best.m)], [betas.index(best.beta)], marker="*", s=160, c="cyan"
    )
    ax.set_title("grid search WER")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
