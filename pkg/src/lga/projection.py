"""Prediction paths from hidden states to logits and log-probabilities.

Four ways of producing a ``[T, C]`` logit matrix from a dump:

* :func:`project` - plain affine projection of a single layer's states
  (the baseline path when applied to the top layer).
* :func:`aggregate_logits` - sum of per-layer projections of the top ``m``
  transformer layers with each timestep's hidden vector L2-normalized
  first, so confident top layers cannot dominate the sum.
* :func:`interpolate` - convex blend of the baseline and aggregated
  matrices controlled by ``beta`` (1.0 keeps the baseline, 0.0 keeps the
  aggregate).
* :func:`temperature_scale` - uniform division by a temperature.

All math runs in float64 regardless of the stored float32 payloads; beam
scores downstream depend on the extra headroom.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from lga.container import ModelDump

# Hidden vectors with an L2 norm below this are passed through
# unnormalized: silent/padded frames must not turn into NaN.
ZERO_NORM_GUARD = 1e-12


class Provenance(str, enum.Enum):
    BASELINE = "baseline"
    AGGREGATED = "aggregated"
    INTERPOLATED = "interpolated"
    TEMPERATURE_SCALED = "temperature_scaled"


@dataclass
class LogitsMatrix:
    """Pre-softmax scores of shape [T, C] with provenance bookkeeping."""

    values: np.ndarray
    provenance: Provenance
    beta: float | None = None
    agg_layers: int | None = None

    @property
    def seq_len(self) -> int:
        return self.values.shape[0]

    @property
    def num_tokens(self) -> int:
        return self.values.shape[1]


@dataclass
class LogProbsMatrix:
    """Natural-log probabilities of shape [T, C]; rows logsumexp to 0."""

    values: np.ndarray

    @property
    def seq_len(self) -> int:
        return self.values.shape[0]

    @property
    def num_tokens(self) -> int:
        return self.values.shape[1]


def _head_arrays(dump: ModelDump) -> tuple[np.ndarray, np.ndarray]:
    weight = dump.head.weight.astype(np.float64)
    bias = dump.head.bias.astype(np.float64)
    return weight, bias


def project(dump: ModelDump, layer: int) -> LogitsMatrix:
    """Project one layer's hidden states through the head.

    ``layer`` indexes the stored stack: 0 is the pre-transformer embedding,
    ``L`` the top transformer layer.  Projecting the top layer yields the
    baseline logits.
    """
    num_layers = dump.meta.num_layers
    if not 0 <= layer <= num_layers:
        raise ValueError(f"layer {layer} out of range [0, {num_layers}]")
    weight, bias = _head_arrays(dump)
    states = dump.hidden_states[layer].astype(np.float64)
    values = states @ weight.T + bias
    return LogitsMatrix(values=values, provenance=Provenance.BASELINE)


def _normalize_rows(values: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(values, axis=-1, keepdims=True)
    safe = np.where(norms < ZERO_NORM_GUARD, 1.0, norms)
    return values / safe


def aggregate_logits(
    dump: ModelDump, m: int, normalize: str = "hidden"
) -> LogitsMatrix:
    """Sum head projections over the top ``m`` transformer layers.

    Each layer's per-timestep hidden vector is L2-normalized before
    projection so every layer contributes at unit scale; the head bias is
    applied once per layer and therefore accumulates ``m`` times.  Layer 0
    (the embedding) never participates.

    ``normalize="logits"`` is a diagnostic variant that normalizes each
    layer's projected logits instead of its hidden states.
    """
    num_layers = dump.meta.num_layers
    if not 1 <= m <= num_layers:
        raise ValueError(f"m {m} out of range [1, {num_layers}]")
    if normalize not in ("hidden", "logits"):
        raise ValueError(f"unknown normalize mode {normalize!r}")
    weight, bias = _head_arrays(dump)
    total = np.zeros((dump.meta.seq_len, len(dump.vocab)), dtype=np.float64)
    for layer in range(num_layers - m + 1, num_layers + 1):
        states = dump.hidden_states[layer].astype(np.float64)
        if normalize == "hidden":
            total += _normalize_rows(states) @ weight.T + bias
        else:
            total += _normalize_rows(states @ weight.T + bias)
    return LogitsMatrix(values=total, provenance=Provenance.AGGREGATED, agg_layers=m)


def interpolate(base: LogitsMatrix, agg: LogitsMatrix, beta: float) -> LogitsMatrix:
    """Blend baseline and aggregated logits: ``beta*base + (1-beta)*agg``.

    The endpoints are exact: beta=1 returns a copy of ``base`` and beta=0 a
    copy of ``agg``, bit for bit.
    """
    if base.values.shape != agg.values.shape:
        raise ValueError(
            f"shape mismatch: base {base.values.shape} vs agg {agg.values.shape}"
        )
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta {beta} outside [0, 1]")
    if base.provenance is not Provenance.BASELINE:
        raise ValueError(f"base provenance is {base.provenance}, expected baseline")
    if agg.provenance is not Provenance.AGGREGATED:
        raise ValueError(f"agg provenance is {agg.provenance}, expected aggregated")
    if beta == 1.0:
        values = base.values.copy()
    elif beta == 0.0:
        values = agg.values.copy()
    else:
        values = beta * base.values + (1.0 - beta) * agg.values
    return LogitsMatrix(
        values=values,
        provenance=Provenance.INTERPOLATED,
        beta=beta,
        agg_layers=agg.agg_layers,
    )


def temperature_scale(logits: LogitsMatrix, tau: float) -> LogitsMatrix:
    """Divide logits by a positive temperature; flattens the softmax."""
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    return LogitsMatrix(
        values=logits.values / tau,
        provenance=Provenance.TEMPERATURE_SCALED,
        beta=logits.beta,
        agg_layers=logits.agg_layers,
    )


def log_softmax(logits: LogitsMatrix) -> LogProbsMatrix:
    """Row-wise log-softmax with max subtraction for stability."""
    values = np.asarray(logits.values, dtype=np.float64)
    if not np.isfinite(values).all():
        raise ValueError("logits must be finite")
    shifted = values - values.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return LogProbsMatrix(values=shifted - lse)


def softmax(logits: LogitsMatrix) -> np.ndarray:
    """Row-wise softmax probabilities as a plain [T, C] float64 array."""
    return np.exp(log_softmax(logits).values)
