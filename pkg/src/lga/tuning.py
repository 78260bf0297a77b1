"""Deterministic grid search over the aggregation hyperparameters.

Every (beta, m, alpha1, alpha2) grid point is decoded over the full dev
set and scored at corpus level; the winner minimizes WER with ties broken
by CER, then lower beta, then lower m, then lower alphas.  Exhaustive and
reproducible by construction, no search toolkit involved.
"""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import IO, Sequence

from lga.container import ModelDump
from lga.decoder import DecodeParams, beam_search_decode
from lga.lm import NGramLM
from lga.metrics import cer, corpus_rate, wer
from lga.projection import aggregate_logits, interpolate, log_softmax, project

# Aggregation settings reported for the published model families; the
# betas double as the default search values.
TABLE_BETAS = (0.75, 0.85, 0.9)
TABLE_LAYER_COUNTS = (4, 12, 18, 24)


@dataclass(frozen=True)
class TuneGrid:
    """Cartesian search box; alpha lists default to the decoder params."""

    betas: tuple[float, ...]
    layer_counts: tuple[int, ...]
    alpha1s: tuple[float, ...] | None = None
    alpha2s: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "betas", tuple(sorted(set(self.betas))))
        object.__setattr__(self, "layer_counts", tuple(sorted(set(self.layer_counts))))
        if self.alpha1s is not None:
            object.__setattr__(self, "alpha1s", tuple(sorted(set(self.alpha1s))))
        if self.alpha2s is not None:
            object.__setattr__(self, "alpha2s", tuple(sorted(set(self.alpha2s))))

    def validate(self, num_layers: int) -> None:
        if not self.betas or not self.layer_counts:
            raise ValueError("grid needs at least one beta and one layer count")
        for beta in self.betas:
            if not 0.0 <= beta <= 1.0:
                raise ValueError(f"beta {beta} outside [0, 1]")
        for m in self.layer_counts:
            if not 1 <= m <= num_layers:
                raise ValueError(f"layer count {m} out of range [1, {num_layers}]")
        if self.alpha1s is not None and not self.alpha1s:
            raise ValueError("alpha1s must be nonempty when given")
        if self.alpha2s is not None and not self.alpha2s:
            raise ValueError("alpha2s must be nonempty when given")


def default_grid(num_layers: int) -> TuneGrid:
    """Published-configuration betas plus the baseline, layer counts
    clipped to the model depth."""
    return TuneGrid(
        betas=TABLE_BETAS + (1.0,),
        layer_counts=tuple(sorted({min(m, num_layers) for m in TABLE_LAYER_COUNTS})),
    )


@dataclass(frozen=True)
class TunePoint:
    beta: float
    m: int
    alpha1: float
    alpha2: float


@dataclass(frozen=True)
class TuneRow:
    point: TunePoint
    wer: float
    cer: float


@dataclass
class TuneResult:
    best: TunePoint
    table: list[TuneRow]

    def to_csv(self, stream: IO[str]) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["beta", "m", "alpha1", "alpha2", "wer", "cer"])
        for row in self.table:
            point = row.point
            writer.writerow(
                [
                    repr(point.beta),
                    point.m,
                    repr(point.alpha1),
                    repr(point.alpha2),
                    repr(row.wer),
                    repr(row.cer),
                ]
            )


def _check_dumps(dumps: Sequence[ModelDump]) -> None:
    if not dumps:
        raise ValueError("need at least one dump")
    first = dumps[0]
    for dump in dumps:
        if dump.meta.reference_text is None:
            raise ValueError(f"dump {dump.meta.sample_id} has no reference_text")
        if dump.vocab != first.vocab:
            raise ValueError("dumps do not share a vocabulary")
        if dump.meta.num_layers != first.meta.num_layers:
            raise ValueError("dumps do not share a layer count")


def _decode_utterance(
    dump: ModelDump, point: TunePoint, params: DecodeParams, lm: NGramLM | None
) -> str:
    base = project(dump, dump.meta.num_layers)
    agg = aggregate_logits(dump, point.m)
    logits = interpolate(base, agg, point.beta)
    decode_params = replace(params, alpha1=point.alpha1, alpha2=point.alpha2)
    ranked = beam_search_decode(log_softmax(logits), dump.vocab, lm, decode_params)
    return ranked[0].text


def tune_grid(
    dumps: Sequence[ModelDump],
    lm: NGramLM | None,
    grid: TuneGrid,
    params: DecodeParams,
    workers: int = 1,
) -> TuneResult:
    """Evaluate every grid point on the dev dumps; corpus WER decides.

    Utterances within a grid point run in parallel when ``workers > 1``;
    the result is reduced in grid-point order either way.
    """
    _check_dumps(dumps)
    num_layers = dumps[0].meta.num_layers
    grid.validate(num_layers)
    alpha1s = grid.alpha1s if grid.alpha1s is not None else (params.alpha1,)
    alpha2s = grid.alpha2s if grid.alpha2s is not None else (params.alpha2,)

    points = [
        TunePoint(beta=beta, m=m, alpha1=a1, alpha2=a2)
        for beta, m, a1, a2 in itertools.product(
            grid.betas, grid.layer_counts, alpha1s, alpha2s
        )
    ]

    table: list[TuneRow] = []
    for point in points:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                texts = list(
                    pool.map(lambda d: _decode_utterance(d, point, params, lm), dumps)
                )
        else:
            texts = [_decode_utterance(d, point, params, lm) for d in dumps]
        wer_reports = []
        cer_reports = []
        for dump, text in zip(dumps, texts):
            reference = dump.meta.reference_text or ""
            wer_reports.append(wer(reference, text))
            cer_reports.append(cer(reference, text))
        table.append(
            TuneRow(
                point=point,
                wer=corpus_rate(wer_reports).rate,
                cer=corpus_rate(cer_reports).rate,
            )
        )

    best_row = min(
        table,
        key=lambda row: (
            row.wer,
            row.cer,
            row.point.beta,
            row.point.m,
            row.point.alpha1,
            row.point.alpha2,
        ),
    )
    return TuneResult(best=best_row.point, table=table)
