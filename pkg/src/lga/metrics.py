"""Levenshtein-based word and character error rates.

Text is normalized before scoring: both sides are uppercased and
whitespace runs collapse to single spaces, matching the uppercase
reference convention of standard read-speech benchmarks.  Edits are unit
cost with no transposition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class ErrorRateReport:
    """Edit counts against a reference plus the normalized rate."""

    substitutions: int
    insertions: int
    deletions: int
    reference_len: int
    rate: float

    @property
    def distance(self) -> int:
        return self.substitutions + self.insertions + self.deletions


def normalize_text(text: str) -> str:
    """Uppercase and collapse whitespace runs to single spaces."""
    return " ".join(text.upper().split())


def edit_distance(
    a: Sequence, b: Sequence
) -> tuple[int, int, int, int]:
    """Minimal unit-cost edit distance from ``a`` (reference) to ``b``.

    Returns ``(distance, substitutions, insertions, deletions)``.  The
    decomposition comes from a backtrace that resolves ties preferring
    substitution, then deletion, then insertion.
    """
    n, m = len(a), len(b)
    # dist[i][j]: distance between a[:i] and b[:j]
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row = dist[i]
        prev = dist[i - 1]
        ai = a[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (ai != b[j - 1])
            dele = prev[j] + 1
            ins = row[j - 1] + 1
            row[j] = min(sub, dele, ins)

    subs = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and dist[i][j] == dist[i - 1][j - 1]:
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + 1:
            subs += 1
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return dist[n][m], subs, ins, dels


def _report(ref: Sequence, hyp: Sequence) -> ErrorRateReport:
    if len(ref) == 0:
        raise ValueError("error rate undefined for an empty reference")
    distance, subs, ins, dels = edit_distance(ref, hyp)
    return ErrorRateReport(
        substitutions=subs,
        insertions=ins,
        deletions=dels,
        reference_len=len(ref),
        rate=distance / len(ref),
    )


def wer(reference: str, hypothesis: str) -> ErrorRateReport:
    """Word error rate over whitespace-delimited tokens."""
    ref_words = normalize_text(reference).split()
    hyp_words = normalize_text(hypothesis).split()
    if not ref_words:
        raise ValueError("WER undefined: reference has no words")
    return _report(ref_words, hyp_words)


def cer(reference: str, hypothesis: str) -> ErrorRateReport:
    """Character error rate; spaces count, whitespace runs collapse."""
    ref_chars = list(normalize_text(reference))
    hyp_chars = list(normalize_text(hypothesis))
    if not ref_chars:
        raise ValueError("CER undefined: reference has no characters")
    return _report(ref_chars, hyp_chars)


def corpus_rate(reports: Sequence[ErrorRateReport]) -> ErrorRateReport:
    """Pool per-utterance reports into one corpus-level report.

    Corpus rate is total errors over total reference length, not the mean
    of per-utterance rates.
    """
    subs = sum(r.substitutions for r in reports)
    ins = sum(r.insertions for r in reports)
    dels = sum(r.deletions for r in reports)
    total_ref = sum(r.reference_len for r in reports)
    if total_ref == 0:
        raise ValueError("corpus rate undefined: no reference symbols")
    return ErrorRateReport(
        substitutions=subs,
        insertions=ins,
        deletions=dels,
        reference_len=total_ref,
        rate=(subs + ins + dels) / total_ref,
    )
