"""Backoff n-gram language model over the textual ARPA interchange format.

Probabilities are kept in log10 exactly as the file stores them; the
decoder converts to natural log exactly once at its own boundary, which
keeps double-conversion bugs impossible.  Scoring is a total function:
unknown words fall back to the ``<unk>`` entry when the model has one and
to a fixed penalty otherwise.
"""

from __future__ import annotations

import gzip
import io
import re
from dataclasses import dataclass
from typing import IO, Iterable

SENTENCE_START = "<s>"
UNK = "<unk>"
DEFAULT_OOV_LOG10 = -10.0

_NGRAM_COUNT_RE = re.compile(r"^ngram\s+(\d+)\s*=\s*(\d+)$")
_SECTION_RE = re.compile(r"^\\(\d+)-grams:$")

Gram = tuple[str, ...]


class ArpaFormatError(Exception):
    """Input text is not a well-formed ARPA model."""


@dataclass(frozen=True)
class LMState:
    """Scoring context: the last ``order - 1`` words seen."""

    context: Gram = ()


class NGramLM:
    """Immutable backoff n-gram model; safe to share across decoders."""

    def __init__(
        self,
        order: int,
        probs: dict[Gram, float],
        backoffs: dict[Gram, float],
        oov_log10: float = DEFAULT_OOV_LOG10,
    ):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = order
        self._probs = dict(probs)
        self._backoffs = dict(backoffs)
        self.oov_log10 = oov_log10
        self.vocab_size = sum(1 for gram in self._probs if len(gram) == 1)
        self._has_unk = (UNK,) in self._probs
        self._has_start = (SENTENCE_START,) in self._probs

    def __contains__(self, gram: Gram) -> bool:
        return tuple(gram) in self._probs

    def log10_prob(self, gram: Gram) -> float:
        return self._probs[tuple(gram)]

    def backoff(self, gram: Gram) -> float:
        return self._backoffs.get(tuple(gram), 0.0)

    def grams(self, order: int) -> Iterable[Gram]:
        return (g for g in self._probs if len(g) == order)

    def counts(self) -> list[int]:
        out = [0] * self.order
        for gram in self._probs:
            out[len(gram) - 1] += 1
        return out

    def initial_state(self) -> LMState:
        if self._has_start:
            return LMState((SENTENCE_START,))
        return LMState(())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NGramLM):
            return NotImplemented
        return (
            self.order == other.order
            and self._probs == other._probs
            and self._backoffs == other._backoffs
        )


def score_word(
    lm: NGramLM, state: LMState, word: str
) -> tuple[float, LMState]:
    """Score one word in context; returns (log10 prob, advanced state).

    Lookup walks context suffixes from longest to shortest, adding the
    backoff weight of each context that lacks the full n-gram.  A word
    missing from the unigram inventory maps to ``<unk>`` when present and
    otherwise receives the model's flat OOV penalty.
    """
    max_context = lm.order - 1
    context = tuple(state.context)[-max_context:] if max_context > 0 else ()

    effective = word
    if (word,) not in lm:
        if lm._has_unk:
            effective = UNK
        else:
            next_state = LMState((context + (word,))[-max_context:] if max_context > 0 else ())
            return lm.oov_log10, next_state

    score = 0.0
    for start in range(len(context) + 1):
        suffix = context[start:]
        gram = suffix + (effective,)
        if gram in lm:
            score += lm.log10_prob(gram)
            break
        score += lm.backoff(suffix)
    next_state = LMState(
        (context + (effective,))[-max_context:] if max_context > 0 else ()
    )
    return score, next_state


def score_sequence(lm: NGramLM, words: Iterable[str]) -> float:
    """Total log10 probability of a word sequence.

    The context starts at ``<s>`` when the model knows it, otherwise
    empty; an empty sequence scores 0.
    """
    state = lm.initial_state()
    total = 0.0
    for word in words:
        inc, state = score_word(lm, state, word)
        total += inc
    return total


def parse_arpa(text: IO[str] | str, oov_log10: float = DEFAULT_OOV_LOG10) -> NGramLM:
    r"""Parse ARPA text into an NGramLM.

    Requires the ``\data\`` preamble with per-order counts, one
    ``\k-grams:`` section per declared order, and the closing ``\end\``.
    Declared counts must match the number of entries parsed.
    """
    if isinstance(text, str):
        text = io.StringIO(text)

    declared: dict[int, int] = {}
    probs: dict[Gram, float] = {}
    backoffs: dict[Gram, float] = {}

    lines = enumerate(text, start=1)

    def fail(lineno: int, message: str):
        raise ArpaFormatError(f"line {lineno}: {message}")

    # preamble up to \data\
    for lineno, raw in lines:
        line = raw.strip()
        if line == "\\data\\":
            break
        if line:
            fail(lineno, f"unexpected content before \\data\\: {line!r}")
    else:
        raise ArpaFormatError("missing \\data\\ section")

    # ngram k=n count lines until the first section header
    section_order: int | None = None
    for lineno, raw in lines:
        line = raw.strip()
        if not line:
            continue
        match = _NGRAM_COUNT_RE.match(line)
        if match:
            declared[int(match.group(1))] = int(match.group(2))
            continue
        match = _SECTION_RE.match(line)
        if match:
            section_order = int(match.group(1))
            break
        fail(lineno, f"expected ngram count or section header, got {line!r}")
    if not declared:
        raise ArpaFormatError("\\data\\ section declares no ngram counts")
    if section_order is None:
        raise ArpaFormatError("missing n-gram sections after \\data\\")
    order = max(declared)
    if sorted(declared) != list(range(1, order + 1)):
        raise ArpaFormatError(f"non-contiguous ngram orders {sorted(declared)}")

    saw_end = False
    while section_order is not None:
        current = section_order
        if current not in declared:
            raise ArpaFormatError(f"section \\{current}-grams: was not declared")
        section_order = None
        for lineno, raw in lines:
            line = raw.strip()
            if not line:
                continue
            if line == "\\end\\":
                saw_end = True
                break
            match = _SECTION_RE.match(line)
            if match:
                section_order = int(match.group(1))
                break
            parts = line.split()
            if len(parts) == current + 2 and current < order:
                has_backoff = True
            elif len(parts) == current + 1:
                has_backoff = False
            else:
                fail(lineno, f"malformed {current}-gram line: {line!r}")
            try:
                log10_prob = float(parts[0])
                backoff = float(parts[current + 1]) if has_backoff else 0.0
            except ValueError:
                fail(lineno, f"non-numeric probability field: {line!r}")
            if log10_prob > 0.0:
                fail(lineno, f"positive log10 probability {log10_prob}")
            gram = tuple(parts[1 : current + 1])
            if gram in probs:
                fail(lineno, f"duplicate {current}-gram {' '.join(gram)!r}")
            probs[gram] = log10_prob
            if current < order:
                backoffs[gram] = backoff
        if section_order is None and not saw_end:
            raise ArpaFormatError("missing \\end\\ marker")
        if saw_end:
            break
    if not saw_end:
        raise ArpaFormatError("missing \\end\\ marker")

    counts: dict[int, int] = {k: 0 for k in declared}
    for gram in probs:
        counts[len(gram)] = counts.get(len(gram), 0) + 1
    for k, expected in declared.items():
        if counts.get(k, 0) != expected:
            raise ArpaFormatError(
                f"count mismatch for {k}-grams: declared {expected}, "
                f"parsed {counts.get(k, 0)}"
            )

    for gram in probs:
        if len(gram) > 1 and gram[:-1] not in probs:
            raise ArpaFormatError(
                f"{len(gram)}-gram {' '.join(gram)!r} lacks its "
                f"{len(gram) - 1}-gram prefix"
            )

    return NGramLM(order=order, probs=probs, backoffs=backoffs, oov_log10=oov_log10)


def dump_arpa(lm: NGramLM) -> str:
    """Serialize a model back to ARPA text (entries sorted, full precision)."""
    out = ["\\data\\"]
    counts = lm.counts()
    for k, count in enumerate(counts, start=1):
        out.append(f"ngram {k}={count}")
    for k in range(1, lm.order + 1):
        out.append("")
        out.append(f"\\{k}-grams:")
        for gram in sorted(lm.grams(k)):
            fields = [repr(lm.log10_prob(gram)), *gram]
            if k < lm.order:
                fields.append(repr(lm.backoff(gram)))
            out.append("\t".join(fields))
    out.append("")
    out.append("\\end\\")
    out.append("")
    return "\n".join(out)


def load_ngram_lm(path, oov_log10: float = DEFAULT_OOV_LOG10) -> NGramLM:
    """Load an ARPA file, transparently handling gzip by magic bytes."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    opener = gzip.open if magic == b"\x1f\x8b" else open
    with opener(path, "rt", encoding="utf-8") as fh:
        return parse_arpa(fh, oov_log10=oov_log10)
