"""CTC greedy decoding and prefix beam search with n-gram shallow fusion.

The beam search operates on collapsed prefixes: every hypothesis tracks
the probability mass of alignments ending in blank and in non-blank
separately, and hypotheses that collapse to the same token sequence are
merged by log-sum-exp.  With pruning disabled and a wide enough beam the
search is exact, which the test suite checks against a brute-force
alignment enumeration.

Scoring is natural-log throughout.  The language model and the word
bonus fire exactly once per completed word: a word completes when the
word delimiter token is emitted, and a nonempty partial word is closed at
the end of the sequence.  Partial words are never LM-scored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from lga.container import Vocabulary
from lga.lm import LMState, NGramLM, score_word
from lga.projection import LogProbsMatrix

NEG_INF = float("-inf")
LN10 = math.log(10.0)


def _logaddexp(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


@dataclass(frozen=True)
class DecodeParams:
    """Beam search knobs.

    ``token_min_logp`` and ``beam_prune_logp`` may be ``-inf`` to disable
    per-step token pruning and the score-window prune respectively;
    ``max_candidates_per_step=None`` considers every token.
    """

    beam_width: int = 100
    alpha1: float = 0.5
    alpha2: float = 0.0
    token_min_logp: float = -5.0
    beam_prune_logp: float = -10.0
    max_candidates_per_step: int | None = None

    def validate(self) -> None:
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.token_min_logp > 0:
            raise ValueError("token_min_logp must be <= 0")
        if self.beam_prune_logp > 0:
            raise ValueError("beam_prune_logp must be <= 0")
        if self.max_candidates_per_step is not None and self.max_candidates_per_step < 1:
            raise ValueError("max_candidates_per_step must be >= 1")


@dataclass
class BeamHypothesis:
    """One collapsed prefix with its CTC mass split and LM bookkeeping."""

    tokens: tuple[int, ...]
    words: tuple[str, ...]
    partial_word: str
    p_blank: float
    p_nonblank: float
    lm_state: LMState
    lm_score: float  # natural-log LM total, alpha1 not yet applied

    @property
    def am_logp(self) -> float:
        return _logaddexp(self.p_blank, self.p_nonblank)

    def combined(self, alpha1: float, alpha2: float, use_lm: bool) -> float:
        score = self.am_logp + alpha2 * len(self.words)
        if use_lm:
            score += alpha1 * self.lm_score
        return score


@dataclass(frozen=True)
class Transcript:
    """Final decode result for one utterance."""

    text: str
    token_ids: tuple[int, ...]
    am_logp: float
    lm_log10: float
    combined_score: float


def ctc_collapse(ids: Sequence[int], blank: int) -> list[int]:
    """Collapse an alignment: merge adjacent repeats, then drop blanks."""
    out: list[int] = []
    prev: int | None = None
    for i in ids:
        if i != prev:
            out.append(i)
        prev = i
    return [i for i in out if i != blank]


def greedy_decode(logprobs: LogProbsMatrix, vocab: Vocabulary) -> Transcript:
    """Per-timestep argmax (ties to the lowest index), collapsed."""
    values = logprobs.values
    if values.shape[0] < 1:
        raise ValueError("need at least one timestep")
    ids = np.argmax(values, axis=-1)
    am_logp = float(values[np.arange(values.shape[0]), ids].sum())
    collapsed = ctc_collapse([int(i) for i in ids], vocab.blank_id)
    return Transcript(
        text=vocab.render(collapsed),
        token_ids=tuple(collapsed),
        am_logp=am_logp,
        lm_log10=0.0,
        combined_score=am_logp,
    )


def _advance_word_state(
    hyp: BeamHypothesis, token: int, vocab: Vocabulary, lm: NGramLM | None
) -> tuple[tuple[str, ...], str, LMState, float]:
    """Word bookkeeping for appending one non-blank token to a prefix."""
    if token == vocab.word_delimiter_id:
        if hyp.partial_word:
            words = hyp.words + (hyp.partial_word,)
            if lm is not None:
                log10, lm_state = score_word(lm, hyp.lm_state, hyp.partial_word)
                return words, "", lm_state, hyp.lm_score + LN10 * log10
            return words, "", hyp.lm_state, hyp.lm_score
        return hyp.words, "", hyp.lm_state, hyp.lm_score
    return hyp.words, hyp.partial_word + vocab.tokens[token], hyp.lm_state, hyp.lm_score


def _close_partial_word(
    hyp: BeamHypothesis, lm: NGramLM | None
) -> BeamHypothesis:
    """Close a trailing partial word at end of sequence."""
    if not hyp.partial_word:
        return hyp
    words = hyp.words + (hyp.partial_word,)
    lm_state, lm_score = hyp.lm_state, hyp.lm_score
    if lm is not None:
        log10, lm_state = score_word(lm, hyp.lm_state, hyp.partial_word)
        lm_score = hyp.lm_score + LN10 * log10
    return replace(
        hyp, words=words, partial_word="", lm_state=lm_state, lm_score=lm_score
    )


def beam_search_decode(
    logprobs: LogProbsMatrix,
    vocab: Vocabulary,
    lm: NGramLM | None = None,
    params: DecodeParams | None = None,
    step_hook: Callable[[int, list[BeamHypothesis]], None] | None = None,
) -> list[Transcript]:
    """CTC prefix beam search over collapsed prefixes.

    Returns up to ``beam_width`` transcripts ordered by combined score
    descending with lexicographic text as the tiebreak, so identical
    inputs always produce identical output.  ``step_hook``, if given, is
    called with the surviving hypotheses after every timestep (used by
    diagnostics and the test suite).
    """
    params = params or DecodeParams()
    params.validate()
    values = logprobs.values
    seq_len, num_tokens = values.shape
    if seq_len < 1:
        raise ValueError("need at least one timestep")
    blank = vocab.blank_id
    use_lm = lm is not None
    alpha1, alpha2 = params.alpha1, params.alpha2
    max_cand = params.max_candidates_per_step or num_tokens

    init_state = lm.initial_state() if lm is not None else LMState(())
    root = BeamHypothesis(
        tokens=(),
        words=(),
        partial_word="",
        p_blank=0.0,
        p_nonblank=NEG_INF,
        lm_state=init_state,
        lm_score=0.0,
    )
    beam: dict[tuple[int, ...], BeamHypothesis] = {(): root}

    for t in range(seq_len):
        row = values[t]
        argmax_id = int(np.argmax(row))
        candidates = [
            c
            for c in np.argsort(-row, kind="stable")[:max_cand]
            if row[c] >= params.token_min_logp or c == argmax_id
        ]
        next_beam: dict[tuple[int, ...], BeamHypothesis] = {}

        def upsert(key, template, d_blank, d_nonblank):
            hyp = next_beam.get(key)
            if hyp is None:
                next_beam[key] = replace(
                    template, tokens=key, p_blank=d_blank, p_nonblank=d_nonblank
                )
            else:
                hyp.p_blank = _logaddexp(hyp.p_blank, d_blank)
                hyp.p_nonblank = _logaddexp(hyp.p_nonblank, d_nonblank)

        for prefix, hyp in beam.items():
            p_total = hyp.am_logp
            # Blank extension always exists, so the beam can never empty.
            upsert(prefix, hyp, p_total + float(row[blank]), NEG_INF)
            for cand in candidates:
                token = int(cand)
                if token == blank:
                    continue
                token_logp = float(row[token])
                if prefix and prefix[-1] == token:
                    # Repeat without a separating blank collapses in place;
                    # only the blank-ending mass starts a fresh instance.
                    upsert(prefix, hyp, NEG_INF, hyp.p_nonblank + token_logp)
                    mass = hyp.p_blank
                else:
                    mass = p_total
                if mass == NEG_INF:
                    continue
                new_tokens = prefix + (token,)
                if new_tokens in next_beam:
                    grown = next_beam[new_tokens]
                    grown.p_nonblank = _logaddexp(grown.p_nonblank, mass + token_logp)
                else:
                    words, partial, lm_state, lm_score = _advance_word_state(
                        hyp, token, vocab, lm
                    )
                    next_beam[new_tokens] = BeamHypothesis(
                        tokens=new_tokens,
                        words=words,
                        partial_word=partial,
                        p_blank=NEG_INF,
                        p_nonblank=mass + token_logp,
                        lm_state=lm_state,
                        lm_score=lm_score,
                    )

        ranked = sorted(
            next_beam.values(),
            key=lambda h: (-h.combined(alpha1, alpha2, use_lm), h.tokens),
        )
        kept = ranked[: params.beam_width]
        if params.beam_prune_logp > NEG_INF and kept:
            floor = kept[0].combined(alpha1, alpha2, use_lm) + params.beam_prune_logp
            kept = [h for h in kept if h.combined(alpha1, alpha2, use_lm) >= floor]
        beam = {h.tokens: h for h in kept}
        if step_hook is not None:
            step_hook(t, kept)

    finals = [_close_partial_word(h, lm) for h in beam.values()]
    transcripts = []
    for hyp in finals:
        am = hyp.am_logp
        combined = am + alpha2 * len(hyp.words)
        if use_lm:
            combined += alpha1 * hyp.lm_score
        transcripts.append(
            Transcript(
                text=vocab.render(hyp.tokens),
                token_ids=hyp.tokens,
                am_logp=am,
                lm_log10=hyp.lm_score / LN10,
                combined_score=combined,
            )
        )
    transcripts.sort(key=lambda tr: (-tr.combined_score, tr.text))
    return transcripts[: params.beam_width]
