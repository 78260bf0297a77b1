import gzip

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lga.lm import (
    ArpaFormatError,
    LMState,
    NGramLM,
    dump_arpa,
    load_ngram_lm,
    parse_arpa,
    score_sequence,
    score_word,
)

from helpers import FIXTURE_ARPA
from oracles import suffix_backoff_score


def test_parse_fixture():
    lm = parse_arpa(FIXTURE_ARPA)
    assert lm.order == 2
    assert lm.counts() == [2, 1]
    assert lm.vocab_size == 2
    assert lm.log10_prob(("a",)) == -0.5
    assert lm.backoff(("a",)) == -0.3
    assert lm.log10_prob(("a", "b")) == -0.2


def test_parse_count_mismatch():
    text = FIXTURE_ARPA.replace("ngram 1=2", "ngram 1=3")
    with pytest.raises(ArpaFormatError, match="count mismatch"):
        parse_arpa(text)


def test_parse_empty_stream():
    with pytest.raises(ArpaFormatError, match="data"):
        parse_arpa("")


def test_parse_missing_end():
    text = FIXTURE_ARPA.replace("\\end\\", "")
    with pytest.raises(ArpaFormatError, match="end"):
        parse_arpa(text)


def test_parse_malformed_line():
    text = FIXTURE_ARPA.replace("-0.2\ta b", "-0.2\ta b extra junk")
    with pytest.raises(ArpaFormatError, match="malformed|count"):
        parse_arpa(text)


def test_parse_rejects_orphan_ngram():
    text = """\\data\\
ngram 1=1
ngram 2=1

\\1-grams:
-0.5\ta\t-0.3

\\2-grams:
-0.2\tb a

\\end\\
"""
    with pytest.raises(ArpaFormatError, match="prefix"):
        parse_arpa(text)


def test_parse_missing_backoff_defaults_to_zero():
    text = """\\data\\
ngram 1=2
ngram 2=1

\\1-grams:
-0.5\ta
-0.7\tb\t-0.1

\\2-grams:
-0.2\ta b

\\end\\
"""
    lm = parse_arpa(text)
    assert lm.backoff(("a",)) == 0.0
    assert lm.backoff(("b",)) == -0.1


def test_score_word_direct_hit(fixture_lm):
    score, state = score_word(fixture_lm, LMState(("a",)), "b")
    assert score == -0.2
    assert state == LMState(("b",))


def test_score_word_backoff(fixture_lm):
    score, state = score_word(fixture_lm, LMState(("b",)), "a")
    assert score == pytest.approx(-0.1 + -0.5, abs=0)
    assert state == LMState(("a",))


def test_score_word_oov_penalty(fixture_lm):
    score, state = score_word(fixture_lm, LMState(("a",)), "zzz")
    assert score == -10.0
    assert state == LMState(("zzz",))


def test_score_word_maps_to_unk():
    text = """\\data\\
ngram 1=2

\\1-grams:
-0.5\ta
-1.5\t<unk>

\\end\\
"""
    lm = parse_arpa(text)
    score, state = score_word(lm, LMState(()), "zzz")
    assert score == -1.5
    assert state.context == ()  # order 1 keeps no context


def test_score_word_context_truncation(fixture_lm):
    long_context = LMState(("x", "y", "b"))
    short_context = LMState(("b",))
    assert score_word(fixture_lm, long_context, "a") == score_word(
        fixture_lm, short_context, "a"
    )


def test_score_sequence(fixture_lm):
    assert score_sequence(fixture_lm, []) == 0.0
    assert score_sequence(fixture_lm, ["a"]) == -0.5
    assert score_sequence(fixture_lm, ["a", "b"]) == pytest.approx(-0.7, abs=1e-12)


def test_score_sequence_starts_at_sentence_start_when_known():
    text = """\\data\\
ngram 1=2
ngram 2=1

\\1-grams:
-0.1\t<s>\t-0.4
-0.5\ta\t-0.3

\\2-grams:
-0.25\t<s> a

\\end\\
"""
    lm = parse_arpa(text)
    assert lm.initial_state() == LMState(("<s>",))
    assert score_sequence(lm, ["a"]) == -0.25


def test_score_sequence_matches_threaded_states(fixture_lm):
    words = ["a", "b", "a", "q", "b"]
    state = fixture_lm.initial_state()
    total = 0.0
    for word in words:
        inc, state = score_word(fixture_lm, state, word)
        total += inc
    assert score_sequence(fixture_lm, words) == pytest.approx(total, abs=0)


def test_round_trip_serialization(fixture_lm):
    text = dump_arpa(fixture_lm)
    again = parse_arpa(text)
    assert again == fixture_lm
    assert dump_arpa(again) == text


def test_gzip_detection(tmp_path):
    plain = tmp_path / "lm.arpa"
    plain.write_text(FIXTURE_ARPA)
    zipped = tmp_path / "lm.arpa.gz"
    with gzip.open(zipped, "wt") as fh:
        fh.write(FIXTURE_ARPA)
    assert load_ngram_lm(plain) == load_ngram_lm(zipped)


def _random_lm(rng_words, draw_floats):
    """Build a structurally-valid 3-gram model from drawn values."""
    words = rng_words
    probs = {}
    backoffs = {}
    it = iter(draw_floats)
    for w in words:
        probs[(w,)] = next(it)
        backoffs[(w,)] = next(it) / 2
    pairs = [(a, b) for a in words for b in words][: len(words) * 2]
    for pair in pairs:
        probs[pair] = next(it)
        backoffs[pair] = next(it) / 2
        triple = pair + (words[0],)
        probs[triple] = next(it)
    return NGramLM(order=3, probs=probs, backoffs=backoffs)


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_score_word_matches_suffix_oracle(data):
    words = ["a", "b", "c", "d"]
    need = len(words) * 2 + len(words) * 2 * 3
    floats = data.draw(
        st.lists(
            st.floats(min_value=-5, max_value=0, allow_nan=False),
            min_size=need,
            max_size=need,
        )
    )
    lm = _random_lm(words, floats)
    context = tuple(
        data.draw(
            st.lists(st.sampled_from(words + ["zzz"]), min_size=0, max_size=4)
        )
    )
    word = data.draw(st.sampled_from(words + ["zzz"]))
    expected = suffix_backoff_score(
        lm._probs, lm._backoffs, context, word, lm.order, lm.oov_log10
    )
    got, _ = score_word(lm, LMState(context), word)
    assert got == expected


def test_positive_log_prob_rejected():
    text = FIXTURE_ARPA.replace("-0.5\ta", "0.5\ta")
    with pytest.raises(ArpaFormatError, match="positive"):
        parse_arpa(text)
