import math

import pytest

from core.errors import EmptyHypothesisError
from core.metrics import (
    EvalPair,
    align_exact,
    bleu_corpus,
    exact_match,
    lcs_length,
    meteor_exact,
    meteor_sentence,
    metric_report,
    rouge_l,
)


def pair(hyp, ref):
    return EvalPair.of(hyp.split(), ref.split())


def test_identity_scores_are_exactly_one():
    pairs = [pair("returns the sum of a and b", "returns the sum of a and b"),
             pair("checks whether x is even", "checks whether x is even")]
    assert bleu_corpus(pairs) == 1.0
    assert rouge_l(pairs) == 1.0
    assert exact_match(pairs) == 1.0


def test_bleu_without_matching_four_grams_is_zero():
    pairs = [pair("the cat sat on the mat", "the cat is on the mat")]
    assert bleu_corpus(pairs) == 0.0


def test_bleu_trigram_golden_value():
    pairs = [pair("the cat sat on the mat", "the cat is on the mat")]
    assert bleu_corpus(pairs, max_n=3) == pytest.approx(0.5, abs=1e-12)


def test_bleu_brevity_penalty():
    pairs = [pair("a b", "a b c d")]
    assert bleu_corpus(pairs, max_n=2) == pytest.approx(math.exp(1 - 4 / 2))


def test_bleu_pools_counts_over_the_corpus():
    # No 4-gram overlap in the first pair alone, but the corpus total is non-zero
    pairs = [pair("a b c", "a b c"), pair("w x y z", "w x y z")]
    assert bleu_corpus(pairs) > 0.0


def test_bleu_errors():
    with pytest.raises(ValueError):
        bleu_corpus([])
    with pytest.raises(EmptyHypothesisError):
        bleu_corpus([EvalPair.of([], ["a"])])


def test_rouge_l_golden_value():
    assert rouge_l([pair("a b c", "a c")]) == pytest.approx(0.8, abs=1e-9)


def test_lcs_length():
    assert lcs_length("a b c b d a b".split(), "b d c a b a".split()) == 4


def test_meteor_identical_three_tokens():
    assert meteor_sentence("a b c".split(), "a b c".split()) == pytest.approx(0.981481, abs=1e-6)


def test_meteor_single_token():
    assert meteor_sentence(["a"], ["a"]) == pytest.approx(0.5)


def test_meteor_no_match():
    assert meteor_sentence(["x"], ["y"]) == 0.0


def test_alignment_prefers_fewer_chunks():
    assert align_exact("the cat the".split(), "the the cat".split()) == (3, 2)
    assert align_exact("a b c d".split(), "c d a b".split()) == (4, 2)


def test_meteor_mean_over_pairs():
    pairs = [pair("a b c", "a b c"), pair("x", "y")]
    assert meteor_exact(pairs) == pytest.approx(0.981481 / 2, abs=1e-6)


def test_metric_report_format():
    report = metric_report([pair("a b c d", "a b c d")])
    assert report == {"bleu": 100.0, "meteor_exact": 99.22, "rouge_l": 100.0, "n_pairs": 1}


def test_metric_report_with_empty_hypotheses():
    report = metric_report([EvalPair.of([], ["a", "b"])])
    assert report["bleu"] == 0.0
    assert report["rouge_l"] == 0.0


def _scores(pairs):
    return bleu_corpus(pairs), rouge_l(pairs), meteor_exact(pairs)


def test_scores_ignore_vocabulary_relabeling():
    pairs = [pair("returns the sum of a and b", "returns the sum of x and y"),
             pair("checks whether a is even and a is small", "checks whether x is even"),
             pair("calls log once for each index below n", "calls log for each index below n")]
    words = sorted({token for p in pairs for side in (p.hypothesis, p.reference) for token in side})
    # A bijection that also reverses alphabetical order
    rename = {word: f"w{len(words) - i:03d}" for i, word in enumerate(words)}
    renamed = [EvalPair.of([rename[t] for t in p.hypothesis], [rename[t] for t in p.reference]) for p in pairs]
    assert _scores(renamed) == pytest.approx(_scores(pairs), abs=1e-12)
    assert _scores(pairs)[0] > 0.0


def test_bleu_never_rises_as_tokens_become_unknown():
    pairs = [pair("returns the sum of a and b plus one", "returns the sum of a and b"),
             pair("computes the factorial of n", "computes the factorial of n")]
    score = bleu_corpus(pairs)
    assert score > 0.0
    for position in range(len(pairs[0].hypothesis)):
        hypothesis = list(pairs[0].hypothesis)
        hypothesis[position] = "<unk>"
        pairs = [EvalPair.of(hypothesis, pairs[0].reference), pairs[1]]
        current = bleu_corpus(pairs)
        assert current <= score
        score = current
