"""
Metrics - Corpus BLEU, ROUGE-L and an exact-match METEOR for single-reference summaries.

All inputs are token lists already lowercased and whitespace-split.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple, Union

from .errors import EmptyHypothesisError

# Above this many alignment states METEOR falls back to a left-to-right alignment
MAX_ALIGNMENT_STATES = 200_000


@dataclass(frozen=True)
class EvalPair:
    hypothesis: Tuple[str, ...]
    reference: Tuple[str, ...]

    @classmethod
    def of(cls, hypothesis: Sequence[str], reference: Sequence[str]) -> "EvalPair":
        return cls(tuple(hypothesis), tuple(reference))


PairLike = Union[EvalPair, Tuple[Sequence[str], Sequence[str]]]


def _pairs(pairs: Sequence[PairLike]) -> List[EvalPair]:
    return [p if isinstance(p, EvalPair) else EvalPair.of(*p) for p in pairs]


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_corpus(pairs: Sequence[PairLike], max_n: int = 4) -> float:
    """Corpus BLEU: pooled clipped n-gram precisions, geometric mean, brevity penalty; no smoothing."""
    items = _pairs(pairs)
    if not items:
        raise ValueError("bleu_corpus needs at least one pair")
    if all(not item.hypothesis for item in items):
        raise EmptyHypothesisError("every hypothesis is empty")
    matched = [0] * max_n
    totals = [0] * max_n
    hyp_length = ref_length = 0
    for item in items:
        hyp_length += len(item.hypothesis)
        ref_length += len(item.reference)
        for n in range(1, max_n + 1):
            hyp_grams = _ngrams(item.hypothesis, n)
            ref_grams = _ngrams(item.reference, n)
            matched[n - 1] += sum(min(count, ref_grams[gram]) for gram, count in hyp_grams.items())
            totals[n - 1] += max(len(item.hypothesis) - n + 1, 0)
    if any(t == 0 for t in totals) or any(m == 0 for m in matched):
        return 0.0
    log_precision = sum(math.log(m / t) for m, t in zip(matched, totals)) / max_n
    brevity = 1.0 if hyp_length > ref_length else math.exp(1.0 - ref_length / hyp_length)
    return brevity * math.exp(log_precision)


def lcs_length(first: Sequence[str], second: Sequence[str]) -> int:
    previous = [0] * (len(second) + 1)
    for token in first:
        current = [0]
        for j, other in enumerate(second):
            current.append(previous[j] + 1 if token == other else max(previous[j + 1], current[j]))
        previous = current
    return previous[-1]


def rouge_l(pairs: Sequence[PairLike]) -> float:
    """Mean ROUGE-L F1 over pairs."""
    items = _pairs(pairs)
    if not items:
        return 0.0
    total = 0.0
    for item in items:
        common = lcs_length(item.hypothesis, item.reference)
        if common == 0:
            continue
        precision = common / len(item.hypothesis)
        recall = common / len(item.reference)
        total += 2 * precision * recall / (precision + recall)
    return total / len(items)


def align_exact(hypothesis: Sequence[str], reference: Sequence[str]) -> Tuple[int, int]:
    """
    Exact unigram alignment with the most matches and, among those, the fewest chunks.

    Returns:
        (matches, chunks)
    """
    positions: Dict[str, List[int]] = {}
    for j, token in enumerate(reference):
        positions.setdefault(token, []).append(j)
    candidates = [tuple(positions.get(token, ())) for token in hypothesis]
    length = len(hypothesis)
    states = 0

    @lru_cache(maxsize=None)
    def best(i: int, used: int, previous: int) -> Tuple[int, int]:
        # Value is (matches, -chunks), maximized lexicographically
        nonlocal states
        states += 1
        if states > MAX_ALIGNMENT_STATES:
            raise OverflowError
        if i == length:
            return 0, 0
        matches, neg_chunks = best(i + 1, used, -1)
        for j in candidates[i]:
            if used >> j & 1:
                continue
            sub_matches, sub_neg = best(i + 1, used | (1 << j), j)
            opens_chunk = 0 if previous >= 0 and j == previous + 1 else 1
            option = (sub_matches + 1, sub_neg - opens_chunk)
            if option > (matches, neg_chunks):
                matches, neg_chunks = option
        return matches, neg_chunks

    try:
        matches, neg_chunks = best(0, 0, -1)
        return matches, -neg_chunks
    except OverflowError:
        return _greedy_alignment(candidates)
    finally:
        best.cache_clear()


def _greedy_alignment(candidates: Sequence[Tuple[int, ...]]) -> Tuple[int, int]:
    used = set()
    matches = chunks = 0
    previous = -2
    for options in candidates:
        free = [j for j in options if j not in used]
        if not free:
            previous = -2
            continue
        j = previous + 1 if previous + 1 in free else free[0]
        if j != previous + 1:
            chunks += 1
        used.add(j)
        matches += 1
        previous = j
    return matches, chunks


def meteor_sentence(hypothesis: Sequence[str], reference: Sequence[str]) -> float:
    matches, chunks = align_exact(hypothesis, reference)
    if matches == 0:
        return 0.0
    precision = matches / len(hypothesis)
    recall = matches / len(reference)
    f_mean = 10 * precision * recall / (recall + 9 * precision)
    penalty = 0.5 * (chunks / matches) ** 3
    return f_mean * (1 - penalty)


def meteor_exact(pairs: Sequence[PairLike]) -> float:
    """Mean exact-match METEOR (no stemming or synonym stages)."""
    items = _pairs(pairs)
    if not items:
        return 0.0
    return sum(meteor_sentence(item.hypothesis, item.reference) for item in items) / len(items)


def exact_match(pairs: Sequence[PairLike]) -> float:
    items = _pairs(pairs)
    if not items:
        return 0.0
    return sum(item.hypothesis == item.reference for item in items) / len(items)


def metric_report(pairs: Sequence[PairLike]) -> Dict[str, object]:
    """Percentages rounded to two decimals, the way result tables print them."""
    items = _pairs(pairs)
    try:
        bleu = bleu_corpus(items)
    except EmptyHypothesisError:
        bleu = 0.0
    return {
        "bleu": round(100 * bleu, 2),
        "meteor_exact": round(100 * meteor_exact(items), 2),
        "rouge_l": round(100 * rouge_l(items), 2),
        "n_pairs": len(items),
    }
