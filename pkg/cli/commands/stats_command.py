"""
Stats Command - Sequence lengths per linearization and the attention sparsity distribution.
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np

from core.corpus import CorpusExample, build_vocab, linearize_example
from core.linearizer import Method
from core.minilang import tokenize
from core.relations import DEFAULT_K, ReductionReport, build_relations, sparsity_stats
from core.tensor import no_grad
from core.tree_transformer import AttentionCounter, ModelConfig, ModelInput, collate, encoder_forward, init_params

from .base import BaseCommand, UsageError
from .linearize_command import add_method_arguments

logger = logging.getLogger(__name__)

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def distribution(values: Sequence[float]) -> Dict[str, float]:
    data = np.asarray(values, dtype=np.float64)
    summary = {"mean": float(data.mean()), "min": float(data.min()), "max": float(data.max())}
    for q, value in zip(QUANTILES, np.quantile(data, QUANTILES)):
        summary[f"q{int(q * 100):02d}"] = float(value)
    return summary


def length_stats(examples: Sequence[CorpusExample], seed: int, max_path_len: int,
                 max_paths: int) -> Dict[str, Any]:
    """Mean linearized length per method against the mean source-token count."""
    trees = [example.tree() for example in examples]
    source_counts = [len(tokenize(ex.source)) for ex in examples if ex.source is not None]
    report: Dict[str, Any] = {
        "examples": len(examples),
        "mean_nodes": float(np.mean([tree.n for tree in trees])),
        "mean_source_tokens": float(np.mean(source_counts)) if source_counts else None,
    }
    for method in Method:
        lengths = [len(linearize_example(ex, method, seed, max_path_len, max_paths, tree))
                   for ex, tree in zip(examples, trees)]
        entry: Dict[str, Any] = {"mean_length": float(np.mean(lengths))}
        if source_counts:
            entry["length_over_source"] = entry["mean_length"] / report["mean_source_tokens"]
        report[method.value] = entry
    return report


def count_scores(inputs: Sequence[ModelInput], vocab_size: int, k_anc: int, k_sib: int,
                 batch_size: int = 8) -> AttentionCounter:
    """Run a small untrained encoder and count the attention scores its softmax keeps."""
    config = ModelConfig(d_model=8, heads=2, enc_layers=1, dec_layers=0, d_ff=8, k_anc=k_anc, k_sib=k_sib,
                         code_vocab_size=vocab_size, summary_vocab_size=1, dropout=0.0)
    params = init_params(config)
    counter = AttentionCounter()
    with no_grad():
        for start in range(0, len(inputs), batch_size):
            batch = collate(inputs[start:start + batch_size], k_anc, k_sib)
            encoder_forward(batch, params, config, counter=counter)
    return counter


class StatsCommand(BaseCommand):
    name = "stats"
    help = "report sequence lengths and relation sparsity over a corpus"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--corpus", type=Path, required=True)
        add_method_arguments(parser)
        parser.add_argument("--k-anc", type=int, default=None)
        parser.add_argument("--k-sib", type=int, default=None)
        parser.add_argument("--count-scores", action="store_true",
                            help="also count encoder attention scores with an untrained model")
        parser.add_argument("--out", type=Path, default=None)
        self.add_seed(parser)

    def run(self, args: argparse.Namespace) -> int:
        k_anc = DEFAULT_K if args.k_anc is None else args.k_anc
        k_sib = DEFAULT_K if args.k_sib is None else args.k_sib
        if k_anc < 1 or k_sib < 1:
            raise UsageError("--k-anc and --k-sib must be at least 1")
        seed = self.seed_of(args)
        method = Method(args.method or Method.POT.value)
        examples = self.read_inputs(args)

        reports: List[ReductionReport] = []
        inputs: List[ModelInput] = []
        vocab = build_vocab(examples, "code", 1, method, seed, args.pd_max_path_len, args.pd_max_paths)
        for example in examples:
            tree = example.tree()
            seq = linearize_example(example, method, seed, args.pd_max_path_len, args.pd_max_paths, tree)
            relset = build_relations(tree, seq, k_anc, k_sib)
            reports.append(sparsity_stats(relset))
            if args.count_scores:
                inputs.append(ModelInput(tuple(vocab.encode(seq.texts)), relset))

        result: Dict[str, Any] = {
            "lengths": length_stats(examples, seed, args.pd_max_path_len, args.pd_max_paths),
            "sparsity": {
                "method": method.value,
                "k_anc": k_anc,
                "k_sib": k_sib,
                "reduction": distribution([r.reduction for r in reports]),
                "score_reduction": distribution([r.score_reduction for r in reports]),
            },
        }
        if args.count_scores:
            counter = count_scores(inputs, len(vocab), k_anc, k_sib)
            result["sparsity"]["counted"] = {
                "unmasked": counter.unmasked,
                "dense": counter.dense_scores,
                "materialized": counter.materialized,
                "reduction": counter.reduction,
            }
        logger.info("Mean pair reduction %.4f over %d examples", result["sparsity"]["reduction"]["mean"],
                    len(reports))
        self.emit_json(result, args.out)
        return 0
