"""
Relations Command - Clipped ancestor/sibling relations, or their sparsity with --stats.
"""

from __future__ import annotations

import argparse
import functools
from pathlib import Path
from typing import Any, Dict

from core.corpus import CorpusExample, linearize_example, map_examples
from core.linearizer import Method
from core.relations import DEFAULT_K, build_relations, sparsity_stats

from .base import BaseCommand, UsageError
from .linearize_command import add_method_arguments


def relation_record(example: CorpusExample, method: Method, seed: int, max_path_len: int, max_paths: int,
                    k_anc: int, k_sib: int, stats_only: bool) -> Dict[str, Any]:
    tree = example.tree()
    seq = linearize_example(example, method, seed, max_path_len, max_paths, tree)
    relset = build_relations(tree, seq, k_anc, k_sib)
    if stats_only:
        return {"id": example.id, **sparsity_stats(relset).to_record()}
    return {
        "id": example.id,
        "n": relset.n,
        "anc": [[i, j, relset.anc[(i, j)]] for i, j in sorted(relset.allowed_anc)],
        "sib": [[i, j, relset.sib[(i, j)]] for i, j in sorted(relset.allowed_sib)],
    }


class RelationsCommand(BaseCommand):
    name = "relations"
    help = "compute K-clipped relation pairs [i, j, distance] per example"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        self.add_input(parser)
        add_method_arguments(parser)
        parser.add_argument("--k-anc", type=int, default=None, help=f"ancestry clip (default {DEFAULT_K})")
        parser.add_argument("--k-sib", type=int, default=None, help=f"sibling clip (default {DEFAULT_K})")
        parser.add_argument("--stats", action="store_true", help="emit the reduction report instead")
        parser.add_argument("--out", type=Path, default=None)
        self.add_seed(parser)
        self.add_workers(parser)

    def run(self, args: argparse.Namespace) -> int:
        k_anc = DEFAULT_K if args.k_anc is None else args.k_anc
        k_sib = DEFAULT_K if args.k_sib is None else args.k_sib
        if k_anc < 1 or k_sib < 1:
            raise UsageError("--k-anc and --k-sib must be at least 1")
        examples = self.read_inputs(args)
        record = functools.partial(
            relation_record, method=Method(args.method or Method.POT.value), seed=self.seed_of(args),
            max_path_len=args.pd_max_path_len, max_paths=args.pd_max_paths, k_anc=k_anc, k_sib=k_sib,
            stats_only=args.stats,
        )
        self.emit_jsonl(map_examples(record, examples, args.workers), args.out)
        return 0
