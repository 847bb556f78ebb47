"""
Timing Command - Wall time of each linearization over random trees.
"""

from __future__ import annotations

import argparse
import random

from core.ast_tree import random_tree
from core.linearizer import Method, timing_report

from .base import BaseCommand, UsageError


class TimingCommand(BaseCommand):
    name = "timing"
    help = "time POT, SBT and PD over random trees"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--n", type=int, default=10000, help="number of trees")
        parser.add_argument("--max-nodes", type=int, default=50)
        parser.add_argument("--max-branch", type=int, default=4)
        self.add_seed(parser)

    def run(self, args: argparse.Namespace) -> int:
        if args.n < 1 or args.max_nodes < 1 or args.max_branch < 1:
            raise UsageError("--n, --max-nodes and --max-branch must be at least 1")
        rng = random.Random(self.seed_of(args))
        trees = [random_tree(rng.randrange(2 ** 31), rng.randint(1, args.max_nodes), args.max_branch)
                 for _ in range(args.n)]
        rows = timing_report(trees, list(Method))
        by_method = {row.method: row.total_seconds for row in rows}
        pot_seconds = by_method[Method.POT]
        self.emit_json({
            "trees": args.n,
            "rows": [row.to_record() for row in rows],
            "pot_over_sbt": pot_seconds / by_method[Method.SBT] if by_method[Method.SBT] else None,
            "pot_over_pd": pot_seconds / by_method[Method.PD] if by_method[Method.PD] else None,
        }, None)
        return 0
