"""
Gen Command - Write a deterministic synthetic corpus.
"""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from core.corpus import dumps_jsonl, generate_corpus

from .base import BaseCommand, UsageError

logger = logging.getLogger(__name__)


class GenCommand(BaseCommand):
    name = "gen"
    help = "generate a synthetic code/summary corpus"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--n", type=int, required=True, help="number of examples")
        parser.add_argument("--size", choices=("small", "medium", "mixed"), default="mixed")
        parser.add_argument("--out", type=Path, default=None, help="output JSONL (default stdout)")
        self.add_seed(parser)
        self.add_workers(parser)

    def run(self, args: argparse.Namespace) -> int:
        if args.n < 1:
            raise UsageError("--n must be at least 1")
        examples = generate_corpus(args.n, self.seed_of(args), args.size, args.workers, progress=not args.quiet)
        logger.info("Generated %d examples", len(examples))
        self.emit_text(dumps_jsonl(ex.to_record() for ex in examples), args.out)
        return 0
