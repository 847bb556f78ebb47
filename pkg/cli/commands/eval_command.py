"""
Eval Command - Greedy-decode a corpus from a checkpoint and score it.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from core.checkpoint import load_checkpoint
from core.corpus import atomic_write_text, dumps_jsonl, read_corpus
from core.trainer import TrainingConfig, evaluate

from .base import BaseCommand


class EvalCommand(BaseCommand):
    name = "eval"
    help = "decode and report BLEU, METEOR (exact) and ROUGE-L as percentages"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--checkpoint", type=Path, required=True)
        parser.add_argument("--corpus", type=Path, required=True)
        parser.add_argument("--predictions", type=Path, default=None, help="write hypotheses as JSONL")
        parser.add_argument("--out", type=Path, default=None, help="metrics JSON (default stdout)")
        self.add_workers(parser)

    def run(self, args: argparse.Namespace) -> int:
        checkpoint = load_checkpoint(args.checkpoint)
        training = TrainingConfig.from_dict(checkpoint.training)
        corpus = read_corpus(args.corpus)
        report, hypotheses = evaluate(corpus, checkpoint.params, checkpoint.config, checkpoint.vocabs,
                                      training, args.workers, progress=not args.quiet)
        if args.predictions is not None:
            atomic_write_text(args.predictions, dumps_jsonl(
                {"id": ex.id, "hypothesis": " ".join(hyp), "reference": ex.summary}
                for ex, hyp in zip(corpus, hypotheses)
            ))
        self.emit_json(report, args.out)
        return 0
