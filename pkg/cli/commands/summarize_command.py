"""
Summarize Command - Summary for one method from a checkpoint.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from core.checkpoint import load_checkpoint
from core.trainer import TrainingConfig, decode_inputs, encode_corpus

from .base import BaseCommand


class SummarizeCommand(BaseCommand):
    name = "summarize"
    help = "print a greedy summary for one source file or AST JSON"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--checkpoint", type=Path, required=True)
        group = parser.add_mutually_exclusive_group(required=True)
        group.add_argument("--source", type=Path)
        group.add_argument("--ast", type=Path)

    def run(self, args: argparse.Namespace) -> int:
        args.corpus = None
        checkpoint = load_checkpoint(args.checkpoint)
        training = TrainingConfig.from_dict(checkpoint.training)
        examples = self.read_inputs(args)
        inputs = encode_corpus(examples, checkpoint.vocabs, checkpoint.config, training)
        decoded = decode_inputs(inputs, checkpoint.params, checkpoint.config)[0]
        self.emit_text(" ".join(checkpoint.vocabs.summary.decode(decoded)) + "\n", None)
        return 0
