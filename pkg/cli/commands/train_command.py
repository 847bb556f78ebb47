"""
Train Command - Fit the tree transformer on a corpus and write a checkpoint.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from core.checkpoint import save_checkpoint
from core.corpus import read_corpus
from core.linearizer import Method
from core.settings_manager import SettingsManager
from core.trainer import train

from .base import BaseCommand


def load_settings(args: argparse.Namespace) -> SettingsManager:
    """Config file first, then flags that were actually given."""
    settings = SettingsManager(args.config)
    settings.load()
    settings.apply_overrides("model", {
        "k_anc": getattr(args, "k_anc", None),
        "k_sib": getattr(args, "k_sib", None),
        "seed": args.seed,
    })
    settings.apply_overrides("training", {
        "method": getattr(args, "method", None),
        "steps": getattr(args, "steps", None),
        "batch_size": getattr(args, "batch", None),
        "lr": getattr(args, "lr", None),
        "seed": args.seed,
    })
    return settings


class TrainCommand(BaseCommand):
    name = "train"
    help = "train a model and save a checkpoint directory"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--config", type=Path, default=None, help="JSON/YAML config file")
        parser.add_argument("--corpus", type=Path, required=True)
        parser.add_argument("--out", type=Path, required=True, help="checkpoint directory")
        parser.add_argument("--method", choices=[m.value for m in Method], default=None)
        parser.add_argument("--k-anc", type=int, default=None)
        parser.add_argument("--k-sib", type=int, default=None)
        parser.add_argument("--steps", type=int, default=None)
        parser.add_argument("--batch", type=int, default=None)
        parser.add_argument("--lr", type=float, default=None)
        self.add_seed(parser)
        self.add_workers(parser)

    def run(self, args: argparse.Namespace) -> int:
        settings = load_settings(args)
        model_config = settings.model_config()
        training = settings.training_config()
        corpus = read_corpus(args.corpus)
        result = train(corpus, model_config, training, args.workers, progress=not args.quiet)
        save_checkpoint(args.out, result.params, result.config, result.vocabs, training.to_dict())
        self.emit_json({
            "steps": len(result.losses),
            "final_loss": result.losses[-1],
            "parameters": result.params.count(),
            "checkpoint": str(args.out),
        }, None)
        return 0
