"""
Gradcheck Command - Finite-difference check of the tiny model's gradients.
"""

from __future__ import annotations

import argparse

from core.trainer import gradcheck_tiny_model

from .base import BaseCommand

TOLERANCE = 1e-3


class GradcheckCommand(BaseCommand):
    name = "gradcheck"
    help = "compare backprop against central differences on a tiny model"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--max-coords", type=int, default=500, help="sampled coordinates per tensor")
        self.add_seed(parser)

    def run(self, args: argparse.Namespace) -> int:
        error = float(gradcheck_tiny_model(self.seed_of(args, 0), max_coords=args.max_coords))
        self.emit_json({"max_relative_error": error, "tolerance": TOLERANCE, "passed": error < TOLERANCE}, None)
        return 0
