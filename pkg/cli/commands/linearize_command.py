"""
Linearize Command - POT / SBT / PD token sequences for a corpus or a single method.
"""

from __future__ import annotations

import argparse
import functools
from pathlib import Path
from typing import Any, Dict

from core.corpus import CorpusExample, linearize_example, map_examples
from core.linearizer import DEFAULT_MAX_PATH_LEN, DEFAULT_MAX_PATHS, Method

from .base import BaseCommand


def linearized_record(example: CorpusExample, method: Method, seed: int, max_path_len: int,
                      max_paths: int) -> Dict[str, Any]:
    seq = linearize_example(example, method, seed, max_path_len, max_paths)
    return {"id": example.id, **seq.to_record()}


def add_method_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", choices=[m.value for m in Method], default=None,
                        help="linearization (default pot)")
    parser.add_argument("--pd-max-path-len", type=int, default=DEFAULT_MAX_PATH_LEN)
    parser.add_argument("--pd-max-paths", type=int, default=DEFAULT_MAX_PATHS)


class LinearizeCommand(BaseCommand):
    name = "linearize"
    help = "linearize ASTs into token sequences (JSONL)"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        self.add_input(parser)
        add_method_arguments(parser)
        parser.add_argument("--out", type=Path, default=None)
        self.add_seed(parser)
        self.add_workers(parser)

    def run(self, args: argparse.Namespace) -> int:
        examples = self.read_inputs(args)
        record = functools.partial(linearized_record, method=Method(args.method or Method.POT.value),
                                   seed=self.seed_of(args), max_path_len=args.pd_max_path_len,
                                   max_paths=args.pd_max_paths)
        self.emit_jsonl(map_examples(record, examples, args.workers), args.out)
        return 0
