"""
Base Command class
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Iterable, List, Optional

from core.corpus import CorpusExample, atomic_write_text, dumps_jsonl, read_corpus
from core.errors import PipelineError


class UsageError(Exception):
    """Bad command line; maps to exit code 1."""


class BaseCommand:
    """Base class for all subcommands."""

    name: str = ""
    help: str = ""

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        pass

    def run(self, args: argparse.Namespace) -> int:
        raise NotImplementedError

    # Shared helpers

    @staticmethod
    def add_seed(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--seed", type=int, default=None, help="random seed (default 42)")

    @staticmethod
    def add_workers(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--workers", type=int, default=1, help="preprocessing processes")

    @staticmethod
    def add_input(parser: argparse.ArgumentParser) -> None:
        group = parser.add_mutually_exclusive_group(required=True)
        group.add_argument("--corpus", type=Path, help="JSONL corpus")
        group.add_argument("--source", type=Path, help="single method source file")
        group.add_argument("--ast", type=Path, help="single AST JSON file")

    @staticmethod
    def seed_of(args: argparse.Namespace, fallback: int = 42) -> int:
        return args.seed if getattr(args, "seed", None) is not None else fallback

    @staticmethod
    def read_inputs(args: argparse.Namespace) -> List[CorpusExample]:
        """Corpus examples from --corpus, or one example wrapping --source/--ast."""
        if args.corpus is not None:
            return read_corpus(args.corpus)
        path = args.source if args.source is not None else args.ast
        try:
            text = path.read_text(encoding="utf-8") if args.source is not None else None
            ast = json.loads(path.read_text(encoding="utf-8")) if args.ast is not None else None
        except FileNotFoundError as e:
            raise PipelineError(f"input file {path} does not exist") from e
        except json.JSONDecodeError as e:
            raise PipelineError(f"{path} is not valid JSON: {e.msg}") from e
        return [CorpusExample(path.stem or "input", "input", source=text, ast=ast)]

    @staticmethod
    def emit_text(text: str, out: Optional[Path]) -> None:
        if out is None:
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            atomic_write_text(out, text)

    def emit_json(self, value: Any, out: Optional[Path]) -> None:
        self.emit_text(json.dumps(value, indent=2, sort_keys=True) + "\n", out)

    def emit_jsonl(self, records: Iterable[dict], out: Optional[Path]) -> None:
        self.emit_text(dumps_jsonl(records), out)
