"""
Parse Command - Print the AST of one method as JSON.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from core.ast_tree import to_json
from core.minilang import parse_source

from .base import BaseCommand


class ParseCommand(BaseCommand):
    name = "parse"
    help = "parse one method and print its AST as JSON"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("source", type=Path, help="source file, or - for stdin")
        parser.add_argument("--out", type=Path, default=None)

    def run(self, args: argparse.Namespace) -> int:
        if str(args.source) == "-":
            data = sys.stdin.buffer.read()
        else:
            data = args.source.read_bytes()
        self.emit_text(to_json(parse_source(data)) + "\n", args.out)
        return 0
