"""
AST Summarizer - Command-line entry point
Tree-relation transformer pipeline for source code summarization
"""

import sys

from cli.main import run_cli


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
