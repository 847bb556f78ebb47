"""
Main - Argument parsing, logging setup and exit codes for the pipeline commands.

Exit codes: 0 success, 1 usage error, 2 data error (any PipelineError, unreadable file or input nested too deeply).
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional, Sequence

from core.errors import PipelineError

from .commands.base import BaseCommand, UsageError
from .commands.eval_command import EvalCommand
from .commands.gen_command import GenCommand
from .commands.gradcheck_command import GradcheckCommand
from .commands.linearize_command import LinearizeCommand
from .commands.parse_command import ParseCommand
from .commands.relations_command import RelationsCommand
from .commands.stats_command import StatsCommand
from .commands.summarize_command import SummarizeCommand
from .commands.timing_command import TimingCommand
from .commands.train_command import TrainCommand

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

COMMANDS: List[BaseCommand] = [
    GenCommand(),
    ParseCommand(),
    LinearizeCommand(),
    RelationsCommand(),
    StatsCommand(),
    TrainCommand(),
    EvalCommand(),
    SummarizeCommand(),
    GradcheckCommand(),
    TimingCommand(),
]


class CliArgumentParser(argparse.ArgumentParser):
    """Raises UsageError instead of exiting with argparse's status 2."""

    def error(self, message: str) -> None:
        raise UsageError(f"{self.prog}: {message}")


def create_parser() -> CliArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    common.add_argument("--quiet", action="store_true", help="no progress bars")

    parser = CliArgumentParser(prog="astsum", description="AST summarization pipeline")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for command in COMMANDS:
        sub = subparsers.add_parser(command.name, help=command.help, parents=[common])
        command.add_arguments(sub)
        sub.set_defaults(handler=command)
    return parser


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = create_parser()
    try:
        args = parser.parse_args(list(sys.argv[1:] if argv is None else argv))
    except UsageError as e:
        print(e, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    setup_logging(args.verbose)
    try:
        return args.handler.run(args)
    except (UsageError, ValueError) as e:
        print(f"{args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as e:
        logger.error("%s failed: %s", args.command, e)
        return EXIT_DATA
    except OSError as e:
        logger.error("%s failed: %s", args.command, e)
        return EXIT_DATA
    except RecursionError:
        logger.error("%s failed: input is nested too deeply", args.command)
        return EXIT_DATA


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
