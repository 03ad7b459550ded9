import argparse
import pathlib
import sys
from typing import List, Optional

from . import help_text
from .utils import get_help

COMMANDS = ("gen-data", "fit", "abstract", "synthesize", "simulate", "validate")


def _add_common(parser: argparse.ArgumentParser, seeded: bool) -> None:
    common = parser.add_argument_group(title="Configuration")
    common.add_argument(
        "--config",
        dest="config",
        help=help_text.CONFIG,
        default=None,
        metavar="<file|name>",
        required=False,
    )
    # abstract and synthesize are deterministic and take no seed
    if seeded:
        common.add_argument(
            "--seed",
            dest="seed",
            help=help_text.SEED,
            default=None,
            metavar="<int>",
            type=int,
            required=False,
        )
    common.add_argument(
        "--verbose",
        dest="verbose",
        help=help_text.VERBOSE,
        default=False,
        action="store_true",
        required=False,
    )
    common.add_argument(
        "--quiet",
        dest="quiet",
        help=help_text.QUIET,
        default=False,
        action="store_true",
        required=False,
    )


def _add_help(parser: argparse.ArgumentParser) -> None:
    help = parser.add_argument_group(title="Getting help")
    help.add_argument("--help", help=help_text.HELP, action="help")
    help.add_argument(
        "--more-help",
        dest="more_help",
        help=help_text.MORE_HELP,
        default=None,
        nargs="?",
        const="",
        metavar="<section>",
        required=False,
    )


def _path(group, flag: str, dest: str, text: str, required: bool = True) -> None:
    group.add_argument(
        flag,
        dest=dest,
        help=text,
        default=None,
        metavar="<file>",
        required=required,
        type=pathlib.Path,
    )


def build_parser() -> argparse.ArgumentParser:
    """
    Creates the option parser with one subparser per pipeline stage.
    """
    parser = argparse.ArgumentParser(
        prog="gpshield", description=help_text.CLI_DESCRIPTION, add_help=False
    )
    _add_help(parser)
    subparsers = parser.add_subparsers(dest="command", metavar="<command>")

    def subparser(name: str, text: str, seeded: bool = True) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, help=text, description=text, add_help=False)
        _add_common(sub, seeded)
        _add_help(sub)
        return sub

    # gen-data
    sub = subparser("gen-data", help_text.GEN_DATA)
    directives = sub.add_argument_group(title="Processing directives")
    directives.add_argument(
        "--system",
        dest="system",
        help=help_text.SYSTEM,
        default=None,
        metavar="<name>",
        required=False,
    )
    directives.add_argument(
        "--per-mode",
        dest="per_mode",
        help=help_text.PER_MODE,
        default=None,
        metavar="<int>",
        type=int,
        required=False,
    )
    output = sub.add_argument_group(title="Output parameters")
    _path(output, "--out", "destination", help_text.OUTPUT)

    # fit
    sub = subparser("fit", help_text.FIT)
    inputs = sub.add_argument_group(title="Required arguments")
    _path(inputs, "--data", "dataset", help_text.DATA)
    output = sub.add_argument_group(title="Output parameters")
    _path(output, "--out", "destination", help_text.OUTPUT)

    # abstract
    sub = subparser("abstract", help_text.ABSTRACT, seeded=False)
    inputs = sub.add_argument_group(title="Required arguments")
    _path(inputs, "--gp", "regressor", help_text.GP)
    directives = sub.add_argument_group(title="Processing directives")
    directives.add_argument(
        "--delta",
        dest="delta",
        help=help_text.DELTA,
        default=None,
        metavar="<float>",
        type=float,
        required=False,
    )
    output = sub.add_argument_group(title="Output parameters")
    _path(output, "--out", "destination", help_text.OUTPUT)

    # synthesize
    sub = subparser("synthesize", help_text.SYNTHESIZE, seeded=False)
    inputs = sub.add_argument_group(title="Required arguments")
    _path(inputs, "--imdp", "imdp", help_text.IMDP)
    directives = sub.add_argument_group(title="Processing directives")
    directives.add_argument(
        "--spec",
        dest="spec",
        help=help_text.SPEC,
        default=None,
        metavar="<formula>",
        required=False,
    )
    directives.add_argument(
        "--p",
        dest="p",
        help=help_text.P,
        default=None,
        metavar="<float>",
        type=float,
        required=False,
    )
    directives.add_argument(
        "--tol",
        dest="tol",
        help=help_text.TOL,
        default=None,
        metavar="<float>",
        type=float,
        required=False,
    )
    output = sub.add_argument_group(title="Output parameters")
    _path(output, "--out", "destination", help_text.OUTPUT)

    # simulate
    sub = subparser("simulate", help_text.SIMULATE)
    inputs = sub.add_argument_group(title="Required arguments")
    _path(inputs, "--shield", "shield", help_text.SHIELD)
    directives = sub.add_argument_group(title="Processing directives")
    directives.add_argument(
        "--trajectories",
        dest="trajectories",
        help=help_text.TRAJECTORIES,
        default=None,
        metavar="<int>",
        type=int,
        required=False,
    )
    directives.add_argument(
        "--steps",
        dest="steps",
        help=help_text.STEPS,
        default=None,
        metavar="<int>",
        type=int,
        required=False,
    )
    directives.add_argument(
        "--unshielded",
        dest="unshielded",
        help=help_text.UNSHIELDED,
        default=False,
        action="store_true",
        required=False,
    )
    directives.add_argument(
        "--expect-safe",
        dest="expect_safe",
        help=help_text.EXPECT_SAFE,
        default=False,
        action="store_true",
        required=False,
    )
    output = sub.add_argument_group(title="Output parameters")
    _path(output, "--out", "destination", help_text.OUTPUT, required=False)
    _path(output, "--histogram", "histogram", help_text.HISTOGRAM, required=False)
    _path(output, "--gnuplot", "gnuplot", help_text.GNUPLOT, required=False)

    # validate
    sub = subparser("validate", help_text.VALIDATE)
    inputs = sub.add_argument_group(title="Required arguments")
    _path(inputs, "--imdp", "imdp", help_text.IMDP)
    directives = sub.add_argument_group(title="Processing directives")
    directives.add_argument(
        "--samples",
        dest="samples",
        help=help_text.SAMPLES,
        default=None,
        metavar="<int>",
        type=int,
        required=False,
    )
    directives.add_argument(
        "--max-pairs",
        dest="max_pairs",
        help=help_text.MAX_PAIRS,
        default=None,
        metavar="<int>",
        type=int,
        required=False,
    )
    directives.add_argument(
        "--min-fraction",
        dest="min_fraction",
        help=help_text.MIN_FRACTION,
        default=None,
        metavar="<float>",
        type=float,
        required=False,
    )
    output = sub.add_argument_group(title="Output parameters")
    _path(output, "--out", "destination", help_text.OUTPUT, required=False)
    return parser


def parse_options(argv: Optional[List[str]] = None):
    """
    Initiates the option parser and return the parsed options, or None when
    help was requested.
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()

    if len(argv) == 0:
        parser.print_help()
        return
    elif "--more-help" in argv:
        position = argv.index("--more-help") + 1
        section = None
        if position < len(argv) and argv[position] not in COMMANDS:
            if not argv[position].startswith("-"):
                section = argv[position]
        try:
            get_help(section)
        except ValueError as err:
            parser.error(str(err))
        return
    args = vars(parser.parse_args(argv))
    del args["more_help"]
    if args["command"] is None:
        parser.print_help()
        return
    return args
