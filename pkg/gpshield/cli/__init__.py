"""
Shield synthesis pipeline CLI.
"""
import dataclasses
import logging
import sys
from typing import List, Optional

from numpy.linalg import LinAlgError

from .. import gpshield as pipeline
from ..config import SystemConfig, load_config
from ..utils import set_log_level
from .parser import parse_options

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _gen_data(config, options) -> int:
    if options["system"] is not None:
        system = SystemConfig(name=options["system"])
        config = dataclasses.replace(config, system=system)
    pipeline.run_gen_data(
        config,
        destination=options["destination"],
        seed=options["seed"],
        per_mode=options["per_mode"],
    )
    return EXIT_OK


def _fit(config, options) -> int:
    pipeline.run_fit(
        config,
        options["dataset"],
        destination=options["destination"],
        seed=options["seed"],
    )
    return EXIT_OK


def _abstract(config, options) -> int:
    if options["delta"] is not None:
        abstraction = dataclasses.replace(config.abstraction, delta=options["delta"])
        config = dataclasses.replace(config, abstraction=abstraction)
    pipeline.run_abstract(
        config, options["regressor"], destination=options["destination"]
    )
    return EXIT_OK


def _synthesize(config, options) -> int:
    shield, _ = pipeline.run_synthesize(
        config,
        options["imdp"],
        destination=options["destination"],
        spec=options["spec"],
        p=options["p"],
        tol=options["tol"],
    )
    print(
        "{safe} of {n} product states safe after {sweeps} sweeps and {resets} "
        "resets".format(
            safe=int(shield.safe.sum()),
            n=shield.n_states,
            sweeps=shield.sweeps,
            resets=shield.resets,
        )
    )
    return EXIT_OK


def _simulate(config, options) -> int:
    report = pipeline.run_simulate(
        config,
        options["shield"],
        destination=options["destination"],
        seed=options["seed"],
        trajectories=options["trajectories"],
        steps=options["steps"],
        unshielded=options["unshielded"],
        histogram=options["histogram"],
        gnuplot=options["gnuplot"],
    )
    print(report.summary(), end="")
    if options["expect_safe"] and report.violations:
        return EXIT_FAILURE
    return EXIT_OK


def _validate(config, options) -> int:
    _, fraction = pipeline.run_validate(
        config,
        options["imdp"],
        destination=options["destination"],
        seed=options["seed"],
        samples=options["samples"],
        max_pairs=options["max_pairs"],
    )
    required = options["min_fraction"]
    if required is None:
        required = config.simulation.min_fraction
    print("within windows: {f:.6f} (required {r})".format(f=fraction, r=required))
    return EXIT_OK if fraction >= required else EXIT_FAILURE


COMMANDS = {
    "gen-data": _gen_data,
    "fit": _fit,
    "abstract": _abstract,
    "synthesize": _synthesize,
    "simulate": _simulate,
    "validate": _validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        options = parse_options(argv)
    except SystemExit as exit:
        return exit.code if isinstance(exit.code, int) else EXIT_USAGE
    if options is None:
        return EXIT_OK

    if options["quiet"]:
        set_log_level("ERROR")
    else:
        set_log_level(options["verbose"])
    try:
        config = load_config(options["config"])
        return COMMANDS[options["command"]](config, options)
    except (ValueError, FileNotFoundError) as err:
        message = "gpshield {c}: error: {e}".format(c=options["command"], e=err)
        print(message, file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, LinAlgError) as err:
        message = "gpshield {c}: failed: {e}".format(c=options["command"], e=err)
        print(message, file=sys.stderr)
        return EXIT_FAILURE
