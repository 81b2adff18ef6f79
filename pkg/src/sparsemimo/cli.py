"""Command-line entry point::

    synth <scenario> <command> [--out DIR] [--seed U64] [--dynamic-range DB]

Exit codes: 0 success, 2 invalid input (parse or validation), 3 any other
library error, 1 unexpected failure.  Errors are reported on stderr as one
JSON object.  ``SPARSEMIMO_THREADS`` caps the BLAS thread pool.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from threadpoolctl import threadpool_limits

from .errors import ParseError, SynthError, ValidationError
from .runner import COMMANDS, run_scenario, to_json
from .scenario import load_scenario, parse_seed

THREADS_ENV = "SPARSEMIMO_THREADS"


def _seed(text: str) -> int:
    try:
        return parse_seed(text, "--seed")
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="synth", description=__doc__.splitlines()[0])
    p.add_argument("scenario", help="scenario TOML file")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--out", help="output directory (default: from the scenario)")
    p.add_argument("--seed", type=_seed, help="64-bit seed for the random baseline")
    p.add_argument("--dynamic-range", type=float, metavar="DB",
                   help="dB clip for image metrics")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _error(kind: str, exc: BaseException, **extra) -> str:
    return json.dumps({"error": kind, "message": str(exc), **extra}, sort_keys=True)


def _threads():
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"expected a positive integer, got {raw!r}", THREADS_ENV) from None
    if n < 1:
        raise ValidationError(f"expected a positive integer, got {raw!r}", THREADS_ENV)
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with threadpool_limits(limits=_threads()):
            scn = load_scenario(args.scenario)
            summary = run_scenario(scn, args.command, args.out, args.seed,
                                   args.dynamic_range)
    except (ParseError, ValidationError) as exc:
        print(_error(type(exc).__name__, exc, line=getattr(exc, "line", None),
                     path=getattr(exc, "path", None)), file=sys.stderr)
        return 2
    except SynthError as exc:
        print(_error(type(exc).__name__, exc), file=sys.stderr)
        return 3
    except OSError as exc:
        print(_error("OSError", exc), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001  last-resort machine-readable report
        print(_error("InternalError", exc), file=sys.stderr)
        return 1
    sys.stdout.write(to_json(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
