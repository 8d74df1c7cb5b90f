"""Command line entry point.

    finls ground|evolve|dichotomy|sweep|verify|linear --config PATH
          [--out DIR] [--workers N] [--resume]

Exit codes: 0 success, 2 validation error, 3 numerical failure,
4 property-suite failure.
"""

import argparse
import json
import logging
import sys

from . import __version__
from .errors import ContractViolation, DomainError, FinlsError, ValidationError

log = logging.getLogger("finls")

COMMANDS = ("ground", "evolve", "dichotomy", "sweep", "verify", "linear")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_PROPERTY = 4


def build_parser():
    ap = argparse.ArgumentParser(prog="finls", description="Fractional inhomogeneous NLS experiments.")
    ap.add_argument("--version", action="version", version=f"finls {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON experiment or sweep configuration")
    ap.add_argument("--out", help="output directory (overrides config and FINLS_OUTPUT_DIR)")
    ap.add_argument("--workers", type=int, help="sweep worker processes (overrides FINLS_WORKERS)")
    ap.add_argument("--resume", action="store_true", help="sweep: skip points already journaled")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _reason(exc):
    return {"error": type(exc).__name__, "message": str(exc)}


def run(argv=None):
    """Parse arguments, dispatch, and return (exit_code, payload)."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    # imported late so --help stays fast
    from .harness import config, recipes, sweep, verify

    try:
        if args.command == "sweep":
            overrides = {}
            if args.workers is not None:
                overrides["workers"] = args.workers
            if args.resume:
                overrides["resume"] = True
            spec = config.load_sweep(args.config, overrides=overrides)
            out = args.out or spec.template.output_dir
            code, rows = sweep.run_sweep(spec, out)
            return code, {"points": len(rows), "output_dir": str(out)}
        cfg = config.load_config(args.config)
        out = args.out or cfg.output_dir
        handler = {
            "ground": recipes.cmd_ground,
            "evolve": recipes.cmd_evolve,
            "dichotomy": recipes.cmd_dichotomy,
            "linear": recipes.cmd_linear,
            "verify": verify.cmd_verify,
        }[args.command]
        code, res = handler(cfg, out)
        return code, {"output_dir": str(out), "exit": code}
    except (ValidationError, DomainError, ContractViolation) as exc:
        return EXIT_VALIDATION, _reason(exc)
    except FinlsError as exc:
        return EXIT_NUMERICAL, _reason(exc)


def main(argv=None):
    code, payload = run(argv)
    stream = sys.stdout if code == EXIT_OK else sys.stderr
    print(json.dumps(payload, sort_keys=True), file=stream)
    return code


if __name__ == "__main__":
    sys.exit(main())
