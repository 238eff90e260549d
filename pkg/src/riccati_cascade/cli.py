"""
Command-line entry point.

    riccati-cascade simulate --config run.ini --out results/
    riccati-cascade check-observability --config run.ini --out results/
    riccati-cascade sweep --config run.ini --out results/ --param k_R --values 20,40,80

On success a one-line JSON summary goes to stdout and the exit code is 0.
On failure a one-line JSON object ``{"error": <kind>, "message": ...}``
goes to stderr and the exit code is 2 for configuration problems and 1 for
anything raised during a run.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace

from .config import ConfigError, load_config
from .harness import SWEEP_PARAMS, check_observability, simulate, sweep


def _values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riccati-cascade", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI scenario file (defaults when omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override [run] seed")

    common(sub.add_parser("simulate", help="run truth and both observers, write trace CSVs"))
    common(sub.add_parser("check-observability", help="excitation and Gramian reports"))
    sp = sub.add_parser("sweep", help="terminal errors across values of one parameter")
    common(sp)
    sp.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    sp.add_argument("--values", required=True, type=_values, help="comma- or space-separated values")
    sp.add_argument("--workers", type=int, help="override [run] workers")
    return parser


def _clean(obj):
    """JSON-safe copy: non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            return 0
        return _fail("UsageError", "invalid command line (see usage above)", 2)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if getattr(args, "workers", None) is not None:
            cfg = replace(cfg, workers=args.workers)
        if args.command == "simulate":
            summary = simulate(cfg, args.out)
        elif args.command == "check-observability":
            summary = check_observability(cfg, args.out)
        else:
            summary = {"rows": sweep(cfg, args.param, args.values, args.out)}
    except ConfigError as exc:
        return _fail("ConfigError", str(exc), 2)
    except Exception as exc:  # reported as a machine-readable line, not a traceback
        logging.getLogger(__name__).debug("run failed", exc_info=True)
        return _fail(type(exc).__name__, str(exc), 1)
    print(json.dumps(_clean(summary)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
