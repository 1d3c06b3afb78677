"""Command-line front door: ``fraclap <subcommand> --config <path>``.

Success prints a small JSON summary (hash, run directory, artifacts) to
stdout and exits 0.  Failures print a machine-readable error object to
stderr and exit nonzero: 2 for configuration problems, 3 for stage-tagged
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, apply_overrides, load_config, validate
from .experiments import SUBCOMMANDS, ExperimentError, run

__all__ = ["main", "build_parser"]

_HELP = {
    "eig": "lowest eigenpairs of the mixed-boundary operator",
    "frac-apply": "apply the fractional operator to a modal combination",
    "extend-check": "verify the extension against the spectral route",
    "minimize": "minimize the critical quotient at one lambda",
    "sweep-lambda": "minimize across a lambda grid",
    "move-boundary": "shrink the Dirichlet part and track the threshold",
    "constants": "Sobolev constant, coupling constant, threshold",
    "pohozaev": "identity audit on a computed solution",
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subparser per subcommand."""
    parser = argparse.ArgumentParser(
        prog="fraclap",
        description="Experiments for the mixed-boundary fractional "
                    "critical problem.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", required=True,
                       help="path to the JSON run configuration")
        p.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE", dest="overrides",
                       help="override a config key (dotted path, JSON value);"
                            " repeatable")
    return parser


def _fail(stream, stage: str, kind: str, message: str, keys=None) -> None:
    payload = {"ok": False,
               "error": {"stage": stage, "kind": kind, "message": message}}
    if keys:
        payload["error"]["keys"] = keys
    print(json.dumps(payload, sort_keys=True), file=stream)


def main(argv=None) -> int:
    """Entry point; returns the process exit status."""
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args.overrides)
        resolved = validate(cfg)
    except ConfigError as e:
        _fail(sys.stderr, "config", type(e).__name__, str(e), e.keys)
        return 2
    try:
        manifest = run(args.subcommand, resolved, overrides=args.overrides)
    except ConfigError as e:
        _fail(sys.stderr, "config", type(e).__name__, str(e), e.keys)
        return 2
    except ExperimentError as e:
        _fail(sys.stderr, e.stage, type(e).__name__, str(e))
        return 3
    print(json.dumps({
        "ok": True,
        "subcommand": manifest.subcommand,
        "config_hash": manifest.config_hash,
        "run_dir": manifest.run_dir,
        "artifacts": sorted(manifest.artifacts),
    }, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
