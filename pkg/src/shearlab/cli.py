"""Command line entry point: ``shearlab <experiment> --config FILE`` and ``shearlab verify``."""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import ConfigError, ShearlabError
from .runner import EXPERIMENTS, load_config, output_dir, run, verify


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shearlab", description=__doc__)
    p.add_argument("--version", action="version", version=f"shearlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", help="output directory (relative paths resolve against $SHEARLAB_OUT)")
        sp.add_argument("--seed", type=_seed, default=0)
        sp.add_argument("--threads", type=int, default=1)
    vp = sub.add_parser("verify", help="re-run a manifest and compare artifacts")
    vp.add_argument("--manifest", required=True)
    vp.add_argument("--seed", type=_seed, default=None, help="re-run with a different seed (statistical check)")
    vp.add_argument("--threads", type=int, default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return ConfigError.exit_code if exc.code else 0
    try:
        if args.command == "verify":
            rep = verify(args.manifest, args.seed, args.threads)
            print(json.dumps(rep, indent=2))
            if not rep["ok"]:
                first = rep["mismatches"][0]
                print(f"verify: first divergent artifact: {first['artifact']} ({first['reason']})",
                      file=sys.stderr)
                return 1
            return 0
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config)
        out = output_dir(args.out, args.command, args.seed)
        man = run(args.command, cfg, out, args.seed, args.threads)
        print(json.dumps({"out": str(out), "results": man["results"]}, indent=2, default=str))
        return 0
    except ShearlabError as exc:
        print(f"shearlab: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
