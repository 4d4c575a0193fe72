"""Command-line entry point: ``microseg <stage> --config FILE [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .pipeline import STAGE_FUNCS, MissingInput, load_config
from .pipeline.config import STAGES, demo_config_path


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="microseg", description=__doc__)
    p.add_argument("command", choices=STAGES + ("all",), help="stage to run ('all' runs every stage)")
    p.add_argument("--config", default=None,
                   help="TOML or JSON config; defaults to the bundled demo config")
    p.add_argument("--seed", type=int, default=None, help="override the config's root seed")
    p.add_argument("--out", default="out", help="output directory shared by all stages")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config or demo_config_path())
        if args.seed is not None:
            cfg.seed = args.seed
        out = Path(args.out)
        stages = STAGES if args.command == "all" else (args.command,)
        for stage in stages:
            if stage != "synth" and not out.is_dir():
                raise MissingInput(f"output directory {out} does not exist; run 'synth' first")
            STAGE_FUNCS[stage](cfg, out)
            print(f"{stage}: ok ({out})")
    except (MissingInput, FileNotFoundError, ValueError) as exc:
        print(f"microseg: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
