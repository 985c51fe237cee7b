"""osc-spectra <command> --config <path> [--out <dir>] [--seed <n>]

Exit status: 0 success, 2 a checked bound or localization was violated,
1 invalid configuration or a numerical error.
"""

from __future__ import annotations

import argparse
import sys

from .config import COMMANDS, load_config
from .errors import OscSpectraError
from .runner import EXIT_ERROR, run


def build_parser():
    p = argparse.ArgumentParser(prog="osc-spectra", description="Spectral computations for -d^2/dx^2 + x^2 + b(x).")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="seed for randomized checks (overrides the config)")
    p.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, command=args.command, out=args.out, seed=args.seed)
        if args.no_plots:
            cfg = cfg.model_copy(update={"plots": False})
        result = run(cfg)
    except OscSpectraError as exc:
        print(f"osc-spectra: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    v = result.report["violations"]
    summary = "ok" if not v else "violations: " + ", ".join(v)
    print(f"{args.command}: {summary} ({result.out_dir}/report.json)")
    return result.status


if __name__ == "__main__":
    sys.exit(main())
