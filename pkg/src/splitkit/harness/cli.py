"""``splitkit`` command line.

Exit codes: 0 success, 1 a check failed, 2 bad configuration, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from splitkit.errors import BranchCutError, NumericFailureError, SplitkitError
from splitkit.harness.config import (
    ConfigError,
    ExperimentConfig,
    bundled_configs,
    load_config,
    make_config,
)
from splitkit.harness.experiments import failure_report, run_experiment

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("splitkit")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="splitkit",
                                 description="Splitting-method experiments and coefficient checks.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        if seed:
            p.add_argument("--seed", type=int, help="override the problem seed")
        p.add_argument("--out", help="output path (default: config 'output', else stdout)")
        p.add_argument("--threads", type=int, default=1, help="worker threads across cells")

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="path to a JSON config, or the name of a bundled one")
    common(run)

    ver = sub.add_parser("verify", help="verify catalog coefficients")
    ver.add_argument("schemes", nargs="*", help="scheme expressions (default: full catalog)")
    common(ver)

    cat = sub.add_parser("catalog", help="dump the scheme catalog as JSON")
    common(cat, seed=False)

    sub.add_parser("configs", help="list bundled reference configs")
    return ap


def _resolve_config(arg: str) -> ExperimentConfig:
    path = Path(arg)
    if not path.exists():
        bundled = bundled_configs()
        if arg in bundled:
            path = bundled[arg]
    return load_config(path)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
        log.info("wrote %s", out)


def _execute(cfg: ExperimentConfig, args) -> int:
    seed = getattr(args, "seed", None)
    threads = max(1, args.threads)
    result = run_experiment(cfg, seed, threads)
    out = args.out or cfg.output
    _emit(result.text if result.text is not None else result.csv(), out)
    if not result.passed:
        print(failure_report(result), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "configs":
            for name, path in bundled_configs().items():
                print(f"{name}\t{path}")
            return EXIT_OK
        if args.command == "run":
            cfg = _resolve_config(args.config)
        elif args.command == "verify":
            cfg = make_config(experiment="verify-coeffs", schemes=args.schemes)
        else:
            cfg = make_config(experiment="catalog-dump")
        return _execute(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailureError, BranchCutError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SplitkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
