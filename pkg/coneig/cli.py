"""
coneig command line
Runs a configured search, the bound validators, or a spectrum dump.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from .core.errors import ConeigError, ConfigError, ConvergenceError, DenseCapExceededError
from .sdk.config import apply_overrides, environment_overrides, load_config

logger = logging.getLogger("coneig")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMPTY = 2
EXIT_NOT_CONVERGED = 3

THREAD_VARIABLES = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coneig", description="Find eigenpairs of L close to a subspace W via L + i*s*Q")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="Path to a JSON run configuration")
    common.add_argument("--output-dir", default=None, help="Directory for artifacts (overrides the config)")
    common.add_argument("--seed", type=int, default=None, help="Seed for start vectors and random instances")
    common.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread count")
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="Search for constrained eigenpairs and write a report")
    sub.add_parser("validate", parents=[common], help="Check the encoding/decoding bounds against a dense oracle")
    sub.add_parser("spectrum", parents=[common], help="Dump eigenvalues of L(s) near the region as CSV")
    return parser


def set_threads(threads: Optional[int]) -> None:
    """Must run before numpy/scipy load their BLAS"""
    if threads is None:
        return
    if threads < 1:
        raise ConfigError(f"--threads must be positive, got {threads}")
    for name in THREAD_VARIABLES:
        os.environ[name] = str(threads)


def cmd_run(engine) -> int:
    try:
        report = engine.run()
    except ConvergenceError as err:
        logger.error("solver did not converge: %s", err)
        if err.partial:
            err.partial.problem = engine.problem().describe()
            artifacts = engine.write_run(err.partial)
            print(f"Partial report written to {artifacts.get('report', engine.output_dir)}")
        return EXIT_NOT_CONVERGED
    artifacts = engine.write_run(report)

    print(f"Problem: {report.problem.get('name', '?')} (dim {report.problem.get('dim', '?')})")
    print(f"Candidates: {len(report.candidates)}  accepted: {len(report.accepted)}")
    for pair in report.accepted:
        print(f"  #{pair.candidate_index}: lambda={pair.eigenvalue:.10g}  tau^2={pair.tau2:.4f}  label={pair.label}")
    if report.message:
        print(report.message)
    print(f"Report: {artifacts.get('report', engine.output_dir)}")
    return EXIT_OK if report.accepted else EXIT_EMPTY


def cmd_validate(engine) -> int:
    from .sdk.report import write_json

    try:
        document = engine.validate()
    except DenseCapExceededError as err:
        logger.error("%s", err)
        print("Validation needs a dense oracle; try a smaller instance")
        return EXIT_ERROR
    path = write_json(engine.output_dir / "validation.json", document)
    print(f"Validated {len(document['results'])} problem(s): {'all bounds hold' if document['all_hold'] else 'BOUND FAILURES'}")
    print(f"Report: {path}")
    return EXIT_OK if document["all_hold"] else EXIT_ERROR


def cmd_spectrum(engine) -> int:
    from .sdk.report import write_spectrum_csv

    try:
        rows = engine.spectrum()
    except ConvergenceError as err:
        logger.error("solver did not converge: %s", err)
        path = write_spectrum_csv(engine.output_dir / "spectrum.csv", err.partial)
        print(f"Partial spectrum ({len(err.partial)} eigenvalues) written to {path}")
        return EXIT_NOT_CONVERGED
    path = write_spectrum_csv(engine.output_dir / "spectrum.csv", rows)
    print(f"Wrote {len(rows)} eigenvalues to {path}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "validate": cmd_validate, "spectrum": cmd_spectrum}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        threads = args.threads if args.threads is not None else environment_overrides().get("threads")
        set_threads(threads)
        config, base_dir = load_config(args.config)
        config = apply_overrides(config, output_dir=args.output_dir, seed=args.seed)

        from .sdk.engine import ConstrainedEigenEngine

        engine = ConstrainedEigenEngine(config, base_dir=base_dir)
        return COMMANDS[args.command](engine)
    except ConfigError as err:
        print(f"Config error: {err}", file=sys.stderr)
        return EXIT_ERROR
    except (ConeigError, ValueError, OSError) as err:
        print(f"Error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
