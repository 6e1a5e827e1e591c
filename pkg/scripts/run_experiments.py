"""
Experiment Runner
Runs the shipped grid experiments one after another and writes a summary table.
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional

import pandas as pd

from coneig.core.errors import ConeigError, ConvergenceError
from coneig.sdk.config import apply_overrides, load_config
from coneig.sdk.engine import ConstrainedEigenEngine

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
DEFAULT_EXPERIMENTS = ["square_well", "c5_symmetry", "hex_annulus"]


def resolve_config(name: str) -> Path:
    path = Path(name)
    if path.suffix == ".json":
        return path
    return CONFIG_DIR / f"{name}.json"


def run_one(config_path: Path, output_root: Path, seed: Optional[int]) -> dict:
    config, base_dir = load_config(config_path)
    config = apply_overrides(config, output_dir=str(output_root / config_path.stem), seed=seed)
    engine = ConstrainedEigenEngine(config, base_dir=base_dir)
    start = time.perf_counter()
    converged = True
    try:
        report = engine.run()
    except ConvergenceError as err:
        if not err.partial:
            raise
        report, converged = err.partial, False
        report.problem = engine.problem().describe()
    engine.write_run(report)
    return {"experiment": config_path.stem,
            "dim": report.problem.get("dim"),
            "candidates": len(report.candidates),
            "accepted": len(report.accepted),
            "accepted_indices": " ".join(str(i) for i in report.accepted_indices),
            "converged": converged,
            "seconds": round(time.perf_counter() - start, 2)}


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Run the grid experiments and summarize the accepted modes")
    parser.add_argument("experiments", nargs="*", default=DEFAULT_EXPERIMENTS,
                        help="Config names under configs/ or paths to JSON configs")
    parser.add_argument("--output-root", default="results", help="Each experiment writes to <root>/<name>")
    parser.add_argument("--seed", type=int, default=None, help="Seed override for every experiment")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    output_root = Path(args.output_root)
    rows = []
    for name in args.experiments:
        path = resolve_config(name)
        print(f"Running {path.stem} ...")
        try:
            rows.append(run_one(path, output_root, args.seed))
        except ConeigError as err:
            print(f"Error in {path.stem}: {err}", file=sys.stderr)
            return 1

    summary = pd.DataFrame(rows)
    output_root.mkdir(parents=True, exist_ok=True)
    summary.to_csv(output_root / "summary.csv", index=False)
    print(summary.to_string(index=False))
    return 0 if all(row["converged"] for row in rows) else 3


if __name__ == "__main__":
    sys.exit(main())
