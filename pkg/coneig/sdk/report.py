"""
Report Writers
Canonical JSON, pandas CSV tables, field grids and vector archives for a run
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..core.problems.grids import GridDomain, probability_current
from ..core.solvers.pipeline import RunReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, complex as {re, im}, non-finite floats as null"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": _plain(float(value.real)), "im": _plain(float(value.imag))}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def canonical_json(document: Dict[str, Any]) -> str:
    """Sorted keys and shortest round-trip floats, so re-serializing a parsed report is byte-identical"""
    return json.dumps(_plain(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: PathLike, document: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(document))
    return path


def candidates_frame(report: RunReport) -> pd.DataFrame:
    accepted = {a.candidate_index: a for a in report.accepted}
    rows = []
    for cand in report.candidates:
        pair = accepted.get(cand.index)
        rows.append({
            "index": cand.index,
            "re_mu": cand.mu.real,
            "im_mu": cand.mu.imag,
            "tau2": cand.tau2,
            "delta2": cand.delta2,
            "residual_complex": cand.residual_complex,
            "residual_real": np.nan if cand.residual_real is None else cand.residual_real,
            "ritz_residual": cand.ritz_residual,
            "accepted": cand.accepted,
            "reason": cand.reason.value,
            "label": cand.label,
            "lambda": np.nan if pair is None else pair.eigenvalue,
        })
    columns = ["index", "re_mu", "im_mu", "tau2", "delta2", "residual_complex", "residual_real",
               "ritz_residual", "accepted", "reason", "label", "lambda"]
    return pd.DataFrame(rows, columns=columns)


def write_eigenvalues_csv(path: PathLike, report: RunReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    candidates_frame(report).to_csv(path, index=False, float_format="%.17g")
    return path


def grid_frame(domain: GridDomain, values: np.ndarray) -> pd.DataFrame:
    """Row-major grid with a leading y column; NaN outside the domain"""
    grid = domain.to_grid(np.asarray(values, dtype=float))
    frame = pd.DataFrame(grid, columns=[f"x={x:.6g}" for x in domain.x_centers])
    frame.insert(0, "y", domain.y_centers)
    return frame


def write_grid_csv(path: PathLike, domain: GridDomain, values: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid_frame(domain, values).to_csv(path, index=False, float_format="%.17g")
    return path


def write_mode_fields(directory: PathLike, domain: GridDomain, k: int, vector: np.ndarray) -> List[Path]:
    """mode_<k>_re.csv and mode_<k>_im.csv grids plus mode_<k>_current.csv with per-cell current"""
    directory = Path(directory)
    vector = np.asarray(vector, dtype=complex)
    paths = [write_grid_csv(directory / f"mode_{k}_re.csv", domain, vector.real),
             write_grid_csv(directory / f"mode_{k}_im.csv", domain, vector.imag)]
    current = probability_current(domain, vector)
    x, y = domain.coordinates()
    frame = pd.DataFrame({"x": x, "y": y, "jx": current.jx, "jy": current.jy,
                          "angular": current.angular, "density": current.density})
    current_path = directory / f"mode_{k}_current.csv"
    frame.to_csv(current_path, index=False, float_format="%.17g")
    paths.append(current_path)
    return paths


def write_vectors_npz(path: PathLike, report: RunReport, max_modes: Optional[int] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    accepted = report.accepted if max_modes is None else report.accepted[:max_modes]
    vectors = np.column_stack([a.vector for a in accepted]) if accepted else np.zeros((0, 0))
    np.savez_compressed(path,
                        candidate_index=np.array([a.candidate_index for a in accepted], dtype=int),
                        eigenvalue=np.array([a.eigenvalue for a in accepted]),
                        vectors=vectors)
    return path


def write_spectrum_csv(path: PathLike, rows: Sequence[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(list(rows), columns=["source", "re_mu", "im_mu", "tau2"]).to_csv(path, index=False, float_format="%.17g")
    return path
