"""
Visualization
Plotly figures of the lifted spectrum and of accepted modes
"""

from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import plotly.graph_objects as go

from ..core.problems.grids import GridDomain
from ..core.solvers.pipeline import RunReport


def spectrum_figure(report: RunReport) -> go.Figure:
    """Im mu against Re mu, colored by tau^2, with the target segment and region band"""
    region = report.spec.region
    cands = report.candidates
    fig = go.Figure()
    fig.add_trace(go.Scatter(
        x=[c.mu.real for c in cands],
        y=[c.mu.imag for c in cands],
        mode="markers",
        marker=dict(color=[c.tau2 for c in cands], colorscale="Viridis", cmin=0.0, cmax=1.0,
                    symbol=["circle" if c.accepted else "x" for c in cands],
                    colorbar=dict(title="tau^2"), size=9),
        text=[f"#{c.index} {c.reason.value}" for c in cands],
        name="eigenvalues of L(s)",
    ))
    fig.add_shape(type="line", x0=region.a, x1=region.b, y0=region.s, y1=region.s, line=dict(color="red"))
    fig.add_hrect(y0=region.s - region.radius, y1=region.s + region.radius, fillcolor="red", opacity=0.1, line_width=0)
    fig.update_layout(title=f"Lifted spectrum (s={region.s}, tau^2 >= {report.spec.tau2_threshold:.3g})",
                      xaxis_title="Re mu", yaxis_title="Im mu")
    return fig


def mode_figure(domain: GridDomain, vector: np.ndarray, title: str = "") -> go.Figure:
    """Heatmap of |phi|^2 on the grid"""
    density = domain.to_grid(np.abs(np.asarray(vector)) ** 2)
    fig = go.Figure(go.Heatmap(z=density, x=domain.x_centers, y=domain.y_centers, colorscale="Viridis"))
    fig.update_layout(title=title, yaxis=dict(scaleanchor="x"))
    return fig


def write_html(fig: go.Figure, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.write_html(str(path), include_plotlyjs="cdn")
    return path


def write_report_figures(report: RunReport,
                         directory: Union[str, Path],
                         domain: Optional[GridDomain] = None,
                         max_modes: int = 6) -> Sequence[Path]:
    directory = Path(directory)
    paths = [write_html(spectrum_figure(report), directory / "spectrum.html")]
    if domain is not None:
        for pair in report.accepted[:max_modes]:
            title = f"mode {pair.candidate_index}: lambda={pair.eigenvalue:.6g}, tau^2={pair.tau2:.3f}"
            paths.append(write_html(mode_figure(domain, pair.vector, title), directory / f"mode_{pair.candidate_index}.html"))
    return paths
