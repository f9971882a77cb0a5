"""Render the three standard figures from persisted experiment CSVs.

The renderer never invokes the simulator: inputs are the CSV artifacts a
run leaves behind, and identical input bytes produce identical image
bytes (fixed layout, pinned SVG hash salt, no timestamps in metadata).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "dcflex-plots"

FIGURE_IDS = ("timeseries", "multiplier_sweep", "variance_sweep")

TIMESERIES_COLUMNS = ("t", "power_kw", "occupied_nodes", "active_gpus", "gpu_util", "price", "revenue_h")
SWEEP_COLUMNS = (
    "axis_value", "scheduler", "peak_avg_power_kw", "gpu_util", "occupancy",
    "revenue", "pct_power_reduction_vs_fifo",
)


class FigureError(RuntimeError):
    """Missing or malformed input; the message names the offending column or file."""


@dataclass(frozen=True)
class FigureSpec:
    figure: str
    inputs: Tuple[Path, ...]
    output: Path

    def __post_init__(self):
        if self.figure not in FIGURE_IDS:
            raise FigureError(f"unknown figure id {self.figure!r}; expected one of {FIGURE_IDS}")
        if not self.inputs:
            raise FigureError("at least one input path is required")
        if Path(self.output).suffix.lower() not in (".png", ".svg"):
            raise FigureError(f"output must be .png or .svg, got {self.output}")


def _read_csv(path: Path, required: Sequence[str]) -> Dict[str, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            rows = list(reader)
    except OSError as err:
        raise FigureError(f"cannot read {path}: {err}") from None
    for column in required:
        if column not in fields:
            raise FigureError(f"column {column!r} missing in {path}")
    if not rows:
        raise FigureError(f"{path} contains no data rows")
    out: Dict[str, np.ndarray] = {}
    for column in fields:
        values = [row[column] for row in rows]
        try:
            out[column] = np.array([float(v) for v in values])
        except ValueError:
            out[column] = np.array(values)
    return out


def _save(fig, output: Path) -> Path:
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    if output.suffix.lower() == ".png":
        metadata = {"Software": None}
    else:
        metadata = {"Date": None}
    fig.savefig(output, metadata=metadata)
    plt.close(fig)
    return output


def _run_directory(path: Path) -> Path:
    """Accept either a scenario output dir (with seedNNN children) or a seed dir."""
    path = Path(path)
    if (path / "milp_peak").is_dir():
        return path
    seeds = sorted(p for p in path.glob("seed*") if (p / "milp_peak").is_dir())
    if seeds:
        return seeds[0]
    raise FigureError(f"no run directories (fifo_flat/milp_flat/milp_peak) under {path}")


def _render_timeseries(spec: FigureSpec):
    base = _run_directory(spec.inputs[0])
    traces = []
    for label, name in (("FIFO", "fifo_flat"), ("optimized, flat", "milp_flat"), ("optimized, peak", "milp_peak")):
        traces.append((label, _read_csv(base / name / "timeseries.csv", TIMESERIES_COLUMNS)))
    flat_price = traces[1][1]["price"]
    peak_price = traces[2][1]["price"]
    peaked = np.flatnonzero(peak_price > flat_price + 1e-12)

    fig, (ax_occ, ax_util) = plt.subplots(2, 1, figsize=(7.0, 5.0), sharex=True, dpi=120)
    styles = {"FIFO": "-", "optimized, flat": "--", "optimized, peak": "-."}
    for label, cols in traces:
        ax_occ.plot(cols["t"], cols["occupied_nodes"], styles[label], label=label, linewidth=1.4)
        ax_util.plot(cols["t"], cols["gpu_util"], styles[label], label=label, linewidth=1.4)
    for ax in (ax_occ, ax_util):
        if peaked.size:
            ax.axvspan(peaked[0], peaked[-1] + 1, color="0.85", zorder=0)
        ax.grid(alpha=0.3)
    ax_occ.set_ylabel("occupied nodes")
    ax_util.set_ylabel("GPU utilization")
    ax_util.set_xlabel("hour")
    ax_occ.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig


def _sweep_series(cols: Dict[str, np.ndarray], scheduler: str, column: str):
    mask = cols["scheduler"] == scheduler
    if not mask.any():
        raise FigureError(f"no rows for scheduler {scheduler!r} in sweep input")
    x = cols["axis_value"][mask].astype(float)
    y = cols[column][mask]
    order = np.argsort(x)
    return x[order], y[order]


def _render_multiplier_sweep(spec: FigureSpec):
    cols = _read_csv(Path(spec.inputs[0]), SWEEP_COLUMNS)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    for scheduler, style in (("fifo", "-o"), ("milp", "-s")):
        x, y = _sweep_series(cols, scheduler, "peak_avg_power_kw")
        ax.plot(x, y, style, label={"fifo": "FIFO", "milp": "optimized"}[scheduler], linewidth=1.4, markersize=4)
    ax.set_xscale("log")
    ax.set_xlabel("peak price multiplier")
    ax.set_ylabel("average power during peak period (kW)")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _variance_inputs(inputs: Tuple[Path, ...]) -> List[Path]:
    if len(inputs) == 1 and Path(inputs[0]).is_dir():
        found = sorted(Path(inputs[0]).glob("sweep*.csv"))
        if not found:
            raise FigureError(f"no sweep*.csv files under {inputs[0]}")
        return found
    return [Path(p) for p in inputs]


def _render_variance_sweep(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    for path in _variance_inputs(spec.inputs):
        cols = _read_csv(path, SWEEP_COLUMNS)
        x, y = _sweep_series(cols, "milp", "pct_power_reduction_vs_fifo")
        label = path.stem.replace("sweep_", "").replace("sweep", "").strip("_") or path.stem
        ax.plot(x, y, "-o", label=label, linewidth=1.4, markersize=4)
    ax.set_xscale("log")
    ax.set_xlabel("peak price multiplier")
    ax.set_ylabel("power reduction vs FIFO during peak (%)")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> Path:
    """Render the figure and return the written path."""
    builder = {
        "timeseries": _render_timeseries,
        "multiplier_sweep": _render_multiplier_sweep,
        "variance_sweep": _render_variance_sweep,
    }[spec.figure]
    fig = builder(spec)
    return _save(fig, Path(spec.output))
