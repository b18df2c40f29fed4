"""CDF and parameter-sweep figures over the benchmark CSV schemas.

The renderer is intentionally decoupled from the engine that produces the
CSVs: it reads only the two documented column sets below and writes a PNG or
SVG. Rendering is read-only over its inputs.
"""

import csv
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .errors import PlotIOError, SchemaMismatchError  # noqa: E402

CDF_COLUMNS = ("level", "policy", "ratio")
SWEEP_COLUMNS = ("axis", "value", "policy", "mean_ratio", "n_trials", "n_inf")

# fixed panel order for sweep figures; unknown axes keep file order after these
AXIS_ORDER = ("capacity", "rho", "delta", "pmax")

REFERENCE_RATIO = 2.0


@dataclass(frozen=True)
class PlotJob:
    """One rendering request: input CSV path(s), output image, figure kind."""

    inputs: Tuple[str, ...]
    output: str
    kind: str  # "cdf" | "sweep"


def _read_rows(path: str, columns: Sequence[str]) -> List[Dict[str, str]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames
            rows = list(reader)
    except OSError as exc:
        raise PlotIOError(f"cannot read {path}: {exc}") from exc
    if header is None or tuple(header) != tuple(columns):
        raise SchemaMismatchError(
            f"{path}: expected columns {list(columns)}, found {header}"
        )
    if not rows:
        raise SchemaMismatchError(f"{path}: no data rows")
    return rows


def _save(fig, path: str) -> str:
    try:
        fig.savefig(path)
    except OSError as exc:
        raise PlotIOError(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def build_cdf_figure(rows: Sequence[Dict[str, str]]):
    """One panel per congestion level, one empirical-CDF curve per policy."""
    by_level: Dict[float, Dict[str, List[float]]] = {}
    for row in rows:
        try:
            level = float(row["level"])
            ratio = float(row["ratio"])
        except (TypeError, ValueError) as exc:
            raise SchemaMismatchError(f"bad CDF row {row}") from exc
        by_level.setdefault(level, {}).setdefault(row["policy"], []).append(ratio)

    levels = sorted(by_level, reverse=True)
    fig, axes = plt.subplots(1, len(levels),
                             figsize=(4.0 * len(levels), 3.2),
                             squeeze=False, sharey=True)
    for ax, level in zip(axes[0], levels):
        for policy in sorted(by_level[level]):
            finite = sorted(r for r in by_level[level][policy]
                            if math.isfinite(r))
            if not finite:
                continue
            n = len(by_level[level][policy])
            xs = finite
            ys = [(i + 1) / n for i in range(len(finite))]
            ax.step(xs, ys, where="post", label=policy)
        ax.axvline(REFERENCE_RATIO, color="grey", linestyle="--", linewidth=1)
        ax.set_title(f"congestion {level:g}")
        ax.set_xlabel("profit ratio")
        ax.set_ylim(0.0, 1.05)
    axes[0][0].set_ylabel("empirical CDF")
    axes[0][-1].legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    return fig


def build_sweep_figure(tables: Sequence[Sequence[Dict[str, str]]]):
    """One panel per sweep axis, mean ratio vs grid value per policy."""
    panels: List[Tuple[str, Dict[str, List[Tuple[float, float]]]]] = []
    for rows in tables:
        axis = rows[0]["axis"]
        series: Dict[str, List[Tuple[float, float]]] = {}
        for row in rows:
            if row["axis"] != axis:
                raise SchemaMismatchError(
                    f"mixed axes in one sweep CSV: {axis!r} vs {row['axis']!r}"
                )
            try:
                value = float(row["value"])
                mean = float(row["mean_ratio"])
                n_trials = int(row["n_trials"])
            except (TypeError, ValueError) as exc:
                raise SchemaMismatchError(f"bad sweep row {row}") from exc
            if n_trials == 0 or math.isnan(mean):
                continue  # skipped grid point
            series.setdefault(row["policy"], []).append((value, mean))
        panels.append((axis, series))

    def axis_rank(item):
        axis = item[0]
        return (AXIS_ORDER.index(axis) if axis in AXIS_ORDER else len(AXIS_ORDER),
                axis)

    panels.sort(key=axis_rank)
    fig, axes = plt.subplots(1, len(panels),
                             figsize=(4.0 * len(panels), 3.2), squeeze=False)
    for ax, (axis, series) in zip(axes[0], panels):
        for policy in sorted(series):
            pts = sorted(series[policy])
            ax.plot([v for v, _ in pts], [m for _, m in pts],
                    marker="o", label=policy)
        ax.axhline(REFERENCE_RATIO, color="grey", linestyle="--", linewidth=1)
        ax.set_xlabel(axis)
        ax.set_ylabel("mean profit ratio")
        ax.legend(fontsize="small")
    fig.tight_layout()
    return fig


def plot_cdf(job: PlotJob) -> str:
    """Render a ratio-CDF figure; returns the output path."""
    if job.kind != "cdf":
        raise SchemaMismatchError(f"plot_cdf got kind {job.kind!r}")
    if len(job.inputs) != 1:
        raise SchemaMismatchError("plot_cdf takes exactly one CSV")
    rows = _read_rows(job.inputs[0], CDF_COLUMNS)
    return _save(build_cdf_figure(rows), job.output)


def plot_sweeps(job: PlotJob) -> str:
    """Render a multi-panel parameter-sweep figure; returns the output path."""
    if job.kind != "sweep":
        raise SchemaMismatchError(f"plot_sweeps got kind {job.kind!r}")
    if not 1 <= len(job.inputs) <= 4:
        raise SchemaMismatchError("plot_sweeps takes one to four CSVs")
    tables = [_read_rows(path, SWEEP_COLUMNS) for path in job.inputs]
    return _save(build_sweep_figure(tables), job.output)
