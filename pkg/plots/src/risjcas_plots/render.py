"""Render experiment CSVs into the standard figure kinds.

This is a pure view over the CSV files: nothing is recomputed, every
plotted (x, y) pair is a value read from the input. Alongside each figure
a JSON sidecar records exactly what was drawn, so downstream checks can
compare the plot against the data without parsing the image.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


class MissingColumnError(Exception):
    def __init__(self, column: str, path):
        super().__init__(f"column {column!r} missing from {path}")
        self.column = column


class EmptySeriesWarning(UserWarning):
    pass


# per figure kind: x column, y column, axis labels, series grouping columns
KINDS = {
    "fi_vs_alpha": {
        "x": "alpha", "y": "fi_trace",
        "xlabel": "weight alpha", "ylabel": "FI trace",
        "series": ("model", "mode", "M", "spacing", "seed"),
    },
    "pareto": {
        "x": "mi", "y": "fi_trace",
        "xlabel": "MI (bits)", "ylabel": "FI trace",
        "series": ("model", "mode", "M", "spacing", "seed"),
    },
    "quantization": {
        "x": "noise_var", "y": "fi_trace_mean",
        "xlabel": "noise variance", "ylabel": "FI trace",
        "series": ("bits", "si_flag"),
    },
}


@dataclass(frozen=True)
class PlotJob:
    csv_paths: Sequence[Path]
    kind: str
    out_path: Path
    group_filters: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {sorted(KINDS)}")


def _load_rows(paths: Sequence[Path], needed: Sequence[str]) -> List[dict]:
    rows: List[dict] = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for column in needed:
                if column not in header:
                    raise MissingColumnError(column, path)
            rows.extend(reader)
    return rows


def _series_label(keys: Sequence[str], values: Sequence[str]) -> str:
    return ", ".join(f"{k}={v}" for k, v in zip(keys, values))


def render(job: PlotJob) -> Path:
    """Render one figure plus its JSON sidecar; returns the figure path.

    One line/marker series is drawn per distinct combination of the
    kind's grouping columns (those present in the data); rows are sorted
    by the x column within a series. Group filters drop non-matching rows
    before grouping.
    """
    spec = KINDS[job.kind]
    rows = _load_rows(job.csv_paths, [spec["x"], spec["y"]])
    for key, value in job.group_filters.items():
        rows = [row for row in rows if row.get(key) == value]
    if not rows:
        warnings.warn(f"no rows left to plot for {job.kind}", EmptySeriesWarning)

    present = [c for c in spec["series"] if rows and c in rows[0]]
    series: Dict[tuple, List[tuple]] = {}
    for row in rows:
        key = tuple(row[c] for c in present)
        series.setdefault(key, []).append(
            (float(row[spec["x"]]), float(row[spec["y"]])))

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    sidecar = {"kind": job.kind, "series": []}
    for key in sorted(series):
        points = sorted(series[key])
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        label = _series_label(present, key) if present else job.kind
        marker = "o" if len(points) <= 24 else None
        ax.plot(xs, ys, marker=marker, label=label)
        sidecar["series"].append({"label": label, "x": xs, "y": ys})
    ax.set_xlabel(spec["xlabel"])
    ax.set_ylabel(spec["ylabel"])
    if job.kind == "quantization":
        ax.set_xscale("log")
    if series:
        ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()

    out = Path(job.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120, metadata=_stable_metadata(out))
    plt.close(fig)
    sidecar_path = out.with_name(out.name + ".json")
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def _stable_metadata(out: Path) -> dict:
    # strip creation timestamps so identical inputs give identical bytes
    suffix = out.suffix.lower()
    if suffix == ".png":
        return {"Software": "risjcas-plots"}
    if suffix in (".pdf", ".svg"):
        return {"Creator": "risjcas-plots", "Date": None}
    return {}
