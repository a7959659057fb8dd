"""Result tables with CSV + JSON sidecar output."""

from __future__ import annotations

import csv
import json
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Series:
    label: str
    metric: str
    values: np.ndarray
    stderr: np.ndarray


@dataclass
class ResultTable:
    axis_name: str
    axis: np.ndarray
    series: list[Series] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)

    def add(self, label: str, metric: str, values, stderr=None):
        values = np.asarray(values, dtype=float)
        stderr = np.zeros_like(values) if stderr is None else np.asarray(stderr, dtype=float)
        if values.shape != self.axis.shape or stderr.shape != self.axis.shape:
            raise ValueError(f"series {label!r} length does not match the axis")
        if np.any(stderr < 0):
            raise ValueError("standard errors must be nonnegative")
        if any(s.label == label for s in self.series):
            raise ValueError(f"duplicate series label {label!r}")
        self.series.append(Series(label, metric, values, stderr))

    def __getitem__(self, label: str) -> Series:
        for s in self.series:
            if s.label == label:
                return s
        raise KeyError(label)

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.series]

    @property
    def header(self) -> list[str]:
        cols = [self.axis_name]
        for s in self.series:
            cols += [f"{s.metric}_{s.label}", f"stderr_{s.label}"]
        return cols

    def rows(self):
        for i, x in enumerate(self.axis):
            row = [repr(float(x))]
            for s in self.series:
                row += [repr(float(s.values[i])), repr(float(s.stderr[i]))]
            yield row

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            w.writerows(self.rows())

    def to_csv_text(self) -> str:
        lines = [",".join(self.header)] + [",".join(r) for r in self.rows()]
        return "\n".join(lines) + "\n"

    def write(self, out_dir, stem: str) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{stem}.csv"
        meta_path = out_dir / f"{stem}.json"
        self.to_csv(csv_path)
        with open(meta_path, "w") as fh:
            json.dump(self.metadata, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        return csv_path, meta_path


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def batch_stderr(samples, batches: int) -> float:
    """Standard error of the mean from ``batches`` contiguous batch means."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < batches:
        raise ValueError(f"need at least {batches} samples for batch means, got {x.size}")
    means = np.array([b.mean() for b in np.array_split(x, batches)])
    return float(means.std(ddof=1) / np.sqrt(batches))


def git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"
