"""CSV writers for trajectories and densities.

Floats are written with ``repr`` so reruns produce byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .fit import CSV_FIELDS, Trajectory


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_trajectory(traj: Trajectory, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for row in traj.rows:
            writer.writerow([_fmt(getattr(row, name)) for name in CSV_FIELDS])
    return path


def write_densities(x, probs, path, header=("bin_center", "probability")) -> Path:
    """Two-column CSV of ``x`` against ``probs``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for a, b in zip(np.asarray(x), np.asarray(probs)):
            writer.writerow([_fmt(a), _fmt(b)])
    return path
