"""CSV export and import for trajectories, reports, and tables.

Every number is written as repr(float(x)), the shortest decimal that
round-trips binary64, so identical runs produce byte-identical files on
any platform. No timestamps, no locale formatting.
"""

from __future__ import annotations

import csv

import numpy as np

from .core import Trajectory
from .perturbation import ConvergenceTable
from .safety import CertReport, SafetyEnvelope

__all__ = [
    "fmt",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_cert_report_csv",
    "write_convergence_csv",
    "write_envelope_csv",
]


def fmt(x) -> str:
    return repr(float(x))


def trajectory_header(n: int) -> list[str]:
    cols = ["t"]
    for i in range(n):
        cols += [f"x_{i}", f"v_{i}"]
    cols += [f"h_{i}" for i in range(1, n)]
    cols += [f"branch_{i}" for i in range(1, n)]
    return cols


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = traj.n_vehicles
    headways = traj.headways()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(n))
        for r in range(traj.n_points):
            row = [fmt(traj.times[r])]
            for i in range(n):
                row += [fmt(traj.positions[r, i]), fmt(traj.velocities[r, i])]
            row += [fmt(headways[r, i]) for i in range(n - 1)]
            row += [str(int(traj.branches[r, i])) for i in range(n - 1)]
            w.writerow(row)


def read_trajectory_csv(path) -> Trajectory:
    """Rebuild a trajectory from its CSV. Collision metadata is not stored
    in the file, so the result always carries collision=None."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty trajectory file") from None
        rows = list(reader)
    n = sum(1 for c in header if c.startswith("x_"))
    expected = trajectory_header(n)
    if header != expected:
        raise ValueError(f"{path}: unexpected header {header!r}")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    m = len(rows)
    times = np.empty(m)
    positions = np.empty((m, n))
    velocities = np.empty((m, n))
    branches = np.zeros((m, n - 1), dtype=np.int8)
    for r, row in enumerate(rows):
        if len(row) != len(expected):
            raise ValueError(f"{path}: row {r + 2} has {len(row)} fields, expected {len(expected)}")
        times[r] = float(row[0])
        for i in range(n):
            positions[r, i] = float(row[1 + 2 * i])
            velocities[r, i] = float(row[2 + 2 * i])
        for i in range(n - 1):
            branches[r, i] = int(row[1 + 2 * n + (n - 1) + i])
    return Trajectory(times=times, positions=positions, velocities=velocities,
                      branches=branches, collision=None)


def write_cert_report_csv(report: CertReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "worst_margin", "worst_time", "passed"])
        for name, margin, t, ok in report.rows():
            w.writerow([name, fmt(margin), fmt(t), "true" if ok else "false"])


def write_convergence_csv(table: ConvergenceTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "sup_distance"])
        for row in table.rows:
            w.writerow([fmt(row.eps), fmt(row.sup_distance)])


def write_envelope_csv(traj: Trajectory, env: SafetyEnvelope, path,
                       follower: int = 1) -> None:
    """Plot-ready columns t, v, V_lo, V_hi, h, h_hi for one pair."""
    h = traj.positions[:, follower - 1] - traj.positions[:, follower]
    v = traj.velocities[:, follower]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "v", "V_lo", "V_hi", "h", "h_hi"])
        for r in range(traj.n_points):
            t = float(traj.times[r])
            w.writerow([fmt(t), fmt(v[r]), fmt(env.V_lo(t)), fmt(env.V_hi(t)),
                        fmt(h[r]), fmt(env.h_hi(t))])
