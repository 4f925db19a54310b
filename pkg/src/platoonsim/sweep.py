"""Batch experiment runner: cartesian scenario grids with per-run checks.

Each grid point rebuilds the platoon from scratch: n vehicles at equal
initial headways, the leader keeping the base scenario's profile, every
follower starting at the grid velocity, controls broadcast from the base
scenario's first follower. Parameter-grid keys override the base gains.

Runs are independent, so the sweep can fan out over processes; results are
collected in grid order regardless of completion order, keeping the
aggregate CSV deterministic for any worker count.
"""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .core import PlatoonState, Scenario, VehicleState
from .integrator import SolveStatus, simulate
from .safety import headway_lower_bound
from .scenario_io import SweepConfig
from .trajectory_io import fmt

__all__ = ["RunSummary", "expand_sweep", "run_one", "run_sweep", "write_sweep_csv"]


@dataclass(frozen=True)
class RunSummary:
    """Aggregate row for one grid point."""

    index: int
    n: int
    headway0: float
    v0: float
    overrides: tuple[tuple[str, float], ...]
    status: str
    min_headway: float
    v_min: float
    v_max: float
    bound_margin: float | None
    collision_time: float | None
    steps: int


def _axes_of(cfg: SweepConfig) -> list[tuple[tuple[int, float, float], tuple[tuple[str, float], ...]]]:
    grid_keys = sorted(cfg.param_grids)
    out = []
    for n, h0, v0 in itertools.product(cfg.n, cfg.headways, cfg.velocities):
        for combo in itertools.product(*(cfg.param_grids[k] for k in grid_keys)):
            out.append(((n, h0, v0), tuple(zip(grid_keys, combo))))
    return out


def _grid_scenario(base: Scenario, n: int, h0: float, v0: float,
                   overrides: tuple[tuple[str, float], ...]) -> Scenario:
    params = base.base_params
    if overrides:
        params = replace(params, **dict(overrides))
    vehicles = [VehicleState(h0 * (n - 1 - i), v0) for i in range(n)]
    vehicles[0] = VehicleState(vehicles[0].x, base.leader.v0)
    controls = tuple(base.controls[0] for _ in range(n - 1))
    return replace(base, params=params, initial=PlatoonState(tuple(vehicles)),
                   controls=controls)


def expand_sweep(base: Scenario, cfg: SweepConfig) -> list[Scenario]:
    """All grid scenarios, in deterministic grid order."""
    return [_grid_scenario(base, n, h0, v0, ov)
            for (n, h0, v0), ov in _axes_of(cfg)]


def _summarize(index: int, s: Scenario, cfg_axes: tuple[int, float, float],
               overrides: tuple[tuple[str, float], ...]) -> RunSummary:
    n, h0, v0 = cfg_axes
    res = simulate(s)
    traj = res.trajectory
    headways = traj.headways()
    min_headway = float(headways.min())
    follower_v = traj.velocities[:, 1:]
    v_min = float(follower_v.min())
    v_max = float(follower_v.max())
    bound_margin = None
    if res.status is SolveStatus.COMPLETED:
        margins = []
        for i in range(1, traj.n_vehicles):
            h = headways[:, i - 1]
            H = float(np.trapezoid(h, traj.times))
            lower = headway_lower_bound(
                s.base_params, float(h[0]), float(traj.velocities[0, i]), H)
            margins.append(float(h.min()) - lower)
        bound_margin = min(margins)
    collision_time = traj.collision[0] if traj.collision else None
    return RunSummary(
        index=index, n=n, headway0=h0, v0=v0, overrides=overrides,
        status=res.status.value, min_headway=min_headway,
        v_min=v_min, v_max=v_max, bound_margin=bound_margin,
        collision_time=collision_time, steps=res.stats.steps)


def run_one(args: tuple[int, Scenario, tuple[int, float, float], tuple[tuple[str, float], ...]]) -> RunSummary:
    index, s, axes, overrides = args
    return _summarize(index, s, axes, overrides)


def run_sweep(base: Scenario, cfg: SweepConfig, workers: int = 1) -> list[RunSummary]:
    scenarios = expand_sweep(base, cfg)
    axes = _axes_of(cfg)
    jobs = [(i, s, ax, ov) for i, (s, (ax, ov)) in enumerate(zip(scenarios, axes))]
    if workers <= 1:
        return [run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_one, jobs, chunksize=4))
    return sorted(results, key=lambda r: r.index)


def write_sweep_csv(summaries: list[RunSummary], grid_keys: list[str], path) -> None:
    header = ["index", "n", "headway0", "v0", *grid_keys, "status",
              "min_headway", "v_min", "v_max", "bound_margin",
              "collision_time", "steps"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in summaries:
            over = dict(r.overrides)
            row = [str(r.index), str(r.n), fmt(r.headway0), fmt(r.v0)]
            row += [fmt(over[k]) for k in grid_keys]
            row += [r.status, fmt(r.min_headway), fmt(r.v_min), fmt(r.v_max)]
            row.append(fmt(r.bound_margin) if r.bound_margin is not None else "-")
            row.append(fmt(r.collision_time) if r.collision_time is not None else "-")
            row.append(str(r.steps))
            w.writerow(row)
