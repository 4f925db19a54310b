"""Command-line front end.

Subcommands: simulate | compare | envelope | perturb | sweep. Every
command takes exactly one of --config PATH or --preset NAME plus an
--out directory, writes CSVs with documented headers and a manifest.json
naming every output, and exits with a code from the table below. Output is
deterministic: rerunning the same inputs rewrites byte-identical files.

exit 0  success
exit 2  collision detected
exit 3  invalid config, scenario diagnostics, or inadmissible perturbation
exit 4  speed-box guard tripped (integrator misconfiguration signal)
exit 5  certification failure
exit 6  perturbation distances not decreasing
exit 7  sweep invariant violation (collision or box exit in a sweep run)
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import CaccParams, ModelKind, Scenario, ScenarioError, validate_scenario
from .integrator import SolveResult, SolveStatus, simulate
from .perturbation import (
    ConvergenceRow,
    ConvergenceTable,
    PerturbationSpec,
    max_perturbation_scale,
    pair_signals,
    perturbed_simulate,
)
from .presets import PRESET_NAMES, preset_text
from .safety import build_envelope, certify_trajectory
from .scenario_io import (
    ConfigError,
    ParsedConfig,
    parse_config,
    profile_segments_dict,
    scenario_to_manifest,
)
from .sweep import run_sweep, write_sweep_csv
from .trajectory_io import (
    fmt,
    read_trajectory_csv,
    write_cert_report_csv,
    write_convergence_csv,
    write_envelope_csv,
    write_trajectory_csv,
)

DETERMINISM_NOTE = ("fixed-step integration, quadrature with fixed subdivision, "
                    "no randomness, no wall clock; identical inputs reproduce "
                    "outputs byte for byte")

_STATUS_EXIT = {
    SolveStatus.COMPLETED: 0,
    SolveStatus.COLLISION_DETECTED: 2,
    SolveStatus.GUARD_TRIPPED: 4,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="platoonsim",
        description="Platoon simulation and safety certification for a min-type car-following law.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", metavar="PATH", help="scenario config file")
        src.add_argument("--preset", metavar="NAME", choices=PRESET_NAMES,
                         help=f"built-in scenario: {', '.join(PRESET_NAMES)}")
        p.add_argument("--out", metavar="DIR", required=True, help="output directory")
        p.add_argument("--dt", type=float, metavar="F", help="override stepper dt")

    p_sim = sub.add_parser("simulate", help="integrate one scenario to CSV")
    common(p_sim)

    p_cmp = sub.add_parser("compare", help="run the same initial data under all three models")
    common(p_cmp)

    p_env = sub.add_parser("envelope", help="simulate, build safety envelopes, certify")
    common(p_env)
    p_env.add_argument("--check-only", action="store_true",
                       help="re-certify the trajectory.csv already in --out; write nothing")

    p_pert = sub.add_parser("perturb", help="leader-perturbation convergence study")
    common(p_pert)
    p_pert.add_argument("--strict-eps", choices=("true", "false"),
                        help="override the config's admissibility mode")

    p_sweep = sub.add_parser("sweep", help="run a scenario grid")
    common(p_sweep)
    p_sweep.add_argument("--workers", type=int, default=1, metavar="N",
                         help="parallel worker processes (default 1)")

    return parser


def _load(args) -> ParsedConfig:
    if args.preset is not None:
        text = preset_text(args.preset)
    else:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
    parsed = parse_config(text)
    if args.dt is not None:
        if not args.dt > 0.0:
            raise ConfigError(f"--dt must be positive, got {args.dt!r}")
        parsed = replace(parsed, scenario=replace(
            parsed.scenario, stepper=replace(parsed.scenario.stepper, dt=args.dt)))
    return parsed


def _require_valid(s: Scenario) -> None:
    diags = validate_scenario(s)
    if diags:
        raise ScenarioError(diags)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, s: Scenario, outputs: list[str],
                    extra: dict | None = None) -> None:
    data = {
        "command": command,
        "tool_version": __version__,
        "determinism": DETERMINISM_NOTE,
        "scenario": scenario_to_manifest(s),
        "outputs": sorted(outputs),
    }
    if extra:
        data.update(extra)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _report_result(res: SolveResult) -> None:
    if res.status is SolveStatus.COLLISION_DETECTED:
        t, follower = res.trajectory.collision
        print(f"collision: headway ahead of follower {follower} closed at t={fmt(t)}")
    elif res.status is SolveStatus.GUARD_TRIPPED:
        follower, velocity = res.stats.guard_violation
        print(f"guard tripped: follower {follower} velocity {fmt(velocity)} left the box",
              file=sys.stderr)


def cmd_simulate(args) -> int:
    parsed = _load(args)
    s = parsed.scenario
    _require_valid(s)
    out = _out_dir(args)
    res = simulate(s)
    write_trajectory_csv(res.trajectory, out / "trajectory.csv")
    _write_manifest(out, "simulate", s, ["trajectory.csv", "manifest.json"],
                    {"status": res.status.value, "steps": res.stats.steps,
                     "switch_refinements": res.stats.switch_refinements})
    _report_result(res)
    print(f"simulate: {res.status.value}, {res.trajectory.n_points} grid points "
          f"-> {out / 'trajectory.csv'}")
    return _STATUS_EXIT[res.status]


def _settle_time(times, v, terminal: float, band: float = 0.01) -> float:
    outside = abs(v - terminal) > band
    if not outside.any():
        return float(times[0])
    last = int(outside.nonzero()[0][-1])
    if last + 1 >= len(times):
        return float(times[-1])
    return float(times[last + 1])


def cmd_compare(args) -> int:
    parsed = _load(args)
    s = parsed.scenario
    _require_valid(s)
    out = _out_dir(args)
    base = s.base_params
    cacc_params = s.params if isinstance(s.params, CaccParams) else CaccParams(base)
    variants = (
        ("proposed", replace(s, model_kind=ModelKind.PROPOSED, params=base)),
        ("cacc", replace(s, model_kind=ModelKind.CACC, params=cacc_params)),
        ("ovfl", replace(s, model_kind=ModelKind.OVFL, params=base)),
    )
    outputs = ["summary.csv", "manifest.json"]
    summary_rows = []
    proposed_status = SolveStatus.COMPLETED
    for name, variant in variants:
        res = simulate(variant)
        if name == "proposed":
            proposed_status = res.status
        traj = res.trajectory
        write_trajectory_csv(traj, out / f"{name}.csv")
        outputs.append(f"{name}.csv")
        h = traj.headways()[:, 0]
        v = traj.velocities[:, 1]
        terminal_v = float(v[-1])
        u_of_t = variant.controls[0]
        in_band = abs(v - [u_of_t.value(float(t)) for t in traj.times]) < 0.01
        t_band = fmt(traj.times[int(in_band.nonzero()[0][0])]) if in_band.any() else "-"
        summary_rows.append([
            name, res.status.value, fmt(float(h.min())),
            fmt(traj.collision[0]) if traj.collision else "-",
            fmt(terminal_v),
            fmt(_settle_time(traj.times, v, terminal_v)),
            t_band,
        ])
        if res.status is SolveStatus.COLLISION_DETECTED:
            print(f"{name}: collision at t={fmt(traj.collision[0])}")
        else:
            print(f"{name}: {res.status.value}, min headway {fmt(float(h.min()))}")
    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "status", "min_headway", "collision_time",
                    "terminal_velocity", "settle_time", "time_to_control_band"])
        w.writerows(summary_rows)
    _write_manifest(out, "compare", s, outputs)
    return _STATUS_EXIT[proposed_status]


def cmd_envelope(args) -> int:
    parsed = _load(args)
    s = parsed.scenario
    _require_valid(s)
    out = _out_dir(args)
    if s.model_kind is not ModelKind.PROPOSED:
        print("envelope: certificates apply to the min-type law only", file=sys.stderr)
        return 3
    if args.check_only:
        traj_path = out / "trajectory.csv"
        if not traj_path.exists():
            print(f"envelope --check-only: no trajectory at {traj_path}", file=sys.stderr)
            return 3
        traj = read_trajectory_csv(traj_path)
        env = build_envelope(s, traj)
        report = certify_trajectory(traj, env)
        for name, margin, _, ok in report.rows():
            print(f"{name}: {'pass' if ok else 'FAIL'} (worst margin {fmt(margin)})")
        return 0 if report.passed else 5
    res = simulate(s)
    write_trajectory_csv(res.trajectory, out / "trajectory.csv")
    if res.status is not SolveStatus.COMPLETED:
        _write_manifest(out, "envelope", s, ["trajectory.csv", "manifest.json"],
                        {"status": res.status.value})
        _report_result(res)
        return _STATUS_EXIT[res.status]
    env = build_envelope(s, res.trajectory)
    report = certify_trajectory(res.trajectory, env)
    write_envelope_csv(res.trajectory, env, out / "envelope.csv")
    write_cert_report_csv(report, out / "certification.csv")
    _write_manifest(out, "envelope", s,
                    ["trajectory.csv", "envelope.csv", "certification.csv", "manifest.json"],
                    {"status": res.status.value,
                     "certified_min_headway": env.underline_h,
                     "headway_integral": env.H,
                     "certification_passed": report.passed})
    for name, margin, _, ok in report.rows():
        print(f"{name}: {'pass' if ok else 'FAIL'} (worst margin {fmt(margin)})")
    return 0 if report.passed else 5


def cmd_perturb(args) -> int:
    parsed = _load(args)
    s = parsed.scenario
    _require_valid(s)
    if parsed.perturbation is None:
        print("perturb: config has no [perturbation] section", file=sys.stderr)
        return 3
    if s.model_kind is not ModelKind.PROPOSED:
        print("perturb: the study targets the min-type law", file=sys.stderr)
        return 3
    pert = parsed.perturbation
    strict = pert.strict if args.strict_eps is None else args.strict_eps == "true"
    g = pert.resolved_g(s.horizon)
    eps0 = max_perturbation_scale(g, s.leader, s.base_params.v_bar, s.horizon)
    out = _out_dir(args)

    base = simulate(s)
    if base.status is not SolveStatus.COMPLETED:
        _report_result(base)
        return _STATUS_EXIT[base.status]
    t_base, xi_base, zeta_base = pair_signals(base.trajectory)

    eps_values = sorted({float(e) for e in pert.eps}, reverse=True)
    outputs = ["convergence.csv", "manifest.json"]
    rows = []
    bad_status = None
    for eps in eps_values:
        res = perturbed_simulate(s, PerturbationSpec(g, eps), strict=strict)
        name = f"trajectory_eps_{fmt(eps)}.csv"
        write_trajectory_csv(res.trajectory, out / name)
        outputs.append(name)
        if res.status is not SolveStatus.COMPLETED:
            _report_result(res)
            bad_status = res.status
            break
        _, xi, zeta = pair_signals(res.trajectory)
        rows.append(ConvergenceRow(eps, float(np.hypot(xi - xi_base, zeta - zeta_base).max())))
    table = ConvergenceTable(tuple(rows))
    write_convergence_csv(table, out / "convergence.csv")
    _write_manifest(out, "perturb", s, outputs,
                    {"eps": eps_values, "eps_admissible_max": eps0, "strict": strict,
                     "g": profile_segments_dict(g)})
    if bad_status is not None:
        return _STATUS_EXIT[bad_status]
    for row in table.rows:
        print(f"eps={fmt(row.eps)}: sup distance {fmt(row.sup_distance)}")
    tail = [r.sup_distance for r in table.rows[-3:]]
    if len(tail) == 3 and not (tail[0] > tail[1] > tail[2]):
        print("perturb: distances of the three smallest scales are not strictly decreasing",
              file=sys.stderr)
        return 6
    return 0


def cmd_sweep(args) -> int:
    parsed = _load(args)
    s = parsed.scenario
    _require_valid(s)
    if parsed.sweep is None:
        print("sweep: config has no [sweep] section", file=sys.stderr)
        return 3
    cfg = parsed.sweep
    if args.workers < 1:
        print("sweep: --workers must be at least 1", file=sys.stderr)
        return 3
    out = _out_dir(args)
    summaries = run_sweep(s, cfg, workers=args.workers)
    grid_keys = sorted(cfg.param_grids)
    write_sweep_csv(summaries, grid_keys, out / "runs.csv")
    _write_manifest(out, "sweep", s, ["runs.csv", "manifest.json"],
                    {"grid": {"n": list(cfg.n), "headways": list(cfg.headways),
                              "velocities": list(cfg.velocities),
                              **{k: list(v) for k, v in cfg.param_grids.items()}},
                     "runs": len(summaries)})
    completed = sum(1 for r in summaries if r.status == SolveStatus.COMPLETED.value)
    print(f"sweep: {completed}/{len(summaries)} runs completed -> {out / 'runs.csv'}")
    if s.model_kind is ModelKind.PROPOSED:
        bad = [r for r in summaries
               if r.status != SolveStatus.COMPLETED.value or not r.min_headway > 0.0]
        if bad:
            print(f"sweep: {len(bad)} run(s) violated the collision-free/velocity-box "
                  f"invariants (first: index {bad[0].index}, status {bad[0].status})",
                  file=sys.stderr)
            return 7
    return 0


_DISPATCH = {
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "envelope": cmd_envelope,
    "perturb": cmd_perturb,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 3
    except ScenarioError as e:
        for d in e.diagnostics:
            print(f"invalid scenario: {d.field}: {d.message}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
