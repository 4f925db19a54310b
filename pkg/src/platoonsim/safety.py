"""Safety certificates and trajectory envelopes for the min-type law.

The certified minimum headway needs the headway time-integral H, and the
only headway envelope that could bound H needs the certified minimum, so
the constants are resolved in two passes: H is measured a posteriori from
the simulated trajectory, then the minimum-headway bound and the velocity
and headway envelopes are assembled from it. An a priori fixed-point
variant (alternating envelope integral and headway bound, starting from the
initial headway) is provided as well for certification before simulating.

Envelopes may be visibly loose relative to the trajectory: the constants
are used raw, with no calibration step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ModelKind, ModelParams, Scenario, Trajectory
from .profiles import PiecewiseProfile

__all__ = [
    "SafetyEnvelope",
    "CheckResult",
    "CertReport",
    "trajectory_headway_integral",
    "headway_lower_bound",
    "envelope_decay_rate",
    "velocity_lower_envelope",
    "headway_upper_envelope",
    "velocity_upper_envelope",
    "build_envelope",
    "apriori_headway_lower_bound",
    "build_envelope_apriori",
    "certify_trajectory",
    "estimate_lipschitz",
    "gronwall_bound",
]

QUAD_REL_TOL = 1e-9

CHECK_NAMES = ("headway_lower", "headway_upper", "velocity_envelope", "velocity_box")


@dataclass(frozen=True)
class SafetyEnvelope:
    """Certified bounds for one leader/follower pair.

    underline_h: certified minimum headway.
    H: headway time-integral constant used to produce it.
    V_lo, h_hi, V_hi: scalar time envelopes (velocity lower, headway upper,
    velocity upper). v_bar carries the speed cap for the box check.
    """

    underline_h: float
    H: float
    V_lo: Callable[[float], float]
    h_hi: Callable[[float], float]
    V_hi: Callable[[float], float]
    v_bar: float


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_margin: float
    worst_time: float


@dataclass(frozen=True)
class CertReport:
    checks: tuple[CheckResult, ...]
    grid_size: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def rows(self) -> list[tuple[str, float, float, bool]]:
        return [(c.name, c.worst_margin, c.worst_time, c.passed) for c in self.checks]


def trajectory_headway_integral(traj: Trajectory, follower: int = 1) -> float:
    """Trapezoidal integral of one follower's headway over the trajectory.

    This a posteriori value instantiates the existential constant H in the
    minimum-headway bound. Collision trajectories are rejected: the integral
    would not certify anything.
    """
    if traj.collision is not None:
        raise ValueError("headway integral is undefined for a collision trajectory")
    if not 1 <= follower < traj.n_vehicles:
        raise IndexError(f"follower {follower} out of range for {traj.n_vehicles} vehicles")
    h = traj.positions[:, follower - 1] - traj.positions[:, follower]
    return float(np.trapezoid(h, traj.times))


def headway_lower_bound(p: ModelParams, h0: float, v0: float, H: float) -> float:
    """Certified minimum headway k_v / (v0 + H k_d + k_v/h0).

    Always in (0, h0]: at v0 = H = 0 it degenerates to h0 and it is strictly
    decreasing in both v0 and H.
    """
    if not h0 > 0.0:
        raise ValueError("h0 must be positive")
    if v0 < 0.0 or H < 0.0:
        raise ValueError("v0 and H must be nonnegative")
    return p.k_v / (v0 + H * p.k_d + p.k_v / h0)


def envelope_decay_rate(p: ModelParams, underline_h: float) -> float:
    """Exponential rate max{k_v/underline_h^2 + k_d tau_s, k} of the velocity envelopes."""
    if not underline_h > 0.0:
        raise ValueError("underline_h must be positive")
    return max(p.k_v / (underline_h * underline_h) + p.k_d * p.tau_s, p.k)


def velocity_lower_envelope(p: ModelParams, v0: float, underline_h: float, t: float) -> float:
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    return v0 * math.exp(-envelope_decay_rate(p, underline_h) * t)


def headway_upper_envelope(p: ModelParams, h0: float, v0: float, v_bar: float,
                           underline_h: float, t: float) -> float:
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    r = envelope_decay_rate(p, underline_h)
    return h0 + v_bar * t + v0 * (math.exp(-r * t) - 1.0) / r


def _adaptive_simpson(f, a: float, b: float, rel_tol: float) -> float:
    if b <= a:
        return 0.0
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _asr(f, a, m, b, fa, fm, fb, whole, rel_tol, 50)


def _asr(f, a, m, b, fa, fm, fb, whole, rel_tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    refined = left + right
    delta = refined - whole
    if depth <= 0 or abs(delta) <= 15.0 * rel_tol * max(abs(refined), 1e-30):
        return refined + delta / 15.0
    return (_asr(f, a, lm, m, fa, flm, fm, left, rel_tol, depth - 1)
            + _asr(f, m, rm, b, fm, frm, fb, right, rel_tol, depth - 1))


def _integrate_smooth(f, a: float, b: float, breakpoints: Sequence[float] = ()) -> float:
    """Adaptive Simpson over [a, b], split at interior breakpoints (law kinks)."""
    cuts = sorted({a, b, *(c for c in breakpoints if a < c < b)})
    return sum(_adaptive_simpson(f, lo, hi, QUAD_REL_TOL)
               for lo, hi in zip(cuts, cuts[1:]))


def velocity_upper_envelope(p: ModelParams, v0: float, u: PiecewiseProfile,
                            h_hi: Callable[[float], float], underline_h: float,
                            v_bar: float, t: float) -> float:
    """Velocity upper envelope: min of the control-relaxation branch and the
    spacing-relaxation branch.

    Control branch: k * int_0^t e^{k(s-t)} u(s) ds + v0 e^{-kt}, which for a
    constant control closes to u + (v0 - u) e^{-kt}. Spacing branch:
    int_0^t e^{k_d tau_s (s-t)} (k_d h_hi(s) + k_v v_bar / underline_h^2) ds
    + v0 e^{-k_d tau_s t}. Integrals use adaptive Simpson at 1e-9 relative.
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return v0
    k = p.k
    uc = u.is_constant()
    if uc is not None:
        branch1 = uc + (v0 - uc) * math.exp(-k * t)
    else:
        decay = math.exp(-k * t)
        kernel = lambda s: math.exp(k * (s - t)) * u.value(s)
        cuts = [seg.t0 for seg in u.segments]
        branch1 = k * _integrate_smooth(kernel, 0.0, t, cuts) + v0 * decay
    b = p.k_d * p.tau_s
    drive = p.k_v * v_bar / (underline_h * underline_h)
    kd = p.k_d
    kernel2 = lambda s: math.exp(b * (s - t)) * (kd * h_hi(s) + drive)
    branch2 = _integrate_smooth(kernel2, 0.0, t) + v0 * math.exp(-b * t)
    return min(branch1, branch2)


def _assemble(p: ModelParams, h0: float, v0: float, underline_h: float, H: float,
              u: PiecewiseProfile) -> SafetyEnvelope:
    v_bar = p.v_bar

    def V_lo(t: float) -> float:
        return velocity_lower_envelope(p, v0, underline_h, t)

    def h_hi(t: float) -> float:
        return headway_upper_envelope(p, h0, v0, v_bar, underline_h, t)

    def V_hi(t: float) -> float:
        return velocity_upper_envelope(p, v0, u, h_hi, underline_h, v_bar, t)

    return SafetyEnvelope(underline_h, H, V_lo, h_hi, V_hi, v_bar)


def _pair_initials(s: Scenario, follower: int) -> tuple[float, float]:
    lead = s.initial.vehicles[follower - 1]
    veh = s.initial.vehicles[follower]
    return lead.x - veh.x, veh.v


def build_envelope(s: Scenario, traj: Trajectory, follower: int = 1) -> SafetyEnvelope:
    """A posteriori envelope for one leader/follower pair of a simulated run.

    Pass 1 measures H from the trajectory, pass 2 turns it into the
    certified minimum headway, pass 3 assembles the three time envelopes.
    """
    if s.model_kind is not ModelKind.PROPOSED:
        raise ValueError("safety certificates apply to the min-type law only")
    p = s.base_params
    h0, v0 = _pair_initials(s, follower)
    H = trajectory_headway_integral(traj, follower)
    underline_h = headway_lower_bound(p, h0, v0, H)
    return _assemble(p, h0, v0, underline_h, H, s.controls[follower - 1])


def apriori_headway_lower_bound(p: ModelParams, h0: float, v0: float,
                                T: float, max_iter: int = 100,
                                rel_tol: float = 1e-8) -> tuple[float, float]:
    """Fixed point of (headway bound <- envelope integral <- headway bound).

    Starts from underline_h = h0, integrates the headway upper envelope in
    closed form to get H, recomputes the bound, and repeats. Returns the
    final (underline_h, H). No trajectory needed.
    """
    if not h0 > 0.0:
        raise ValueError("h0 must be positive")
    if v0 < 0.0:
        raise ValueError("v0 must be nonnegative")
    if not T > 0.0:
        raise ValueError("T must be positive")
    v_bar = p.v_bar
    underline_h = h0
    H = 0.0
    for _ in range(max_iter):
        r = envelope_decay_rate(p, underline_h)
        # int_0^T h_hi = h0 T + v_bar T^2/2 + v0 ((1 - e^{-rT})/r^2 - T/r)
        H = h0 * T + 0.5 * v_bar * T * T + v0 * (
            (1.0 - math.exp(-r * T)) / (r * r) - T / r)
        new = headway_lower_bound(p, h0, v0, H)
        if abs(new - underline_h) <= rel_tol * underline_h:
            underline_h = new
            break
        underline_h = new
    return underline_h, H


def build_envelope_apriori(s: Scenario, follower: int = 1) -> SafetyEnvelope:
    """Envelope certified before simulating, via the fixed-point H."""
    if s.model_kind is not ModelKind.PROPOSED:
        raise ValueError("safety certificates apply to the min-type law only")
    p = s.base_params
    h0, v0 = _pair_initials(s, follower)
    underline_h, H = apriori_headway_lower_bound(p, h0, v0, s.horizon)
    return _assemble(p, h0, v0, underline_h, H, s.controls[follower - 1])


def certify_trajectory(traj: Trajectory, env: SafetyEnvelope, tol: float = 1e-6,
                       follower: int = 1) -> CertReport:
    """Check a trajectory against an envelope at every grid point.

    Four checks: headway above the certified minimum, headway below its
    upper envelope, velocity inside [V_lo, V_hi], velocity inside
    [0, v_bar]. A check fails iff its worst signed margin drops below -tol.
    """
    if not 1 <= follower < traj.n_vehicles:
        raise IndexError(f"follower {follower} out of range for {traj.n_vehicles} vehicles")
    times = traj.times
    h = traj.positions[:, follower - 1] - traj.positions[:, follower]
    v = traj.velocities[:, follower]
    lo = np.array([env.V_lo(t) for t in times])
    hi = np.array([env.V_hi(t) for t in times])
    h_cap = np.array([env.h_hi(t) for t in times])

    margins = (
        ("headway_lower", h - env.underline_h),
        ("headway_upper", h_cap - h),
        ("velocity_envelope", np.minimum(v - lo, hi - v)),
        ("velocity_box", np.minimum(v, env.v_bar - v)),
    )
    checks = []
    for name, m in margins:
        i = int(np.argmin(m))
        worst = float(m[i])
        checks.append(CheckResult(name, worst >= -tol, worst, float(times[i])))
    return CertReport(tuple(checks), len(times), tol)


def estimate_lipschitz(p: ModelParams, box: tuple[tuple[float, float], tuple[float, float]],
                       samples_per_axis: int = 100) -> float:
    """Sampled upper bound on the acceleration map's gradient norm over a box.

    box is ((h_min, h_max), (v_min, v_max)); the velocity range is used for
    both the leader's and the follower's speed. Both branches of the min are
    sampled (the min's a.e. gradient is one of the two), the largest
    Euclidean gradient norm wins, and a 1.5 safety factor covers the gaps
    between samples. The grid is capped at 10^6 points.
    """
    (h_min, h_max), (v_min, v_max) = box
    if not h_min > 0.0:
        raise ValueError("h range must stay positive (singular law)")
    if h_min > h_max or v_min > v_max:
        raise ValueError("empty box")
    n = samples_per_axis
    if n < 1:
        raise ValueError("samples_per_axis must be at least 1")
    while n > 1 and n ** 3 > 1_000_000:
        n -= 1
    hs = np.linspace(h_min, h_max, n)
    vs = np.linspace(v_min, v_max, n)
    h = hs[:, None, None]
    v_l = vs[None, :, None]
    v = vs[None, None, :]
    inv2 = 1.0 / (h * h)
    d_h = -2.0 * p.k_v * (v_l - v) * inv2 / h + p.k_d
    d_vl = p.k_v * inv2
    d_v = -p.k_v * inv2 - p.k_d * p.tau_s
    gap_norm = float(np.sqrt(d_h * d_h + d_vl * d_vl + d_v * d_v).max())
    return 1.5 * max(gap_norm, p.k)


def gronwall_bound(C_L: float, T: float, init_dist: float) -> float:
    """Divergence bound init_dist * exp(C_L * T); overflow saturates to inf."""
    if C_L < 0.0 or T < 0.0 or init_dist < 0.0:
        raise ValueError("C_L, T, init_dist must be nonnegative")
    if init_dist == 0.0:
        return 0.0
    try:
        return init_dist * math.exp(C_L * T)
    except OverflowError:
        return math.inf
