"""Piecewise time profiles with exact per-segment integrals.

Leader accelerations and per-follower desired-velocity signals are built
from contiguous segments of the form

    value(t) = const + slope*(t - t0) + sum_j amp_j * sin(omega_j*(t - t0) + phase_j)

on [t0, t1). Constants, ramps, sinusoids, and linearly interpolated tables
are all expressible this way, and every segment integrates in closed form,
so running integrals (and therefore speed-cap checks) carry no quadrature
error. Profiles are closed under pointwise addition and scalar multiplication,
which keeps perturbed leader profiles inside the same representation.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Segment", "PiecewiseProfile", "constant_profile", "profile_from_table"]


@dataclass(frozen=True)
class Segment:
    """One piece of a profile, valid on [t0, t1).

    sines holds (amplitude, omega, phase) triples evaluated relative to t0.
    """

    t0: float
    t1: float
    const: float = 0.0
    slope: float = 0.0
    sines: tuple[tuple[float, float, float], ...] = ()

    def value(self, t: float) -> float:
        dt = t - self.t0
        v = self.const + self.slope * dt
        for amp, omega, phase in self.sines:
            v += amp * math.sin(omega * dt + phase)
        return v

    def integral(self, a: float, b: float) -> float:
        """Exact integral over [a, b], which must lie inside [t0, t1]."""
        da = a - self.t0
        db = b - self.t0
        total = self.const * (db - da) + 0.5 * self.slope * (db * db - da * da)
        for amp, omega, phase in self.sines:
            if omega == 0.0:
                total += amp * math.sin(phase) * (db - da)
            else:
                total += amp * (math.cos(omega * da + phase) - math.cos(omega * db + phase)) / omega
        return total

    def rebased(self, t0: float, t1: float) -> "Segment":
        """Same function restricted to [t0, t1] with coefficients rebased to t0."""
        shift = t0 - self.t0
        return Segment(
            t0,
            t1,
            const=self.const + self.slope * shift,
            slope=self.slope,
            sines=tuple((amp, om, ph + om * shift) for amp, om, ph in self.sines),
        )

    def scaled(self, factor: float) -> "Segment":
        return Segment(
            self.t0,
            self.t1,
            const=factor * self.const,
            slope=factor * self.slope,
            sines=tuple((factor * amp, om, ph) for amp, om, ph in self.sines),
        )


@dataclass(frozen=True)
class PiecewiseProfile:
    """A contiguous chain of segments defining a function of time.

    Evaluation outside [start, end] clamps to the nearest endpoint; range
    enforcement is the caller's concern (scenario validation does it on a
    dense grid).
    """

    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("profile needs at least one segment")
        prev = None
        for seg in self.segments:
            if not (seg.t1 > seg.t0):
                raise ValueError(f"segment on [{seg.t0}, {seg.t1}] has non-positive length")
            if prev is not None and seg.t0 != prev.t1:
                raise ValueError(f"segments not contiguous at t={prev.t1} vs t={seg.t0}")
            prev = seg

    @property
    def start(self) -> float:
        return self.segments[0].t0

    @property
    def end(self) -> float:
        return self.segments[-1].t1

    @cached_property
    def _starts(self) -> tuple[float, ...]:
        return tuple(seg.t0 for seg in self.segments)

    @cached_property
    def _prefix(self) -> tuple[float, ...]:
        """Integral from self.start to each segment's t0."""
        acc = [0.0]
        for seg in self.segments:
            acc.append(acc[-1] + seg.integral(seg.t0, seg.t1))
        return tuple(acc)

    def _locate(self, t: float) -> int:
        i = bisect_right(self._starts, t) - 1
        if i < 0:
            return 0
        if i >= len(self.segments):
            return len(self.segments) - 1
        return i

    def value(self, t: float) -> float:
        if t <= self.start:
            return self.segments[0].value(self.segments[0].t0)
        if t >= self.end:
            return self.segments[-1].value(self.segments[-1].t1)
        return self.segments[self._locate(t)].value(t)

    def integrate(self, a: float, b: float) -> float:
        """Exact integral over [a, b] (clamped to the profile's span)."""
        if b < a:
            return -self.integrate(b, a)
        a = min(max(a, self.start), self.end)
        b = min(max(b, self.start), self.end)
        ia = self._locate(a)
        ib = self._locate(b)
        if ia == ib:
            return self.segments[ia].integral(a, b)
        seg_a = self.segments[ia]
        total = seg_a.integral(a, seg_a.t1)
        total += self._prefix[ib] - self._prefix[ia + 1]
        total += self.segments[ib].integral(self.segments[ib].t0, b)
        return total

    def values(self, ts: np.ndarray) -> np.ndarray:
        """Vectorized evaluation (used by the dense validation grid)."""
        ts = np.asarray(ts, dtype=float)
        out = np.empty_like(ts)
        clamped = np.clip(ts, self.start, self.end)
        for idx, seg in enumerate(self.segments):
            if idx == len(self.segments) - 1:
                mask = (clamped >= seg.t0) & (clamped <= seg.t1)
            else:
                mask = (clamped >= seg.t0) & (clamped < seg.t1)
            if not mask.any():
                continue
            dt = clamped[mask] - seg.t0
            v = seg.const + seg.slope * dt
            for amp, om, ph in seg.sines:
                v = v + amp * np.sin(om * dt + ph)
            out[mask] = v
        return out

    def integrals_from_start(self, ts: np.ndarray) -> np.ndarray:
        """Vectorized exact integral from self.start to each t."""
        ts = np.asarray(ts, dtype=float)
        out = np.empty_like(ts)
        clamped = np.clip(ts, self.start, self.end)
        for idx, seg in enumerate(self.segments):
            if idx == len(self.segments) - 1:
                mask = (clamped >= seg.t0) & (clamped <= seg.t1)
            else:
                mask = (clamped >= seg.t0) & (clamped < seg.t1)
            if not mask.any():
                continue
            dt = clamped[mask] - seg.t0
            part = seg.const * dt + 0.5 * seg.slope * dt * dt
            for amp, om, ph in seg.sines:
                if om == 0.0:
                    part = part + amp * math.sin(ph) * dt
                else:
                    part = part + amp * (math.cos(ph) - np.cos(om * dt + ph)) / om
            out[mask] = self._prefix[idx] + part
        return out

    def l1_norm(self, a: float | None = None, b: float | None = None, subdivisions: int = 4096) -> float:
        """Quadrature of |value| over [a, b] (composite Simpson per segment).

        Deterministic by construction: a fixed subdivision count, no adaptivity.
        """
        a = self.start if a is None else a
        b = self.end if b is None else b
        total = 0.0
        for seg in self.segments:
            lo = max(a, seg.t0)
            hi = min(b, seg.t1)
            if hi <= lo:
                continue
            ts = np.linspace(lo, hi, 2 * subdivisions + 1)
            dt = ts - seg.t0
            v = seg.const + seg.slope * dt
            for amp, om, ph in seg.sines:
                v = v + amp * np.sin(om * dt + ph)
            y = np.abs(v)
            h = (hi - lo) / (2 * subdivisions)
            total += (h / 3.0) * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())
        return float(total)

    def scaled(self, factor: float) -> "PiecewiseProfile":
        return PiecewiseProfile(tuple(seg.scaled(factor) for seg in self.segments))

    def __add__(self, other: "PiecewiseProfile") -> "PiecewiseProfile":
        """Pointwise sum on the intersection of the two spans."""
        lo = max(self.start, other.start)
        hi = min(self.end, other.end)
        if hi <= lo:
            raise ValueError("profiles do not overlap")
        cuts = sorted({lo, hi}
                      | {s.t0 for s in self.segments if lo < s.t0 < hi}
                      | {s.t0 for s in other.segments if lo < s.t0 < hi})
        merged = []
        for t0, t1 in zip(cuts[:-1], cuts[1:]):
            sa = self.segments[self._locate(t0)].rebased(t0, t1)
            sb = other.segments[other._locate(t0)].rebased(t0, t1)
            merged.append(Segment(t0, t1, const=sa.const + sb.const,
                                  slope=sa.slope + sb.slope,
                                  sines=sa.sines + sb.sines))
        return PiecewiseProfile(tuple(merged))

    def is_constant(self) -> float | None:
        """The profile's value if it is a single constant segment, else None."""
        if len(self.segments) == 1:
            seg = self.segments[0]
            if seg.slope == 0.0 and not seg.sines:
                return seg.const
        return None


def constant_profile(value: float, t0: float, t1: float) -> PiecewiseProfile:
    return PiecewiseProfile((Segment(t0, t1, const=value),))


def profile_from_table(points: list[tuple[float, float]]) -> PiecewiseProfile:
    """Linear interpolation through (t, value) knots as a chain of ramp segments."""
    if len(points) < 2:
        raise ValueError("table needs at least two knots")
    segs = []
    for (ta, va), (tb, vb) in zip(points[:-1], points[1:]):
        if tb <= ta:
            raise ValueError("table knots must have strictly increasing times")
        segs.append(Segment(ta, tb, const=va, slope=(vb - va) / (tb - ta)))
    return PiecewiseProfile(tuple(segs))
