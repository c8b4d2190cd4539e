"""Handle path geometry and minimum-jerk timing.

The path is a quadratic Bezier from ``pi`` to ``pf`` whose control point sits
``dev`` metres off the chord, on the side of the user (negative x).  Progress
along it follows the minimum-jerk quintic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class TrajectorySpec:
    pi: tuple[float, float]
    pf: tuple[float, float]
    dev: float = 0.0
    duration: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pi", (float(self.pi[0]), float(self.pi[1])))
        object.__setattr__(self, "pf", (float(self.pf[0]), float(self.pf[1])))
        if not self.duration > 0:
            raise ValueError("trajectory duration must be positive")
        if not self.dev >= 0:
            raise ValueError("dev must be nonnegative")
        if self.dev > 0 and self.chord_length == 0:
            raise ValueError("a bulging path needs distinct endpoints")

    @property
    def chord_length(self) -> float:
        return math.hypot(self.pf[0] - self.pi[0], self.pf[1] - self.pi[1])

    def validate_endpoints(self):
        """Configured rise paths must have distinct endpoints."""
        if self.chord_length <= 0:
            raise ValueError("trajectory endpoints coincide")

    def control_point(self) -> tuple[float, float]:
        mx = 0.5 * (self.pi[0] + self.pf[0])
        my = 0.5 * (self.pi[1] + self.pf[1])
        if self.dev == 0:
            return (mx, my)
        L = self.chord_length
        dx, dy = (self.pf[0] - self.pi[0]) / L, (self.pf[1] - self.pi[1]) / L
        nx, ny = -dy, dx
        if nx > 0:
            nx, ny = -nx, -ny
        return (mx + self.dev * nx, my + self.dev * ny)

    def to_dict(self) -> dict:
        return {"pi": list(self.pi), "pf": list(self.pf), "dev": self.dev, "duration": self.duration}

    @classmethod
    def from_dict(cls, d) -> "TrajectorySpec":
        return cls(pi=tuple(d["pi"]), pf=tuple(d["pf"]), dev=float(d.get("dev", 0.0)),
                   duration=float(d["duration"]))


def path_point(spec: TrajectorySpec, s: float) -> tuple[float, float]:
    if s <= 0.0:
        return spec.pi
    if s >= 1.0:
        return spec.pf
    if spec.dev == 0:
        return (spec.pi[0] + s * (spec.pf[0] - spec.pi[0]), spec.pi[1] + s * (spec.pf[1] - spec.pi[1]))
    cx, cy = spec.control_point()
    u = 1.0 - s
    return (
        u * u * spec.pi[0] + 2 * s * u * cx + s * s * spec.pf[0],
        u * u * spec.pi[1] + 2 * s * u * cy + s * s * spec.pf[1],
    )


def path_length(spec: TrajectorySpec, n: int = 4001) -> float:
    s = np.linspace(0.0, 1.0, n)
    pts = np.array([path_point(spec, v) for v in s])
    return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))


def minjerk_s(t: float, T: float) -> float:
    """Normalised progress 10 tau^3 - 15 tau^4 + 6 tau^5 with tau = t/T.

    Not clamped: outside [0, T] this is the polynomial's continuation, which
    keeps central differences at the endpoints meaningful.  Use
    :func:`minjerk_clamped` for a saturating profile.
    """
    tau = t / T
    return tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))


def minjerk_clamped(t: float, T: float) -> float:
    return minjerk_s(min(max(t, 0.0), T), T)


@dataclass
class TrajectoryState:
    """Progress along a spec.  ``shift_x`` rigidly translates the path."""

    spec: TrajectorySpec
    elapsed: float = 0.0
    shift_x: float = 0.0
    done: bool = field(default=False)
    # elapsed is recomputed as start + n * dt so long runs do not drift
    _start: float = field(default=None, init=False, repr=False)
    _ticks: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        self._start = self.elapsed

    @property
    def s(self) -> float:
        return minjerk_s(self.elapsed, self.spec.duration)

    def point(self) -> tuple[float, float]:
        x, y = path_point(self.spec, self.s)
        return (x + self.shift_x, y)

    def advance(self, dt: float) -> tuple[float, float]:
        if not self.done:
            self._ticks += 1
            self.elapsed = min(self._start + self._ticks * dt, self.spec.duration)
            # guard against floating drift leaving the last tick a hair short
            if self.spec.duration - self.elapsed < 1e-9:
                self.elapsed = self.spec.duration
            self.done = self.elapsed >= self.spec.duration
        return self.point()


def stabilization_update(state: TrajectoryState, x_shift: float) -> TrajectoryState:
    """Translate the remaining path by ``x_shift`` along x; elapsed time is not advanced."""
    state.shift_x += x_shift
    return state


def reverse_trajectory(state: TrajectoryState, T_rev: float | None = None,
                       current=None) -> TrajectorySpec:
    """Straight-line spec from the current commanded point back to the path start.

    ``current`` overrides the start point, for callers whose command differs
    from the nominal path point (admittance offsets, stabilisation).
    """
    start = state.point() if current is None else (float(current[0]), float(current[1]))
    if T_rev is None:
        T_rev = state.elapsed
    return TrajectorySpec(pi=start, pf=state.spec.pi, dev=0.0, duration=T_rev)


def with_start(spec: TrajectorySpec, start) -> TrajectorySpec:
    return replace(spec, pi=(float(start[0]), float(start[1])))
