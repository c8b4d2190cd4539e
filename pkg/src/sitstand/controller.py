"""Mode state machine and per-mode handle control laws."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .fuzzy import FuzzyConfig, infer
from .preprocessing import (
    DEFAULT_CUTOFF_HZ,
    DEFAULT_FY_MIN,
    DEFAULT_SUPPORT,
    Preprocessor,
    PosturalFeatures,
    RunningMaxFilter,
    SensorFrame,
)
from .trajectory import (
    TrajectorySpec,
    TrajectoryState,
    reverse_trajectory,
    stabilization_update,
    with_start,
)

Vec = tuple[float, float]


class ControlMode(str, enum.Enum):
    ADMITTANCE = "Admittance"
    NORMAL = "Normal"
    STABILIZATION = "Stabilization"
    RETURN = "Return"
    DONE = "Done"


TRANSITIONS = frozenset({
    (ControlMode.ADMITTANCE, ControlMode.NORMAL),
    (ControlMode.NORMAL, ControlMode.STABILIZATION),
    (ControlMode.STABILIZATION, ControlMode.NORMAL),
    (ControlMode.NORMAL, ControlMode.RETURN),
    (ControlMode.NORMAL, ControlMode.DONE),
    (ControlMode.RETURN, ControlMode.ADMITTANCE),
})


class NotConfigured(RuntimeError):
    pass


class IllegalTransition(RuntimeError):
    pass


@dataclass(frozen=True)
class GainConfig:
    k: Vec = (2e-5, 2e-5)
    b: float = 0.002
    A: Vec = (3.0, 0.0)
    dt: float = 0.01
    nu2_max: float = 20.0
    instability_threshold: float = 10.0
    hysteresis: float = 0.8
    n_hold: int = 20
    abort_threshold: float = 8.0
    pre_accel_threshold: float = 5.0
    rising_threshold: float = 35.0
    max_step: float = 0.01
    window: int = 10
    return_min_duration: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(float(v) for v in self.k))
        object.__setattr__(self, "A", tuple(float(v) for v in self.A))
        kx, ky = self.k
        if not (kx > 0 and ky > 0):
            raise ValueError("admittance gains k must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not (0.0 <= self.b / self.dt < 1.0):
            raise ValueError("damping must satisfy 0 <= b/dt < 1")
        if not (self.A[0] >= 1.0 and self.A[1] == 0.0):
            raise ValueError("stabilisation amplification needs Ax >= 1 and Ay == 0")
        for name in ("nu2_max", "instability_threshold", "abort_threshold",
                     "pre_accel_threshold", "rising_threshold", "max_step", "return_min_duration"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 < self.hysteresis <= 1.0):
            raise ValueError("hysteresis must lie in (0, 1]")
        if self.n_hold < 1 or self.window < 1:
            raise ValueError("n_hold and window must be >= 1")

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d) -> "GainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown gain fields: {sorted(unknown)}")
        kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
        return cls(**kw)


@dataclass(frozen=True)
class HandleCommand:
    X: Vec
    mode: ControlMode
    nu1_raw: float
    nu1_used: float
    nu2: float
    features: PosturalFeatures | None = None


def _cap(v: Vec, limit: float) -> Vec:
    n = math.hypot(v[0], v[1])
    if n <= limit:
        return v
    return (v[0] * limit / n, v[1] * limit / n)


def admittance_step(Fh: Vec, prev_dX: Vec, g: GainConfig) -> Vec:
    """dX = k * Fh + (b / dt) * prev_dX, capped at ``g.max_step``."""
    r = g.b / g.dt
    dX = (g.k[0] * Fh[0] + r * prev_dX[0], g.k[1] * Fh[1] + r * prev_dX[1])
    return _cap(dX, g.max_step)


def admittance_weight(nu2: float, g: GainConfig) -> float:
    return min(abs(nu2) / g.nu2_max, 1.0)


def normal_step(Fh: Vec, prev_dX: Vec, Xtraj: Vec, nu2: float, g: GainConfig) -> Vec:
    w = admittance_weight(nu2, g)
    if w == 0.0:
        return Xtraj
    dX = admittance_step(Fh, prev_dX, g)
    return (Xtraj[0] + w * dX[0], Xtraj[1] + w * dX[1])


def stabilization_step(Fh: Vec, prev_dX: Vec, nu2: float, g: GainConfig) -> Vec:
    w = admittance_weight(nu2, g)
    dX = admittance_step(Fh, prev_dX, g)
    return (g.A[0] * w * dX[0], g.A[1] * w * dX[1])


@dataclass
class _Episode:
    start_X: Vec
    calm_ticks: int = 0


class Supervisor:
    """One control loop: preprocessing, fuzzy supervision, mode machine, command.

    Advance it with :meth:`step` once per control period.
    """

    def __init__(self, fuzzy: FuzzyConfig | None, gains: GainConfig, trajectory: TrajectorySpec,
                 cutoff_hz: float = DEFAULT_CUTOFF_HZ, fy_min: float = DEFAULT_FY_MIN,
                 support=DEFAULT_SUPPORT):
        self.fuzzy = fuzzy
        self.gains = gains
        self.home_spec = trajectory
        self.pre = Preprocessor(dt=gains.dt, cutoff_hz=cutoff_hz, fy_min=fy_min, support=support)
        self.nu1_filter = RunningMaxFilter(gains.window)
        self.mode = ControlMode.ADMITTANCE
        self.X: Vec = trajectory.pi
        self.prev_dX: Vec = (0.0, 0.0)
        self.traj: TrajectoryState | None = None
        self.reverse: TrajectoryState | None = None
        self.episode: _Episode | None = None
        self.nu1_raw = 0.0
        self.nu1_peak = 0.0
        self.transitions: list[tuple[float, ControlMode, ControlMode]] = []
        self.stabilization_episodes = 0
        self.t = None

    @property
    def finished(self) -> bool:
        return self.mode is ControlMode.DONE or (
            bool(self.transitions) and self.transitions[-1][1:] == (ControlMode.RETURN, ControlMode.ADMITTANCE)
        )

    def _go(self, t: float, new: ControlMode):
        if (self.mode, new) not in TRANSITIONS:
            raise IllegalTransition(f"{self.mode.value} -> {new.value}")
        self.transitions.append((t, self.mode, new))
        self.mode = new

    def step(self, frame: SensorFrame) -> HandleCommand:
        if self.fuzzy is None:
            raise NotConfigured("supervisor has no fuzzy configuration")
        g = self.gains
        feats = self.pre.derive(frame)
        out = infer(self.fuzzy, feats, prev_nu1=self.nu1_raw)
        self.nu1_raw = out.nu1
        nu1 = self.nu1_filter.push(out.nu1)
        nu2 = out.nu2
        if not feats.cop_valid and nu1 < g.pre_accel_threshold:
            # feet unloaded while seated: stability output is meaningless
            nu2 = 0.0
        if self.mode is ControlMode.NORMAL:
            self.nu1_peak = max(self.nu1_peak, nu1)

        self._transition(frame.t, nu1, nu2)
        X = self._law(frame, feats, nu2)
        X = self._apply(X)
        self.t = frame.t
        return HandleCommand(X=X, mode=self.mode, nu1_raw=out.nu1, nu1_used=nu1, nu2=nu2, features=feats)

    def _transition(self, t: float, nu1: float, nu2: float):
        g = self.gains
        mode = self.mode
        if mode is ControlMode.ADMITTANCE:
            if nu1 >= g.pre_accel_threshold and self.reverse is None:
                # the admittance phase chose the start point; keep the configured goal
                self.traj = TrajectoryState(with_start(self.home_spec, self.X))
                self.nu1_peak = nu1
                self.prev_dX = (0.0, 0.0)
                self._go(t, ControlMode.NORMAL)
        elif mode is ControlMode.NORMAL:
            if abs(nu2) >= g.instability_threshold:
                self.episode = _Episode(start_X=self.X)
                self.stabilization_episodes += 1
                self._go(t, ControlMode.STABILIZATION)
            elif self.nu1_peak - nu1 > g.abort_threshold:
                T_rev = max(self.traj.elapsed, g.return_min_duration)
                self.reverse = TrajectoryState(reverse_trajectory(self.traj, T_rev, current=self.X))
                self._go(t, ControlMode.RETURN)
            elif self.traj.done and nu1 >= g.rising_threshold:
                self._go(t, ControlMode.DONE)
        elif mode is ControlMode.STABILIZATION:
            ep = self.episode
            if abs(nu2) < g.instability_threshold * g.hysteresis:
                ep.calm_ticks += 1
            else:
                ep.calm_ticks = 0
            if ep.calm_ticks >= g.n_hold:
                self.episode = None
                self._go(t, ControlMode.NORMAL)
        elif mode is ControlMode.RETURN:
            if self.reverse.done:
                self.nu1_filter.reset()
                self.nu1_peak = 0.0
                self._go(t, ControlMode.ADMITTANCE)

    def _law(self, frame: SensorFrame, feats: PosturalFeatures, nu2: float) -> Vec:
        g = self.gains
        Fh = (feats.Fhx, feats.Fhy)
        mode = self.mode
        if mode is ControlMode.ADMITTANCE:
            if self.reverse is not None:
                # just returned home: hold there
                return self.X
            dX = admittance_step(Fh, self.prev_dX, g)
            self.prev_dX = dX
            return (self.X[0] + dX[0], self.X[1] + dX[1])
        if mode is ControlMode.NORMAL:
            Xtraj = self.traj.advance(g.dt)
            X = normal_step(Fh, self.prev_dX, Xtraj, nu2, g)
            self.prev_dX = (X[0] - Xtraj[0], X[1] - Xtraj[1])
            return X
        if mode is ControlMode.STABILIZATION:
            dX = stabilization_step(Fh, self.prev_dX, nu2, g)
            self.prev_dX = dX
            stabilization_update(self.traj, dX[0])
            return (self.X[0] + dX[0], self.X[1])
        if mode is ControlMode.RETURN:
            return self.reverse.advance(g.dt)
        return self.X

    def _apply(self, X: Vec) -> Vec:
        step = _cap((X[0] - self.X[0], X[1] - self.X[1]), self.gains.max_step)
        if step == (X[0] - self.X[0], X[1] - self.X[1]):
            self.X = X
        else:
            self.X = (self.X[0] + step[0], self.X[1] + step[1])
        return self.X
