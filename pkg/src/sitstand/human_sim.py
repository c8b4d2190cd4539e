"""Synthetic sit-to-stand subject.

Force profiles are piecewise linear between phase boundaries and obey the
quasi-static balance Fgy + chair + Fhy = m g plus an inertial term around
seat-off.  The handle command feeds back into the handle forces: a handle
leading the body's own progress loads it more, and a horizontal offset
from the body's natural hand position is resisted like a spring.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .preprocessing import DEFAULT_DT, SensorFrame
from .trajectory import TrajectorySpec, minjerk_clamped, path_point

G = 9.81

PHASES = ("sitted", "pre-acceleration", "acceleration", "start-rising", "rising", "standing")
SCENARIO_KINDS = ("nominal", "perturb_forward", "perturb_backward", "abort", "noisy")

DEFAULT_HAND_PATH = TrajectorySpec(pi=(0.30, 0.70), pf=(0.20, 1.00), dev=0.05, duration=3.0)

# profile anchors at the phase boundaries b0..b6 (start of sitted .. end of standing)
_FHY = (0.0, 0.0, 40.0, 75.0, 60.0, 0.0, 0.0)            # N, for a 70 kg subject
_FHX = (0.0, 0.0, -25.0, -30.0, -15.0, 0.0, 0.0)
_FGX = (0.0, 0.0, 10.0, 25.0, 20.0, 0.0, 0.0)
_INERTIA = (0.0, 0.0, 0.0, 0.10, 0.05, 0.0, 0.0)          # fraction of m g
_CHAIR_SCALE = (1.0, 1.0, 0.8, 0.2, 0.0, 0.0, 0.0)        # fraction of the seated chair load
_COP = (0.24, 0.24, 0.52, 0.60, 0.56, 0.48, 0.48)         # fraction of the support length


@dataclass(frozen=True)
class BodyParams:
    mass: float = 70.0
    seated_fraction: float = 0.25
    support: tuple[float, float] = (0.0, 0.25)
    durations: tuple[float, ...] = (1.0, 1.0, 0.5, 0.5, 1.5, 1.0)
    handle_gain: float = 40.0        # N of extra handle load per unit progress lead
    handle_stiffness_x: float = 100.0  # N/m

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(float(v) for v in self.support))
        object.__setattr__(self, "durations", tuple(float(v) for v in self.durations))
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not 0.0 <= self.seated_fraction <= 1.0:
            raise ValueError("seated fraction must lie in [0, 1]")
        if not self.support[1] > self.support[0]:
            raise ValueError("foot support interval is empty")
        if len(self.durations) != len(PHASES) or min(self.durations) <= 0:
            raise ValueError(f"need {len(PHASES)} positive phase durations")

    @property
    def weight(self) -> float:
        return self.mass * G

    @property
    def boundaries(self) -> tuple[float, ...]:
        return tuple(np.concatenate([[0.0], np.cumsum(self.durations)]).tolist())

    def instability_band(self, margin: float = 0.1) -> tuple[float, float]:
        heel, toe = self.support
        m = margin * (toe - heel)
        return heel + m, toe - m

    def jittered(self, rng: np.random.Generator, v: float) -> "BodyParams":
        if v <= 0:
            return self
        return replace(
            self,
            mass=self.mass * rng.uniform(1 - v, 1 + v),
            durations=tuple(d * rng.uniform(1 - v, 1 + v) for d in self.durations),
        )

    def to_dict(self) -> dict:
        return {"mass": self.mass, "seated_fraction": self.seated_fraction, "support": list(self.support),
                "durations": list(self.durations), "handle_gain": self.handle_gain,
                "handle_stiffness_x": self.handle_stiffness_x}

    @classmethod
    def from_dict(cls, d) -> "BodyParams":
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


@dataclass(frozen=True)
class Scenario:
    kind: str = "nominal"
    onset: float | None = None
    magnitude: float = 0.12        # m of CoP excursion for perturbations
    noise: float = 0.0             # N standard deviation on force channels
    seed: int = 0
    variability: float = 0.0       # relative subject variability drawn from the seed

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.noise < 0 or self.magnitude < 0 or not 0 <= self.variability < 0.5:
            raise ValueError("noise, magnitude and variability must be nonnegative (variability < 0.5)")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d) -> "Scenario":
        return cls(**d)


def shipped_scenario(kind: str, seed: int = 0) -> Scenario:
    """The preset scenarios, with seeded subject variability."""
    noise = 1.0 if kind == "noisy" else 0.0
    return Scenario(kind=kind, seed=seed, noise=noise, variability=0.05)


@dataclass
class LabeledTrace:
    frames: list[SensorFrame]
    labels: list[str]
    meta: dict = field(default_factory=dict)
    chair: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.frames)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(f, name) for f in self.frames])


def _interp(anchors, bounds, tau):
    return float(np.interp(tau, bounds, anchors))


def _excursion(u: float) -> float:
    """Perturbation envelope in [0, 1] versus time since onset."""
    rise, hold, back = 0.08, 0.15, 0.40
    if u <= 0:
        return 0.0
    if u < rise:
        return minjerk_clamped(u, rise)
    if u < rise + hold:
        return 1.0
    return 1.0 - minjerk_clamped(u - rise - hold, back)


class HumanSim:
    """Frame-by-frame generator; call :meth:`frame` with consecutive indices."""

    ABORT_BACK_DURATION = 1.5

    def __init__(self, params: BodyParams = BodyParams(), scenario: Scenario = Scenario(),
                 hand_path: TrajectorySpec = DEFAULT_HAND_PATH, dt: float = DEFAULT_DT):
        self.rng = np.random.default_rng(scenario.seed)
        self.params = params.jittered(self.rng, scenario.variability)
        self.scenario = scenario
        self.hand_path = hand_path
        self.dt = dt
        p = self.params
        self.bounds = p.boundaries
        b = self.bounds
        if scenario.onset is not None:
            self.onset = scenario.onset
        elif scenario.kind == "abort":
            self.onset = b[3] - 0.1
        elif scenario.kind.startswith("perturb"):
            self.onset = 0.5 * (b[4] + b[5])
        else:
            self.onset = None
        if self.onset is not None and not 0 <= self.onset <= self.duration:
            raise ValueError("perturbation onset outside the trace")
        self._next = 0

    @property
    def duration(self) -> float:
        if self.scenario.kind == "abort":
            return max(self.bounds[-1], (self.onset or 0.0) + self.ABORT_BACK_DURATION + 1.0)
        return self.bounds[-1]

    @property
    def n_frames(self) -> int:
        return int(round(self.duration / self.dt)) + 1

    def body_time(self, t: float) -> float:
        """Position on the nominal timeline; an abort runs it backwards to the seat."""
        if self.scenario.kind != "abort" or t <= self.onset:
            return t
        target = 0.5 * self.bounds[1]
        back = (t - self.onset) / self.ABORT_BACK_DURATION
        return self.onset + (target - self.onset) * min(back, 1.0)

    def phase_at(self, tau: float) -> str:
        i = bisect.bisect_right(self.bounds, tau) - 1
        return PHASES[min(max(i, 0), len(PHASES) - 1)]

    def progress(self, tau: float) -> float:
        b = self.bounds
        return minjerk_clamped(tau - b[2], b[5] - b[2])

    def frame(self, i: int, handle=None) -> tuple[SensorFrame, str, float]:
        if i != self._next:
            raise ValueError("frames must be generated in order")
        self._next += 1
        p, sc, b = self.params, self.scenario, self.bounds
        t = i * self.dt
        tau = self.body_time(t)
        scale = p.mass / 70.0
        mg = p.weight

        prog = self.progress(tau)
        hand = path_point(self.hand_path, prog)
        if handle is None:
            handle = hand
        hx, hy = float(handle[0]), float(handle[1])

        fhy = scale * _interp(_FHY, b, tau)
        fhx = scale * _interp(_FHX, b, tau)
        fgx = scale * _interp(_FGX, b, tau)
        chair = (1.0 - p.seated_fraction) * mg * _interp(_CHAIR_SCALE, b, tau)
        inertia = mg * _interp(_INERTIA, b, tau)
        heel, toe = p.support
        cop = heel + (toe - heel) * _interp(_COP, b, tau)

        # handle coupling
        y0, y1 = self.hand_path.pi[1], self.hand_path.pf[1]
        s_handle = min(max((hy - y0) / (y1 - y0), 0.0), 1.0)
        fhy += p.handle_gain * scale * (s_handle - prog)
        fhx += p.handle_stiffness_x * (hand[0] - hx)

        if sc.kind.startswith("perturb"):
            sign = 1.0 if sc.kind == "perturb_forward" else -1.0
            env = _excursion(t - self.onset)
            cop += sign * sc.magnitude * env
            fhx -= sign * 60.0 * scale * env
            fhy += 20.0 * scale * env
        cop = min(max(cop, heel + 0.005), toe - 0.005)

        fhy = max(fhy, -30.0 * scale)
        fgy = mg - chair - fhy + inertia
        fgy = min(max(fgy, 0.0), 1.5 * mg)

        if sc.noise > 0:
            n = self.rng.normal(0.0, sc.noise, size=5)
            fhx += n[0]
            fhy += n[1]
            fgx += n[2]
            fgy += n[3]
            mgz_noise = 0.05 * n[4]
        else:
            mgz_noise = 0.0
        mgz = -cop * fgy + mgz_noise
        frame = SensorFrame(t=t, Fhx=fhx, Fhy=fhy, Fgx=fgx, Fgy=fgy, Mgz=mgz, hx=hx, hy=hy)
        return frame, self.phase_at(tau), chair


def generate(params: BodyParams = BodyParams(), scenario: Scenario = Scenario(),
             handle_cmd_stream: Iterable | None = None, dt: float = DEFAULT_DT,
             hand_path: TrajectorySpec = DEFAULT_HAND_PATH) -> LabeledTrace:
    """Generate a labelled trace.

    Without a command stream the handle follows the body's own hand path,
    as in a human-assisted recording.  A stream shorter than the trace ends
    it early.
    """
    sim = HumanSim(params, scenario, hand_path=hand_path, dt=dt)
    frames, labels, chair = [], [], []
    cmds = iter(handle_cmd_stream) if handle_cmd_stream is not None else None
    for i in range(sim.n_frames):
        handle = None
        if cmds is not None:
            handle = next(cmds, None)
            if handle is None:
                break
        f, lab, c = sim.frame(i, handle)
        frames.append(f)
        labels.append(lab)
        chair.append(c)
    meta = {"scenario": scenario.to_dict(), "params": sim.params.to_dict(), "onset": sim.onset}
    return LabeledTrace(frames=frames, labels=labels, meta=meta, chair=chair)


def label_phases(trace: LabeledTrace) -> list[str]:
    """Per-sample phase labels from the generator's own timeline."""
    return list(trace.labels)


def data_a_corpus(n: int, seed0: int = 0, params: BodyParams = BodyParams(),
                  variability: float = 0.05) -> list[LabeledTrace]:
    """``n`` human-assisted nominal recordings with seeded subject variability."""
    return [
        generate(params, Scenario(kind="nominal", seed=seed0 + i, noise=0.3, variability=variability))
        for i in range(n)
    ]
