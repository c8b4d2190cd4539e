"""Sensor preprocessing: low-pass filtering, CoP, derivatives and the nu1 running max."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, fields

DEFAULT_DT = 0.01
DEFAULT_CUTOFF_HZ = 10.0
DEFAULT_FY_MIN = 20.0
DEFAULT_SUPPORT = (0.0, 0.25)

TRACE_COLUMNS = ("t", "Fhx", "Fhy", "Fgx", "Fgy", "Mgz", "hx", "hy")


class LowVerticalForce(ValueError):
    """Vertical ground force too small for a meaningful centre of pressure."""


class NonMonotoneTime(ValueError):
    """Frame timestamps are not strictly increasing at the control period."""


@dataclass(frozen=True)
class SensorFrame:
    t: float
    Fhx: float
    Fhy: float
    Fgx: float
    Fgy: float
    Mgz: float
    hx: float = 0.0
    hy: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, float(getattr(self, f.name)))
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"SensorFrame.{f.name} is not finite")

    def as_row(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in TRACE_COLUMNS)


@dataclass(frozen=True)
class PosturalFeatures:
    Fhx: float
    Fhy: float
    Fgx: float
    Fgy: float
    dFhy: float
    dFgy: float
    cop_x: float
    cop_v: float
    cop_valid: bool = True
    cop_clamped: bool = False

    def inputs(self) -> dict[str, float]:
        return {
            "Fhx": self.Fhx,
            "Fhy": self.Fhy,
            "Fgx": self.Fgx,
            "Fgy": self.Fgy,
            "dFhy": self.dFhy,
            "dFgy": self.dFgy,
            "cop_x": self.cop_x,
            "cop_v": self.cop_v,
        }


def cop_bounds(support=DEFAULT_SUPPORT, extension=0.5) -> tuple[float, float]:
    """Support interval grown by ``extension`` of its length, split evenly."""
    heel, toe = support
    pad = 0.5 * extension * (toe - heel)
    return heel - pad, toe + pad


def compute_cop(frame: SensorFrame, fy_min: float = DEFAULT_FY_MIN, bounds=None) -> float:
    """Sagittal centre of pressure, x = -Mgz / Fgy.

    Raises LowVerticalForce when |Fgy| <= fy_min (feet unloaded).  With
    ``bounds`` the result is clamped to that interval.
    """
    if abs(frame.Fgy) <= fy_min:
        raise LowVerticalForce(f"|Fgy|={abs(frame.Fgy):.3f} N <= {fy_min} N")
    x = -frame.Mgz / frame.Fgy
    if bounds is not None:
        x = min(max(x, bounds[0]), bounds[1])
    return x


def lowpass_alpha(dt: float, cutoff_hz: float) -> float:
    # step-invariant discretisation of 1/(tau s + 1)
    tau = 1.0 / (2.0 * math.pi * cutoff_hz)
    return 1.0 - math.exp(-dt / tau)


class Preprocessor:
    """Stateful causal feature pipeline, one instance per control loop."""

    _FILTERED = ("Fhx", "Fhy", "Fgx", "Fgy", "Mgz")

    def __init__(
        self,
        dt: float = DEFAULT_DT,
        cutoff_hz: float = DEFAULT_CUTOFF_HZ,
        fy_min: float = DEFAULT_FY_MIN,
        support=DEFAULT_SUPPORT,
    ):
        if dt <= 0 or cutoff_hz <= 0:
            raise ValueError("dt and cutoff must be positive")
        self.dt = dt
        self.cutoff_hz = cutoff_hz
        self.fy_min = fy_min
        self.bounds = cop_bounds(support)
        self.alpha = lowpass_alpha(dt, cutoff_hz)
        self.reset()

    def reset(self):
        self._t = None
        self._y = None
        self._prev = None

    def derive(self, frame: SensorFrame) -> PosturalFeatures:
        if self._t is not None:
            step = frame.t - self._t
            if step <= 0:
                raise NonMonotoneTime(f"t={frame.t!r} does not follow t={self._t!r}")
            if abs(step - self.dt) > 1e-6:
                raise NonMonotoneTime(f"frame spacing {step!r} s differs from control period {self.dt!r} s")
        raw = {k: getattr(frame, k) for k in self._FILTERED}
        if self._y is None:
            y = dict(raw)
        else:
            a = self.alpha
            y = {k: self._y[k] + a * (raw[k] - self._y[k]) for k in self._FILTERED}

        prev = self._prev
        valid, clamped = True, False
        try:
            x_raw = compute_cop(SensorFrame(frame.t, **y), self.fy_min)
            x = min(max(x_raw, self.bounds[0]), self.bounds[1])
            clamped = x != x_raw
        except LowVerticalForce:
            # hold the last valid CoP while the feet are unloaded
            valid = False
            x = prev.cop_x if prev is not None else 0.5 * sum(self.bounds)

        if prev is None:
            dFhy = dFgy = cop_v = 0.0
        else:
            dFhy = (y["Fhy"] - prev.Fhy) / self.dt
            dFgy = (y["Fgy"] - prev.Fgy) / self.dt
            cop_v = (x - prev.cop_x) / self.dt if valid else 0.0

        feats = PosturalFeatures(
            Fhx=y["Fhx"], Fhy=y["Fhy"], Fgx=y["Fgx"], Fgy=y["Fgy"],
            dFhy=dFhy, dFgy=dFgy, cop_x=x, cop_v=cop_v,
            cop_valid=valid, cop_clamped=clamped,
        )
        self._t = frame.t
        self._y = y
        self._prev = feats
        return feats


class RunningMaxFilter:
    """Max over the last ``window`` pushed values (the current one included)."""

    def __init__(self, window: int = 10):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self._buf: deque[float] = deque(maxlen=window)

    def push(self, value: float) -> float:
        self._buf.append(value)
        return max(self._buf)

    def reset(self):
        self._buf.clear()

    def __len__(self):
        return len(self._buf)


def filter_nu1(f: RunningMaxFilter, nu1_raw: float) -> float:
    return f.push(nu1_raw)
