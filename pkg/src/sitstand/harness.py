"""Run configuration, the tick loop, calibration driver and plot export."""
from __future__ import annotations

import csv
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .calibration import breakpoint_summary, calibrate
from .controller import ControlMode, GainConfig, Supervisor
from .fuzzy import FuzzyConfig, FuzzyConfigError, default_config
from .human_sim import (
    DEFAULT_HAND_PATH,
    SCENARIO_KINDS,
    BodyParams,
    HumanSim,
    LabeledTrace,
    Scenario,
    data_a_corpus,
    shipped_scenario,
)
from .preprocessing import DEFAULT_CUTOFF_HZ, DEFAULT_FY_MIN, NonMonotoneTime
from .trajectory import TrajectorySpec
from .traces import LogWriter, TraceFormatError, log_row, read_frames, read_log, read_trace, write_trace

LOG_NAME = "log.csv"
REPORT_NAME = "report.json"
CONFIG_VERSION = 1

SUCCESS = "completed"
RETURNED = "returned"
INCOMPLETE = "incomplete"


class ConfigError(ValueError):
    pass


# ---- configuration ---------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    gains: GainConfig = GainConfig()
    trajectory: TrajectorySpec = DEFAULT_HAND_PATH
    fuzzy_path: Path | None = None
    scenario: Scenario | None = None
    trace_path: Path | None = None
    output_dir: Path = Path("out")
    seed: int = 0
    body: BodyParams = BodyParams()
    cutoff_hz: float = DEFAULT_CUTOFF_HZ
    fy_min: float = DEFAULT_FY_MIN

    def __post_init__(self):
        if self.scenario is not None and self.trace_path is not None:
            raise ConfigError("give either a scenario or an input trace, not both")
        if self.scenario is None and self.trace_path is None:
            object.__setattr__(self, "scenario", shipped_scenario("nominal", self.seed))
        for p in (self.fuzzy_path, self.trace_path):
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"file not found: {p}")
        try:
            self.trajectory.validate_endpoints()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def open_loop(self) -> bool:
        return self.trace_path is not None

    def with_seed(self, seed: int) -> "RunConfig":
        sc = replace(self.scenario, seed=seed) if self.scenario is not None else None
        return replace(self, seed=seed, scenario=sc)

    def load_fuzzy(self) -> FuzzyConfig:
        if self.fuzzy_path is None:
            return default_config()
        try:
            return FuzzyConfig.load(self.fuzzy_path)
        except FuzzyConfigError as exc:
            raise ConfigError(f"{self.fuzzy_path}: {exc}") from None

    def to_dict(self) -> dict:
        d = {
            "version": CONFIG_VERSION,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "gains": self.gains.to_dict(),
            "trajectory": self.trajectory.to_dict(),
            "body": self.body.to_dict(),
            "cutoff_hz": self.cutoff_hz,
            "fy_min": self.fy_min,
            "fuzzy": str(self.fuzzy_path) if self.fuzzy_path else None,
        }
        if self.trace_path is not None:
            d["trace"] = str(self.trace_path)
        else:
            d["scenario"] = self.scenario.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path = Path(".")) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("run config must be a JSON object")
        known = {"version", "seed", "output_dir", "gains", "trajectory", "body", "cutoff_hz",
                 "fy_min", "fuzzy", "scenario", "trace"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if d.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {d.get('version')!r}")

        def path(key):
            v = d.get(key)
            if v is None:
                return None
            p = Path(v)
            return p if p.is_absolute() else base_dir / p

        try:
            seed = int(d.get("seed", 0))
            sc = d.get("scenario")
            if isinstance(sc, str):
                scenario = shipped_scenario(sc, seed)
            elif isinstance(sc, dict):
                scenario = Scenario.from_dict({**sc, "seed": seed})
            elif sc is None:
                scenario = None
            else:
                raise ConfigError("scenario must be a kind name or an object")
            return cls(
                gains=GainConfig.from_dict(d.get("gains", {})),
                trajectory=TrajectorySpec.from_dict(d["trajectory"]) if "trajectory" in d else DEFAULT_HAND_PATH,
                fuzzy_path=path("fuzzy"),
                scenario=scenario,
                trace_path=path("trace"),
                output_dir=path("output_dir") or base_dir / "out",
                seed=seed,
                body=BodyParams.from_dict(d["body"]) if "body" in d else BodyParams(),
                cutoff_hz=float(d.get("cutoff_hz", DEFAULT_CUTOFF_HZ)),
                fy_min=float(d.get("fy_min", DEFAULT_FY_MIN)),
            )
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"invalid run config: {exc}") from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(data, base_dir=path.parent)


# ---- reports ---------------------------------------------------------------

@dataclass
class RunReport:
    transitions: list[tuple[float, str, str]]
    peak_abs_Fh: float
    median_abs_Fh: float
    peak_Fhy: float
    stabilization_episodes: int
    status: str
    n_ticks: int
    log_path: str
    extra: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.status == SUCCESS

    @property
    def modes(self) -> list[str]:
        return [ControlMode.ADMITTANCE.value] + [b for _, _, b in self.transitions]

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "transitions": [list(tr) for tr in self.transitions],
            "stabilization_episodes": self.stabilization_episodes,
            "peak_abs_Fh": self.peak_abs_Fh,
            "median_abs_Fh": self.median_abs_Fh,
            "peak_Fhy": self.peak_Fhy,
            "n_ticks": self.n_ticks,
            "log_path": self.log_path,
            **self.extra,
        }


def _status(transitions) -> str:
    if not transitions:
        return INCOMPLETE
    last = transitions[-1]
    if last[2] == ControlMode.DONE.value:
        return SUCCESS
    if (last[1], last[2]) == (ControlMode.RETURN.value, ControlMode.ADMITTANCE.value):
        return RETURNED
    return INCOMPLETE


def _force_stats(fhx: Sequence[float], fhy: Sequence[float]) -> tuple[float, float, float]:
    if not fhx:
        return 0.0, 0.0, 0.0
    mags = [math.hypot(a, b) for a, b in zip(fhx, fhy)]
    return max(mags), statistics.median(mags), max(fhy)


def report_from_log(path) -> RunReport:
    """Rebuild a run report from its Data-B log alone."""
    cols = read_log(path)
    transitions, prev = [], ControlMode.ADMITTANCE.value
    for t, m in zip(cols["t"], cols["mode"]):
        if m != prev:
            transitions.append((t, prev, m))
            prev = m
    peak, med, peak_y = _force_stats(cols["Fhx"], cols["Fhy"])
    episodes = sum(1 for _, _, b in transitions if b == ControlMode.STABILIZATION.value)
    return RunReport(transitions, peak, med, peak_y, episodes, _status(transitions),
                     len(cols["t"]), str(path))


# ---- the tick loop ---------------------------------------------------------

def run(config: RunConfig) -> RunReport:
    """Execute one run, writing ``log.csv`` and ``report.json`` to the output directory."""
    fuzzy = config.load_fuzzy()
    g = config.gains
    sup = Supervisor(fuzzy, g, config.trajectory, cutoff_hz=config.cutoff_hz,
                     fy_min=config.fy_min, support=config.body.support)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / LOG_NAME

    extra: dict = {"mode": "open-loop" if config.open_loop else "closed-loop", "seed": config.seed}
    if config.open_loop:
        frames = read_frames(config.trace_path)
        source = iter(frames)
        n = len(frames)
        extra["input"] = str(config.trace_path)
    else:
        sim = HumanSim(config.body, config.scenario, hand_path=config.trajectory, dt=g.dt)
        n = sim.n_frames
        extra["scenario"] = config.scenario.to_dict()
        extra["onset"] = sim.onset

    fhx, fhy = [], []
    X = sup.X
    with LogWriter(log_path) as log:
        for i in range(n):
            frame = next(source) if config.open_loop else sim.frame(i, X)[0]
            try:
                cmd = sup.step(frame)
            except NonMonotoneTime as exc:
                raise TraceFormatError(f"{extra.get('input', 'input')}: {exc}") from None
            X = cmd.X
            fhx.append(frame.Fhx)
            fhy.append(frame.Fhy)
            log.write(log_row(frame, cmd.features, cmd.nu1_raw, cmd.nu1_used, cmd.nu2, cmd.mode.value, X))
            if sup.finished:
                break

    transitions = [(t, a.value, b.value) for t, a, b in sup.transitions]
    peak, med, peak_y = _force_stats(fhx, fhy)
    extra["final_X"] = list(X)
    if sup.traj is not None:
        extra["rise_start"] = list(sup.traj.spec.pi)
    report = RunReport(transitions, peak, med, peak_y, sup.stabilization_episodes,
                       _status(transitions), len(fhx), str(log_path), extra)
    (out / REPORT_NAME).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report


def replay(path, config: RunConfig | None = None, output_dir=None) -> RunReport:
    """Drive the supervisor open-loop from the sensor columns of a trace or log."""
    config = config or RunConfig()
    cfg = replace(config, scenario=None, trace_path=Path(path),
                  output_dir=Path(output_dir) if output_dir else config.output_dir)
    return run(cfg)


def _run_quiet(config: RunConfig) -> dict:
    r = run(config)
    return {**{k: v for k, v in r.to_dict().items() if k != "transitions"},
            "scenario": config.scenario.kind if config.scenario else "trace", "seed": config.seed,
            "modes": "/".join(r.modes)}


def batch(config: RunConfig, kinds: Sequence[str], seeds: Sequence[int], output_dir,
          jobs: int = 1) -> list[dict]:
    """Run every (scenario, seed) pair into its own subdirectory and summarise."""
    for k in kinds:
        if k not in SCENARIO_KINDS:
            raise ConfigError(f"unknown scenario kind {k!r}")
    out = Path(output_dir)
    configs = [
        replace(config, scenario=shipped_scenario(k, s), trace_path=None, seed=s,
                output_dir=out / k / f"seed_{s:04d}")
        for k in kinds for s in seeds
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_run_quiet, configs))
    else:
        rows = [_run_quiet(c) for c in configs]
    out.mkdir(parents=True, exist_ok=True)
    cols = ["scenario", "seed", "status", "modes", "stabilization_episodes", "peak_Fhy",
            "peak_abs_Fh", "median_abs_Fh", "n_ticks", "log_path"]
    with (out / "batch_summary.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return rows


# ---- corpora and calibration -----------------------------------------------

def write_corpus(out_dir, n: int, seed0: int = 0, params: BodyParams = BodyParams()) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, tr in enumerate(data_a_corpus(n, seed0=seed0, params=params)):
        p = out / f"trace_{seed0 + i:04d}.csv"
        write_trace(p, tr.frames, tr.labels)
        paths.append(p)
    return paths


def load_corpus(corpus_dir) -> list[LabeledTrace]:
    d = Path(corpus_dir)
    if not d.is_dir():
        raise ConfigError(f"corpus directory not found: {d}")
    traces = []
    for p in sorted(d.glob("*.csv")):
        tf = read_trace(p)
        if tf.labels is None:
            raise TraceFormatError(f"{p}: calibration traces need a phase column")
        traces.append(LabeledTrace(tf.frames, tf.labels, {"path": str(p)}))
    return traces


def calibrate_cmd(corpus_dir, out_path, base_path=None, dt: float = GainConfig().dt) -> tuple[FuzzyConfig, str]:
    """Calibrate from a directory of labelled trace CSVs and write the result."""
    base = None
    if base_path is not None:
        try:
            base = FuzzyConfig.load(base_path)
        except (OSError, FuzzyConfigError) as exc:
            raise ConfigError(f"{base_path}: {exc}") from None
    cfg = calibrate(load_corpus(corpus_dir), base=base, dt=dt)
    cfg.save(out_path)
    return cfg, breakpoint_summary(cfg)


# ---- plot export -----------------------------------------------------------

PLOTS = {
    "nu1.csv": ("nu1_raw", "nu1_used"),
    "nu2.csv": ("nu2",),
    "forces.csv": ("Fhx", "Fhy", "Fgx", "Fgy"),
}


def export_plots(log_path, out_dir) -> list[Path]:
    """Write long-format ``t,series,value`` files, one per figure."""
    cols = read_log(log_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, series in PLOTS.items():
        p = out / name
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("t", "series", "value"))
            for s in series:
                for t, v in zip(cols["t"], cols[s]):
                    w.writerow((repr(t), s, repr(v)))
        written.append(p)
    return written
