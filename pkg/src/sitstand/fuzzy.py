"""Two-output Mamdani fuzzy inference used by the sit-to-stand supervisor.

Membership functions are piecewise-linear trapezoids (triangles and shoulders
are special cases).  Inference is min for AND, min-implication, max
aggregation and an exact centroid of the aggregated piecewise-linear shape.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

SCHEMA_VERSION = 1

SHAPES = ("triangular", "trapezoidal", "left-shoulder", "right-shoulder")
_N_BREAKPOINTS = {"triangular": 3, "trapezoidal": 4, "left-shoulder": 2, "right-shoulder": 2}

INPUT_NAMES = ("Fhx", "Fhy", "Fgx", "Fgy", "dFhy", "dFgy", "cop_x", "cop_v")
PHASE_OUTPUT = "phase"
STABILITY_OUTPUT = "stability"

INF = math.inf
CENTROID_DECIMALS = 12


class FuzzyConfigError(ValueError):
    """Raised for an inconsistent or malformed fuzzy configuration."""


@dataclass(frozen=True)
class MembershipFunction:
    label: str
    shape: str
    breakpoints: tuple[float, ...]

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise FuzzyConfigError(f"unknown shape {self.shape!r} for term {self.label!r}")
        bps = tuple(float(b) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        if len(bps) != _N_BREAKPOINTS[self.shape]:
            raise FuzzyConfigError(
                f"{self.shape} term {self.label!r} needs {_N_BREAKPOINTS[self.shape]} breakpoints, got {len(bps)}"
            )
        if not all(math.isfinite(b) for b in bps):
            raise FuzzyConfigError(f"term {self.label!r} has non-finite breakpoints")
        if any(b1 < b0 for b0, b1 in zip(bps, bps[1:])):
            raise FuzzyConfigError(f"term {self.label!r} breakpoints must be nondecreasing: {bps}")

    @cached_property
    def trapezoid(self) -> tuple[float, float, float, float]:
        """The (a, b, c, d) trapezoid; shoulders use infinite outer corners."""
        p = self.breakpoints
        if self.shape == "triangular":
            return (p[0], p[1], p[1], p[2])
        if self.shape == "trapezoidal":
            return (p[0], p[1], p[2], p[3])
        if self.shape == "left-shoulder":
            return (-INF, -INF, p[0], p[1])
        return (p[0], p[1], INF, INF)

    @property
    def core(self) -> tuple[float, float]:
        _, b, c, _ = self.trapezoid
        return (b, c)

    @property
    def support(self) -> tuple[float, float]:
        a, _, _, d = self.trapezoid
        return (a, d)

    def __call__(self, x: float) -> float:
        return _trap(self.trapezoid, x)

    def to_dict(self) -> dict:
        return {"label": self.label, "shape": self.shape, "breakpoints": list(self.breakpoints)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "MembershipFunction":
        return cls(label=d["label"], shape=d["shape"], breakpoints=tuple(d["breakpoints"]))


def _trap(abcd, x):
    a, b, c, d = abcd
    if b <= x <= c:
        return 1.0
    if x < b:
        if x <= a:
            return 0.0
        return (x - a) / (b - a)
    if x >= d:
        return 0.0
    return (d - x) / (d - c)


def membership(mf: MembershipFunction, x: float) -> float:
    """Degree of membership of ``x`` in ``mf``, always in [0, 1]."""
    return _trap(mf.trapezoid, x)


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    unit: str
    universe: tuple[float, float]
    terms: tuple[MembershipFunction, ...]

    def __post_init__(self):
        lo, hi = (float(u) for u in self.universe)
        object.__setattr__(self, "universe", (lo, hi))
        object.__setattr__(self, "terms", tuple(self.terms))
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise FuzzyConfigError(f"variable {self.name!r}: bad universe {self.universe}")
        if not self.terms:
            raise FuzzyConfigError(f"variable {self.name!r} has no terms")
        labels = [t.label for t in self.terms]
        if len(set(labels)) != len(labels):
            raise FuzzyConfigError(f"variable {self.name!r} has duplicate term labels")
        cores = [t.core for t in self.terms]
        for (b0, c0), (b1, c1) in zip(cores, cores[1:]):
            if b1 < b0 or c1 < c0:
                raise FuzzyConfigError(f"variable {self.name!r}: term cores are not ordered along the universe")

    def term(self, label: str) -> MembershipFunction:
        for t in self.terms:
            if t.label == label:
                return t
        raise KeyError(f"{self.name}: no term {label!r}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.terms)

    def clamp(self, x: float) -> float:
        lo, hi = self.universe
        return min(max(x, lo), hi)

    def fuzzify(self, x: float) -> dict[str, float]:
        x = self.clamp(x)
        return {t.label: _trap(t.trapezoid, x) for t in self.terms}

    def coverage_gaps(self) -> list[float]:
        """Points of the universe where no term has positive membership.

        Membership is piecewise linear, so checking every breakpoint and the
        midpoints between consecutive breakpoints is exhaustive.
        """
        lo, hi = self.universe
        pts = {lo, hi}
        for t in self.terms:
            pts.update(b for b in t.breakpoints if lo < b < hi)
        pts = sorted(pts)
        probe = pts + [(p0 + p1) / 2 for p0, p1 in zip(pts, pts[1:])]
        return sorted(x for x in probe if max(_trap(t.trapezoid, x) for t in self.terms) <= 0.0)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "unit": self.unit,
            "universe": list(self.universe),
            "terms": [t.to_dict() for t in self.terms],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "LinguisticVariable":
        return cls(
            name=d["name"],
            unit=d.get("unit", ""),
            universe=tuple(d["universe"]),
            terms=tuple(MembershipFunction.from_dict(t) for t in d["terms"]),
        )


@dataclass(frozen=True)
class FuzzyRule:
    antecedents: tuple[tuple[str, str], ...]
    consequent: tuple[str, str]
    weight: float = 1.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "antecedents", tuple(tuple(a) for a in self.antecedents))
        object.__setattr__(self, "consequent", tuple(self.consequent))
        if not self.antecedents:
            raise FuzzyConfigError(f"rule {self.name!r} has no antecedents")
        if not (0.0 < self.weight <= 1.0):
            raise FuzzyConfigError(f"rule {self.name!r}: weight must lie in (0, 1]")

    def to_dict(self) -> dict:
        d = {
            "if": [list(a) for a in self.antecedents],
            "then": list(self.consequent),
            "weight": self.weight,
        }
        if self.name:
            d["name"] = self.name
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "FuzzyRule":
        return cls(
            antecedents=tuple(tuple(a) for a in d["if"]),
            consequent=tuple(d["then"]),
            weight=float(d.get("weight", 1.0)),
            name=d.get("name", ""),
        )


@dataclass(frozen=True)
class FuzzyOutputs:
    nu1: float
    nu2: float
    nu1_fired: bool = True
    nu2_fired: bool = True
    activations: Mapping[str, Mapping[str, float]] = field(default_factory=dict, compare=False)

    def dominant_phase(self) -> str | None:
        """Phase term with the strongest aggregated activation, or None."""
        acts = self.activations.get(PHASE_OUTPUT, {})
        best, best_w = None, 0.0
        for label, w in acts.items():
            if w > best_w:
                best, best_w = label, w
        return best


@dataclass(frozen=True)
class FuzzyConfig:
    inputs: Mapping[str, LinguisticVariable]
    outputs: Mapping[str, LinguisticVariable]
    rules: tuple[FuzzyRule, ...]
    defuzzification: str = "centroid"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "inputs", dict(self.inputs))
        object.__setattr__(self, "outputs", dict(self.outputs))
        object.__setattr__(self, "rules", tuple(self.rules))
        self.validate()

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise FuzzyConfigError(f"unsupported schema version {self.schema_version}")
        if self.defuzzification != "centroid":
            raise FuzzyConfigError(f"unsupported defuzzification {self.defuzzification!r}")
        if set(self.outputs) != {PHASE_OUTPUT, STABILITY_OUTPUT}:
            raise FuzzyConfigError(f"outputs must be {PHASE_OUTPUT!r} and {STABILITY_OUTPUT!r}")
        if not self.rules:
            raise FuzzyConfigError("rule base is empty")
        for name, var in self.inputs.items():
            if name != var.name:
                raise FuzzyConfigError(f"input key {name!r} does not match variable name {var.name!r}")
            gaps = var.coverage_gaps()
            if gaps:
                raise FuzzyConfigError(f"input {name!r} is not covered at x={gaps[0]!r}")
        for rule in self.rules:
            for var, term in rule.antecedents:
                if var not in self.inputs:
                    raise FuzzyConfigError(f"rule {rule.name!r}: unknown input {var!r}")
                if term not in self.inputs[var].labels:
                    raise FuzzyConfigError(f"rule {rule.name!r}: unknown term {var}={term}")
            out, term = rule.consequent
            if out not in self.outputs:
                raise FuzzyConfigError(f"rule {rule.name!r}: unknown output {out!r}")
            if term not in self.outputs[out].labels:
                raise FuzzyConfigError(f"rule {rule.name!r}: unknown term {out}={term}")

    @cached_property
    def _compiled(self):
        # (input name, term label) pairs actually referenced, and per-rule index lists
        used = sorted({a for r in self.rules for a in r.antecedents})
        index = {a: i for i, a in enumerate(used)}
        traps = [self.inputs[v].term(t).trapezoid for v, t in used]
        rules = [
            (tuple(index[a] for a in r.antecedents), r.consequent[0], r.consequent[1], r.weight)
            for r in self.rules
        ]
        return used, traps, rules

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "defuzzification": self.defuzzification,
            "inputs": [v.to_dict() for v in self.inputs.values()],
            "outputs": [v.to_dict() for v in self.outputs.values()],
            "rules": [r.to_dict() for r in self.rules],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FuzzyConfig":
        try:
            return cls(
                inputs={v["name"]: LinguisticVariable.from_dict(v) for v in d["inputs"]},
                outputs={v["name"]: LinguisticVariable.from_dict(v) for v in d["outputs"]},
                rules=tuple(FuzzyRule.from_dict(r) for r in d["rules"]),
                defuzzification=d.get("defuzzification", "centroid"),
                schema_version=int(d.get("schema_version", -1)),
            )
        except (KeyError, TypeError) as exc:
            raise FuzzyConfigError(f"malformed fuzzy config: {exc!r}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def loads(cls, text: str) -> "FuzzyConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FuzzyConfigError(f"fuzzy config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "FuzzyConfig":
        return cls.loads(Path(path).read_text())


def default_config() -> FuzzyConfig:
    """The packaged supervisor configuration."""
    text = resources.files("sitstand").joinpath("data/default_fuzzy.json").read_text()
    return FuzzyConfig.loads(text)


def term_centroid(var: LinguisticVariable, label: str) -> float:
    """Centroid of a single fully-active term over the variable's universe."""
    area, moment = _integrate([(var.term(label).trapezoid, 1.0)], *var.universe)
    return moment / area


def _line_at(x0, x1, y0, y1, level):
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def _integrate(clipped, lo, hi):
    """Area and first moment of max_i min(w_i, mu_i(y)) over [lo, hi].

    The aggregate is piecewise linear; its kinks are among the term
    breakpoints, the points where an edge meets a clip level, and pairwise
    edge crossings.  Between consecutive kinks the aggregate is linear, so
    one interior sample and its slope give the exact area and moment.
    """
    pts = {lo, hi}
    edges = []
    levels = [w for _, w in clipped]
    for (a, b, c, d), _ in clipped:
        for p in (a, b, c, d):
            if lo < p < hi:
                pts.add(p)
        if a < b and math.isfinite(a):
            edges.append((a, b, 0.0, 1.0))
        if c < d and math.isfinite(d):
            edges.append((c, d, 1.0, 0.0))
    for x0, x1, y0, y1 in edges:
        for lv in levels:
            x = _line_at(x0, x1, y0, y1, lv)
            if lo < x < hi:
                pts.add(x)
    for i, (x0, x1, y0, y1) in enumerate(edges):
        s0 = (y1 - y0) / (x1 - x0)
        for u0, u1, v0, v1 in edges[i + 1:]:
            s1 = (v1 - v0) / (u1 - u0)
            if s0 == s1:
                continue
            # y0 + s0 (x - x0) = v0 + s1 (x - u0)
            x = (v0 - y0 + s0 * x0 - s1 * u0) / (s0 - s1)
            if lo < x < hi and max(x0, u0) <= x <= min(x1, u1):
                pts.add(x)
    xs = sorted(pts)

    def agg(x):
        return max(min(w, _trap(abcd, x)) for abcd, w in clipped)

    # sample strictly inside each interval: vertical edges make the
    # aggregate jump at a breakpoint, but it is linear in between
    area = moment = 0.0
    for x0, x1 in zip(xs, xs[1:]):
        h = x1 - x0
        xm = 0.5 * (x0 + x1)
        fl, fm, fr = agg(xm - 0.25 * h), agg(xm), agg(xm + 0.25 * h)
        slope = (fr - fl) / (0.5 * h)
        area += h * fm
        moment += h * fm * xm + slope * h ** 3 / 12.0
    return area, moment


def _defuzzify(var: LinguisticVariable, acts: Mapping[str, float]):
    clipped = [(var.term(label).trapezoid, w) for label, w in acts.items() if w > 0.0]
    if not clipped:
        return None
    area, moment = _integrate(clipped, *var.universe)
    if area <= 0.0:
        return None
    # summation order leaves ~1e-15 jitter on equal shapes; snap it away
    return round(moment / area, CENTROID_DECIMALS)


def rule_activations(cfg: FuzzyConfig, values: Mapping[str, float]) -> dict[str, dict[str, float]]:
    """Per-output, per-term activation after max aggregation of rule strengths."""
    used, traps, rules = cfg._compiled
    mu = [_trap(abcd, cfg.inputs[v].clamp(values[v])) for (v, _), abcd in zip(used, traps)]
    acts: dict[str, dict[str, float]] = {name: {} for name in cfg.outputs}
    for idxs, out, term, weight in rules:
        w = weight * min(mu[i] for i in idxs)
        slot = acts[out]
        if w > slot.get(term, 0.0):
            slot[term] = w
    return acts


def infer(cfg: FuzzyConfig, features, prev_nu1: float = 0.0) -> FuzzyOutputs:
    """Evaluate both supervisor outputs for one feature vector.

    ``features`` is a mapping of input name to value or any object with an
    ``inputs()`` method returning one.  When no phase rule fires the phase
    output holds ``prev_nu1``; when no stability rule fires it is 0.  Both
    cases are flagged on the result.
    """
    values = features if isinstance(features, Mapping) else features.inputs()
    for name in cfg.inputs:
        if not math.isfinite(values[name]):
            raise ValueError(f"feature {name} is not finite: {values[name]!r}")
    acts = rule_activations(cfg, values)
    nu1 = _defuzzify(cfg.outputs[PHASE_OUTPUT], acts[PHASE_OUTPUT])
    nu2 = _defuzzify(cfg.outputs[STABILITY_OUTPUT], acts[STABILITY_OUTPUT])
    return FuzzyOutputs(
        nu1=prev_nu1 if nu1 is None else nu1,
        nu2=0.0 if nu2 is None else nu2,
        nu1_fired=nu1 is not None,
        nu2_fired=nu2 is not None,
        activations=acts,
    )


def dominant_labels(cfg: FuzzyConfig, rows: Iterable[Mapping[str, float]]) -> list[str | None]:
    return [infer(cfg, r).dominant_phase() for r in rows]
