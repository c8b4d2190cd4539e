"""Fit supervisor membership functions from phase-labelled recordings.

Each force input gets one term per phase.  Terms are named EL..EH by the rank
of the phase median, peak at that median and reach out to the 10th/90th
percentiles, or further to the neighbouring medians so the variable stays
covered.  Rate inputs get three terms (L, Z, H) scaled by the pooled 90th
percentile of their magnitude.  Stability inputs and all output terms are
left as they are in the base configuration.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .fuzzy import (
    PHASE_OUTPUT,
    FuzzyConfig,
    FuzzyRule,
    LinguisticVariable,
    MembershipFunction,
    default_config,
    infer,
)
from .preprocessing import DEFAULT_CUTOFF_HZ, DEFAULT_DT, DEFAULT_FY_MIN, Preprocessor

log = logging.getLogger(__name__)

PHASES = ("sitted", "pre-acceleration", "acceleration", "start-rising", "rising")
# the generator also labels a final standing interval; the supervisor folds it into rising
LABEL_ALIASES = {"standing": "rising"}

FORCE_INPUTS = ("Fhx", "Fhy", "Fgx", "Fgy")
RATE_INPUTS = ("dFhy", "dFgy")
FIVE_TERMS = ("EL", "L", "Z", "H", "EH")
THREE_TERMS = ("L", "Z", "H")
UNITS = {"Fhx": "N", "Fhy": "N", "Fgx": "N", "Fgy": "N", "dFhy": "N/s", "dFgy": "N/s"}

MIN_SAMPLES = 10
# feet reach this fraction of the 10-90 spread beyond the outer percentiles
FOOT_SPREAD = 0.5


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class PhaseStats:
    p10: float
    p50: float
    p90: float
    n: int


def canonical_phase(label: str) -> str:
    return LABEL_ALIASES.get(label, label)


def _pct(x, q):
    # the empirical-CDF percentile is unchanged when the sample is duplicated
    return float(np.percentile(x, q, method="inverted_cdf"))


def trace_features(trace, dt=DEFAULT_DT, cutoff_hz=DEFAULT_CUTOFF_HZ, fy_min=DEFAULT_FY_MIN):
    pre = Preprocessor(dt=dt, cutoff_hz=cutoff_hz, fy_min=fy_min)
    return [pre.derive(f).inputs() for f in trace.frames]


def phase_populations(traces, **kw) -> dict[str, dict[str, list[float]]]:
    pops: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for tr in traces:
        for feats, label in zip(trace_features(tr, **kw), tr.labels):
            phase = canonical_phase(label)
            for name, v in feats.items():
                pops[name][phase].append(v)
    return pops


def _five_term_variable(name: str, stats: dict[str, PhaseStats], pooled: np.ndarray):
    order = sorted(PHASES, key=lambda ph: (stats[ph].p50, PHASES.index(ph)))
    n = len(order)
    med = [stats[ph].p50 for ph in order]
    left, right = [], []
    for r, ph in enumerate(order):
        st = stats[ph]
        spread = FOOT_SPREAD * (st.p90 - st.p10)
        left.append(st.p10 - spread if r == 0 else max(st.p10 - spread, med[r - 1]))
        right.append(st.p90 + spread if r == n - 1 else min(st.p90 + spread, med[r + 1]))
    for r in range(n - 1):
        if right[r] <= left[r + 1]:
            # separated neighbours would leave a gap: let them meet at the medians
            right[r], left[r + 1] = med[r + 1], med[r]
    terms, label_of = [], {}
    for r, ph in enumerate(order):
        st = stats[ph]
        a, d = left[r], right[r]
        label = FIVE_TERMS[r]
        label_of[ph] = label
        if r == 0:
            mf = MembershipFunction(label, "left-shoulder", (st.p50, d))
        elif r == n - 1:
            mf = MembershipFunction(label, "right-shoulder", (a, st.p50))
        else:
            mf = MembershipFunction(label, "triangular", (a, st.p50, d))
        terms.append(mf)
    lo, hi = float(pooled.min()), float(pooled.max())
    pad = 0.1 * (hi - lo) if hi > lo else 1.0
    var = LinguisticVariable(name, UNITS[name], (lo - pad, hi + pad), tuple(terms))
    return var, label_of


def _three_term_variable(name: str, stats: dict[str, PhaseStats], pooled: np.ndarray):
    w = _pct(np.abs(pooled), 90)
    if w <= 0:
        w = 1.0
    terms = (
        MembershipFunction("L", "left-shoulder", (-w, 0.0)),
        MembershipFunction("Z", "triangular", (-w, 0.0, w)),
        MembershipFunction("H", "right-shoulder", (0.0, w)),
    )
    lo = min(float(pooled.min()), -w)
    hi = max(float(pooled.max()), w)
    pad = 0.1 * (hi - lo)
    var = LinguisticVariable(name, UNITS[name], (lo - pad, hi + pad), terms)
    label_of = {}
    for ph in PHASES:
        mus = [t(stats[ph].p50) for t in terms]
        label_of[ph] = THREE_TERMS[int(np.argmax(mus))]
    return var, label_of


def calibrate(traces: Sequence, base: FuzzyConfig | None = None, *, dt=DEFAULT_DT,
              cutoff_hz=DEFAULT_CUTOFF_HZ, fy_min=DEFAULT_FY_MIN,
              min_samples: int = MIN_SAMPLES) -> FuzzyConfig:
    """Return ``base`` with force and rate terms refitted to ``traces``.

    Phase-rule antecedents on refitted inputs are relabelled to the term
    fitted for the rule's own phase.  Raises InsufficientData when a phase
    has fewer than ``min_samples`` samples across the corpus.
    """
    traces = list(traces)
    if not traces:
        raise InsufficientData("no traces supplied")
    base = base or default_config()
    pops = phase_populations(traces, dt=dt, cutoff_hz=cutoff_hz, fy_min=fy_min)
    for ph in PHASES:
        n = len(pops["Fgy"].get(ph, []))
        if n < min_samples:
            raise InsufficientData(f"phase {ph!r} has {n} samples (< {min_samples})")

    inputs = dict(base.inputs)
    relabel: dict[str, dict[str, str]] = {}
    for name in FORCE_INPUTS + RATE_INPUTS:
        stats = {}
        for ph in PHASES:
            x = np.asarray(pops[name][ph])
            stats[ph] = PhaseStats(_pct(x, 10), _pct(x, 50), _pct(x, 90), len(x))
        pooled = np.concatenate([np.asarray(pops[name][ph]) for ph in PHASES])
        build = _five_term_variable if name in FORCE_INPUTS else _three_term_variable
        var, label_of = build(name, stats, pooled)
        inputs[name] = var
        relabel[name] = label_of
        log.info("calibrated %s: %s", name, ", ".join(f"{ph}->{lab}" for ph, lab in label_of.items()))

    rules = []
    for r in base.rules:
        out, phase = r.consequent
        if out == PHASE_OUTPUT and phase in PHASES:
            ants = tuple((v, relabel[v][phase] if v in relabel else t) for v, t in r.antecedents)
            r = FuzzyRule(ants, r.consequent, r.weight, r.name)
        rules.append(r)
    return FuzzyConfig(inputs=inputs, outputs=base.outputs, rules=tuple(rules),
                       defuzzification=base.defuzzification)


def breakpoint_summary(cfg: FuzzyConfig) -> str:
    lines = []
    for name in FORCE_INPUTS + RATE_INPUTS:
        var = cfg.inputs[name]
        parts = [f"{t.label}[{', '.join(f'{b:.4g}' for b in t.breakpoints)}]" for t in var.terms]
        lines.append(f"{name} ({var.unit}): " + " ".join(parts))
    return "\n".join(lines)


def phase_accuracy(cfg: FuzzyConfig, traces: Iterable, **kw) -> float:
    """Fraction of samples whose dominant phase term matches the label."""
    hits = total = 0
    for tr in traces:
        prev = 0.0
        for feats, label in zip(trace_features(tr, **kw), tr.labels):
            out = infer(cfg, feats, prev_nu1=prev)
            prev = out.nu1
            hits += out.dominant_phase() == canonical_phase(label)
            total += 1
    return hits / total if total else 0.0
