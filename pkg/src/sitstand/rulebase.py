"""Hand-authored rule base and fixed terms of the supervisor.

Force and rate terms here are placeholders: the packaged configuration is
this template calibrated on a synthetic human-assisted corpus.  Regenerate
it with ``python -m sitstand.rulebase``.
"""
from __future__ import annotations

from pathlib import Path

from .fuzzy import (
    PHASE_OUTPUT,
    STABILITY_OUTPUT,
    FuzzyConfig,
    FuzzyRule,
    LinguisticVariable,
    MembershipFunction as MF,
)

CORPUS_SEED = 1000
CORPUS_SIZE = 10


def _placeholder(name, unit, five=True):
    if five:
        terms = (
            MF("EL", "left-shoulder", (-600, -300)),
            MF("L", "triangular", (-600, -300, 0)),
            MF("Z", "triangular", (-300, 0, 300)),
            MF("H", "triangular", (0, 300, 600)),
            MF("EH", "right-shoulder", (300, 600)),
        )
    else:
        terms = (
            MF("L", "left-shoulder", (-100, 0)),
            MF("Z", "triangular", (-100, 0, 100)),
            MF("H", "right-shoulder", (0, 100)),
        )
    return LinguisticVariable(name, unit, (-1000.0, 1000.0), terms)


def cop_position_variable() -> LinguisticVariable:
    # default foot support is [0, 0.25] m; EL/EH sit on the heel/toe boundary
    return LinguisticVariable("cop_x", "m", (-0.0625, 0.3125), (
        MF("EL", "left-shoulder", (0.015, 0.045)),
        MF("L", "triangular", (0.015, 0.05, 0.09)),
        MF("Z", "trapezoidal", (0.05, 0.09, 0.15, 0.19)),
        MF("H", "triangular", (0.15, 0.195, 0.235)),
        MF("EH", "right-shoulder", (0.205, 0.235)),
    ))


def cop_velocity_variable() -> LinguisticVariable:
    return LinguisticVariable("cop_v", "m/s", (-3.0, 3.0), (
        MF("L", "left-shoulder", (-0.5, -0.1)),
        MF("Z", "triangular", (-0.3, 0.0, 0.3)),
        MF("H", "right-shoulder", (0.1, 0.5)),
    ))


def phase_output() -> LinguisticVariable:
    return LinguisticVariable(PHASE_OUTPUT, "", (0.0, 50.0), (
        MF("sitted", "triangular", (-5, 0, 5)),
        MF("pre-acceleration", "triangular", (5, 10, 15)),
        MF("acceleration", "triangular", (15, 20, 25)),
        MF("start-rising", "triangular", (25, 30, 35)),
        MF("rising", "triangular", (35, 40, 45)),
    ))


def stability_output() -> LinguisticVariable:
    return LinguisticVariable(STABILITY_OUTPUT, "", (-20.0, 20.0), (
        MF("unstable_backward", "triangular", (-20, -15, -10)),
        MF("stabilize_backward", "triangular", (-12.5, -7.5, -2.5)),
        MF("adjust_backward", "triangular", (-8, -4, 0)),
        MF("no_move", "triangular", (-4, 0, 4)),
        MF("adjust_forward", "triangular", (0, 4, 8)),
        MF("stabilize_forward", "triangular", (2.5, 7.5, 12.5)),
        MF("unstable_forward", "triangular", (10, 15, 20)),
    ))


def _phase_rules():
    # antecedent terms are overwritten by calibration with each phase's own term
    def rule(name, phase, *variables):
        return FuzzyRule(tuple((v, "Z") for v in variables), (PHASE_OUTPUT, phase), name=name)

    return [
        rule("sitted", "sitted", "Fgy", "Fhy"),
        rule("pre-acceleration", "pre-acceleration", "Fgy", "Fhy"),
        rule("acceleration", "acceleration", "Fgy", "Fhx"),
        rule("start-rising", "start-rising", "Fgy", "Fhy"),
        # the canonical RISING rule: Fgy with Fhx and dFhy
        rule("rising", "rising", "Fgy", "Fhx", "dFhy"),
        rule("rising-settled", "rising", "Fgy", "dFgy"),
    ]


_STABILITY_TABLE = {
    # (cop_x term, cop_v term) -> reaction
    ("EH", "H"): "unstable_forward",
    ("H", "H"): "unstable_forward",
    ("EL", "L"): "unstable_backward",
    ("L", "L"): "unstable_backward",
    ("Z", "Z"): "no_move",
    ("Z", "H"): "adjust_forward",
    ("Z", "L"): "adjust_backward",
    ("H", "Z"): "adjust_forward",
    ("L", "Z"): "adjust_backward",
    ("EH", "Z"): "stabilize_forward",
    ("EL", "Z"): "stabilize_backward",
    # load already shifting back against the fall
    ("H", "L"): "stabilize_forward",
    ("EH", "L"): "stabilize_forward",
    ("L", "H"): "stabilize_backward",
    ("EL", "H"): "stabilize_backward",
}


def _stability_rules():
    return [
        FuzzyRule((("cop_x", px), ("cop_v", pv)), (STABILITY_OUTPUT, out), name=f"cop {px}/{pv}")
        for (px, pv), out in _STABILITY_TABLE.items()
    ]


def template_config() -> FuzzyConfig:
    inputs = {
        "Fhx": _placeholder("Fhx", "N"),
        "Fhy": _placeholder("Fhy", "N"),
        "Fgx": _placeholder("Fgx", "N"),
        "Fgy": _placeholder("Fgy", "N"),
        "dFhy": _placeholder("dFhy", "N/s", five=False),
        "dFgy": _placeholder("dFgy", "N/s", five=False),
        "cop_x": cop_position_variable(),
        "cop_v": cop_velocity_variable(),
    }
    outputs = {PHASE_OUTPUT: phase_output(), STABILITY_OUTPUT: stability_output()}
    return FuzzyConfig(inputs=inputs, outputs=outputs, rules=tuple(_phase_rules() + _stability_rules()))


def build_default() -> FuzzyConfig:
    from .calibration import calibrate
    from .human_sim import data_a_corpus

    return calibrate(data_a_corpus(CORPUS_SIZE, seed0=CORPUS_SEED), base=template_config())


if __name__ == "__main__":
    out = Path(__file__).with_name("data") / "default_fuzzy.json"
    build_default().save(out)
    print(f"wrote {out}")
