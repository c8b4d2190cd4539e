import json
import math
from dataclasses import replace
from pathlib import Path

import pytest

from sitstand.calibration import InsufficientData, calibrate
from sitstand.fuzzy import FuzzyConfig
from sitstand.harness import (
    ConfigError,
    RunConfig,
    batch,
    calibrate_cmd,
    export_plots,
    load_corpus,
    replay,
    report_from_log,
    run,
    write_corpus,
)
from sitstand.human_sim import SCENARIO_KINDS, shipped_scenario
from sitstand.traces import LogWriter, TraceFormatError, read_log

REPO = Path(__file__).resolve().parents[1]


def cfg_for(kind, tmp_path, seed=0):
    return RunConfig(scenario=shipped_scenario(kind, seed), seed=seed, output_dir=tmp_path / kind)


@pytest.fixture(scope="module")
def nominal(tmp_path_factory):
    out = tmp_path_factory.mktemp("nominal")
    return run(RunConfig(output_dir=out))


def read_plot(path):
    rows = path.read_text().splitlines()
    assert rows[0] == "t,series,value"
    series = {}
    for r in rows[1:]:
        t, s, v = r.split(",")
        series.setdefault(s, []).append((float(t), float(v)))
    return series


def test_nominal_run_succeeds(nominal):
    assert nominal.success
    assert nominal.modes == ["Admittance", "Normal", "Done"]
    assert nominal.stabilization_episodes == 0
    assert Path(nominal.log_path).is_file()
    on_disk = json.loads((Path(nominal.log_path).parent / "report.json").read_text())
    assert on_disk["status"] == "completed"


def test_forward_perturbation_run(tmp_path):
    r = run(cfg_for("perturb_forward", tmp_path))
    assert r.success
    assert r.stabilization_episodes >= 1


@pytest.mark.parametrize("kind", SCENARIO_KINDS)
def test_report_recomputable_from_log(tmp_path, kind):
    r = run(cfg_for(kind, tmp_path, seed=3))
    again = report_from_log(r.log_path)
    assert again.transitions == r.transitions
    assert again.status == r.status
    assert again.stabilization_episodes == r.stabilization_episodes
    assert again.n_ticks == r.n_ticks
    for f in ("peak_abs_Fh", "median_abs_Fh", "peak_Fhy"):
        assert math.isclose(getattr(again, f), getattr(r, f), rel_tol=1e-12)


def test_abort_run_is_not_success(tmp_path):
    r = run(cfg_for("abort", tmp_path))
    assert r.status == "returned"
    assert not r.success
    assert r.extra["final_X"] == r.extra["rise_start"]


def test_replay_reproduces_supervisor_columns(tmp_path, nominal):
    r = replay(nominal.log_path, RunConfig(), output_dir=tmp_path / "replay")
    a, b = read_log(nominal.log_path), read_log(r.log_path)
    for col in ("nu1_raw", "nu1_used", "nu2", "mode"):
        assert a[col] == b[col]
    assert r.extra["mode"] == "open-loop"


def test_same_seed_same_bytes(tmp_path):
    a = run(cfg_for("noisy", tmp_path / "a", seed=9))
    b = run(cfg_for("noisy", tmp_path / "b", seed=9))
    assert Path(a.log_path).read_bytes() == Path(b.log_path).read_bytes()


def test_export_plots_from_nominal(tmp_path, nominal):
    files = export_plots(nominal.log_path, tmp_path)
    assert [f.name for f in files] == ["nu1.csv", "nu2.csv", "forces.csv"]
    s = read_plot(tmp_path / "nu1.csv")
    raw, used = [v for _, v in s["nu1_raw"]], [v for _, v in s["nu1_used"]]
    assert all(u >= r for u, r in zip(used, raw))
    assert all(b >= a for a, b in zip(used, used[1:]))
    assert set(read_plot(tmp_path / "forces.csv")) == {"Fhx", "Fhy", "Fgx", "Fgy"}


def test_export_plots_from_empty_log(tmp_path):
    log = tmp_path / "log.csv"
    LogWriter(log).close()
    for f in export_plots(log, tmp_path / "plots"):
        assert f.read_text() == "t,series,value\n"


def test_export_rejects_trace_file(tmp_path):
    bad = tmp_path / "x.csv"
    bad.write_text("# something else\n")
    with pytest.raises(TraceFormatError):
        export_plots(bad, tmp_path)


def test_batch_uses_disjoint_directories(tmp_path):
    rows = batch(RunConfig(), ["nominal", "abort"], [0, 1], tmp_path, jobs=2)
    paths = {r["log_path"] for r in rows}
    assert len(paths) == 4
    assert {r["status"] for r in rows if r["scenario"] == "nominal"} == {"completed"}
    assert (tmp_path / "batch_summary.csv").read_text().count("\n") == 5


# -- configuration -----------------------------------------------------------

def test_shipped_configs_load():
    for p in (REPO / "configs").glob("*.json"):
        cfg = RunConfig.load(p)
        assert cfg.scenario is not None


def test_config_round_trip(tmp_path):
    cfg = RunConfig(scenario=shipped_scenario("abort", 4), seed=4, output_dir=tmp_path)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert RunConfig.load(p) == cfg


@pytest.mark.parametrize("data,match", [
    ({"bogus": 1}, "unknown config keys"),
    ({"version": 2}, "version"),
    ({"gains": {"k": [0, 0]}}, "gains k"),
    ({"scenario": "sideways"}, "unknown scenario"),
    ({"fuzzy": "missing.json"}, "file not found"),
    ({"trace": "x.csv", "scenario": "nominal"}, "not both"),
    ({"trajectory": {"pi": [0, 0], "pf": [0, 0], "duration": 1}}, "coincide"),
])
def test_config_errors(tmp_path, data, match):
    (tmp_path / "x.csv").write_text("")
    p = tmp_path / "c.json"
    p.write_text(json.dumps(data))
    with pytest.raises(ConfigError, match=match):
        RunConfig.load(p)


def test_config_bad_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        RunConfig.load(p)


def test_seed_override_reaches_scenario():
    cfg = RunConfig().with_seed(17)
    assert cfg.seed == 17 and cfg.scenario.seed == 17


# -- calibration driver -----------------------------------------------------------

def test_calibrate_cmd_matches_library(tmp_path):
    write_corpus(tmp_path / "corpus", 3, seed0=70)
    cfg, summary = calibrate_cmd(tmp_path / "corpus", tmp_path / "fz.json")
    assert FuzzyConfig.load(tmp_path / "fz.json") == cfg
    assert cfg == calibrate(load_corpus(tmp_path / "corpus"))
    assert "Fgy (N)" in summary


def test_calibrated_config_drives_a_run(tmp_path):
    write_corpus(tmp_path / "corpus", 3, seed0=70)
    calibrate_cmd(tmp_path / "corpus", tmp_path / "fz.json")
    r = run(RunConfig(fuzzy_path=tmp_path / "fz.json", output_dir=tmp_path / "run"))
    assert r.n_ticks > 0


def test_calibrate_cmd_insufficient(tmp_path):
    paths = write_corpus(tmp_path / "corpus", 1, seed0=1)
    text = paths[0].read_text().splitlines()
    paths[0].write_text("\n".join(text[:60]) + "\n")
    with pytest.raises(InsufficientData):
        calibrate_cmd(tmp_path / "corpus", tmp_path / "fz.json")


def test_calibrate_cmd_needs_labels(tmp_path):
    from sitstand.traces import write_trace
    from sitstand.human_sim import generate
    (tmp_path / "c").mkdir()
    write_trace(tmp_path / "c" / "t.csv", generate().frames)
    with pytest.raises(TraceFormatError, match="phase column"):
        calibrate_cmd(tmp_path / "c", tmp_path / "fz.json")


def test_open_loop_rejects_irregular_time(tmp_path):
    from sitstand.traces import TRACE_MAGIC
    p = tmp_path / "t.csv"
    p.write_text(TRACE_MAGIC + "\nt,Fhx,Fhy,Fgx,Fgy,Mgz,hx,hy\n0,0,0,0,700,-70,0,0\n0.05,0,0,0,700,-70,0,0\n")
    with pytest.raises(TraceFormatError, match="control period"):
        run(replace(RunConfig(output_dir=tmp_path / "o"), scenario=None, trace_path=p))
