import csv
import json

import pytest

from pcokey.cli import main, run
from pcokey.config import ExperimentConfig, load_config, parse_config
from pcokey.errors import ConfigError, SizeError

SMALL = {"trials": 400, "mc_trials": 500, "m_tilde": 6, "p_grid": [0.1, 0.3],
         "jam_sessions": 12, "jam_grid_points": 64, "cycle_cap": 200}

FILES = {
    "analyze": ["dynamics.json", "distribution.csv", "entropy.json"],
    "simulate": ["empirical_pmf.csv", "lemma1_gap.json", "summary.json"],
    "keyrate": ["keyrate.csv", "keyrate_config.json"],
    "jam": ["jam_region.json", "jam_sim.csv", "jam_buckets.csv", "jam_traces.csv"],
}


def _cfg(tmp_path, **extra):
    return parse_config({**SMALL, **extra, "out_dir": str(tmp_path)})


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("command", sorted(FILES))
def test_command_writes_its_files(tmp_path, command):
    run(command, _cfg(tmp_path))
    for name in FILES[command]:
        assert (tmp_path / name).stat().st_size > 0


def test_analyze_reference_values(tmp_path):
    run("analyze", _cfg(tmp_path))
    ent = json.loads((tmp_path / "entropy.json").read_text())
    assert ent["lower_bits"] == pytest.approx(3.8383, abs=1e-3)
    assert ent["upper_bits"] == pytest.approx(5.6131, abs=1e-3)
    assert ent["lower_bits"] <= ent["entropy_bits"] <= ent["upper_bits"]
    dyn = json.loads((tmp_path / "dynamics.json").read_text())
    assert dyn["tau_star"] == pytest.approx(0.51175, abs=1e-5)
    rows = _rows(tmp_path / "distribution.csv")
    assert rows[0]["i"] == "1" and float(rows[0]["p_i"]) == pytest.approx(0.110594, abs=1e-6)


def test_main_reports_bad_epsilon(tmp_path, capsys):
    path = _write(tmp_path, {"epsilon": 1.5})
    assert main(["analyze", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "epsilon" in capsys.readouterr().err


def test_config_errors_name_the_field():
    with pytest.raises(ConfigError) as exc:
        parse_config({"epsilon": 1.5})
    assert exc.value.path == "epsilon"
    with pytest.raises(ConfigError) as exc:
        parse_config({"foo": 1})
    assert exc.value.path == "foo" and "unknown key" in str(exc.value)
    with pytest.raises(ConfigError) as exc:
        parse_config({"phase_function": {"kind": "peskin", "gama": 2}})
    assert exc.value.path == "phase_function.gama"
    with pytest.raises(ConfigError) as exc:
        parse_config({"trials": 0})
    assert exc.value.path == "trials"
    with pytest.raises(ConfigError):
        parse_config({"p_grid": [0.5]})
    with pytest.raises(ConfigError):
        parse_config({"n": 3, "jammer": "adversarial-grid"})


def test_bad_json_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_keyrate_size_limit(tmp_path):
    with pytest.raises(SizeError):
        run("keyrate", _cfg(tmp_path, m_tilde=25))
    path = _write(tmp_path, {"m_tilde": 25})
    assert main(["keyrate", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_keyrate_rows(tmp_path):
    run("keyrate", _cfg(tmp_path, m_tilde=12, p_grid=[0.45]))
    rows = _rows(tmp_path / "keyrate.csv")
    assert len(rows) == 12
    for r in rows:
        assert float(r["bound_bits"]) <= float(r["exact_bits"])
    last = rows[-1]
    assert last["m_tilde"] == "12" and float(last["bound_bits"]) > 0
    assert float(rows[0]["exact_bits"]) == 0.0


def test_simulate_five_nodes_gap(tmp_path):
    run("simulate", _cfg(tmp_path, n=5, trials=10_000, phase_sampling="iid"))
    gap = json.loads((tmp_path / "lemma1_gap.json").read_text())
    assert gap["max_gap"] == 1 and gap["sessions_with_gap_above_1"] == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["sync_failures"] == 0 and summary["tv_distance"] is None


def test_simulate_two_nodes_tv(tmp_path):
    run("simulate", _cfg(tmp_path, trials=4000))
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert 0.0 < summary["tv_distance"] < 0.05


def test_jam_report(tmp_path):
    run("jam", _cfg(tmp_path))
    region = json.loads((tmp_path / "jam_region.json").read_text())
    assert region["hypothesis_holds"] is True
    assert region["hypothesis_value"] == pytest.approx(0.017532, abs=1e-6)
    lo, hi = region["window"]
    assert lo == pytest.approx(0.2165281, abs=1e-7) and hi == pytest.approx(0.7966300, abs=1e-7)
    sims = _rows(tmp_path / "jam_sim.csv")
    assert len(sims) == 3 * SMALL["jam_sessions"]
    assert all(r["synced"] == "true" for r in sims if r["outside_window"] == "true")
    traces = _rows(tmp_path / "jam_traces.csv")
    assert traces and all(r["inside_envelope"] == "true" for r in traces
                          if r["jam_forced_absorption"] == "false")


def test_jam_needs_two_nodes(tmp_path):
    with pytest.raises(ConfigError):
        run("jam", _cfg(tmp_path, n=3))


def test_rerun_from_embedded_config(tmp_path):
    first = tmp_path / "a"
    run("analyze", _cfg(first, epsilon=0.03))
    embedded = json.loads((first / "entropy.json").read_text())["config"]
    second = tmp_path / "b"
    run("analyze", parse_config({**embedded, "out_dir": str(second)}))
    for name in FILES["analyze"]:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_seed_override(tmp_path):
    path = _write(tmp_path, {**SMALL, "seed": 1})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(path), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(path), "--out", str(b), "--seed", "2"]) == 0
    assert (a / "empirical_pmf.csv").read_bytes() != (b / "empirical_pmf.csv").read_bytes()
    assert json.loads((b / "summary.json").read_text())["config"]["seed"] == 2


def test_defaults_are_reference_config():
    cfg = ExperimentConfig()
    assert cfg.epsilon == 0.02 and cfg.phase_function.gamma == 2.0 and cfg.n == 2
