"""
Tests for the phase-traffic command line.
"""

import json
from pathlib import Path

import pytest

from phase_traffic.main import main

CONFIGS = Path(__file__).parent.parent / "configs"

PTA = {"variant": "PTa", "a": 0.0, "sigma": 0.3, "V_f": 1.0, "V_c": 1.0, "R": 1.0,
       "w_minus": -0.5, "w_plus": 0.5}
PTP = {"variant": "PTp", "gamma": 2.0, "V_f": 0.25, "V_c": 0.15, "R": 1.0,
       "w_minus": 0.45, "w_plus": 1.0}


def write_config(tmp_path, body, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(body), encoding="utf-8")
    return str(path)


def riemann(u_l, u_r, model=PTA, F=None):
    body = {"model": model, "problem": {"riemann": {"u_l": u_l, "u_r": u_r}}}
    if F is not None:
        body["constraint"] = {"F": F}
    return body


def test_solve_toll_gate_riemann_problem(capsys):
    status = main(["solve", "--config", str(CONFIGS / "toll_gate_riemann.json")])
    out = capsys.readouterr().out
    assert status == 0
    assert "StationaryJump" in out
    assert "classification: D2" in out


def test_solve_writes_record(tmp_path, capsys):
    out_dir = tmp_path / "solution"
    cfg = write_config(tmp_path, riemann([1.0, -0.4], [1.0, 0.3]))
    assert main(["solve", "--config", cfg, "--out", str(out_dir)]) == 0
    assert (out_dir / "solution.txt").read_text(encoding="utf-8") == capsys.readouterr().out


def test_identical_states_give_empty_fan(tmp_path, capsys):
    cfg = write_config(tmp_path, riemann([1.0, -0.4], [1.0, -0.4]))
    assert main(["solve", "--config", cfg]) == 0
    assert "waves: 0" in capsys.readouterr().out


def test_state_outside_domain_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, riemann([2.0, 0.0], [1.0, 0.3]))
    assert main(["solve", "--config", cfg]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_capacity_out_of_range_exits_2(tmp_path):
    cfg = write_config(tmp_path, riemann([1.0, 0.3], [0.0, 0.0], F=0.5))
    assert main(["solve", "--config", cfg]) == 2


def test_bad_model_exits_2(tmp_path):
    cfg = write_config(tmp_path, riemann([1.0, -0.4], [1.0, 0.3], model={**PTA, "w_minus": 0.6}))
    assert main(["describe", "--config", cfg]) == 2


def test_unknown_config_key_exits_2(tmp_path):
    cfg = write_config(tmp_path, {**riemann([1.0, -0.4], [1.0, 0.3]), "solver": "godunov"})
    assert main(["solve", "--config", cfg]) == 2


def test_missing_config_exits_2(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "absent.json")]) == 2


def test_no_command_exits_2():
    assert main([]) == 2


def test_unknown_suite_exits_2():
    assert main(["analyze", "--config", str(CONFIGS / "ptp_nonintersecting.json"), "--suite", "stability"]) == 2


def test_describe(capsys):
    assert main(["describe", "--config", str(CONFIGS / "ptp_nonintersecting.json")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("PTp model")
    assert "congested_capacity" in out


def test_analyze_continuity(tmp_path, capsys):
    body = {"model": PTP, "constraint": {"F": 0.1},
            "analysis": {"suites": ["continuity"], "n_probe": 5, "radii": [1e-4, 1e-5], "n_jobs": 2},
            "output": {"formats": ["csv"]}}
    cfg = write_config(tmp_path, body)
    out_dir = tmp_path / "analysis"
    assert main(["analyze", "--config", cfg, "--out", str(out_dir)]) == 0
    assert "continuity: PASS" in capsys.readouterr().out
    assert (out_dir / "analysis.csv").exists()


def _toll_body():
    body = json.loads((CONFIGS / "toll_gate.json").read_text(encoding="utf-8"))
    body["problem"]["simulation"].update({"t_end": 3.0, "profile_times": [0.0, 2.0]})
    body.pop("output")
    return body


def test_simulate_creates_output_dir(tmp_path, capsys):
    cfg = write_config(tmp_path, _toll_body())
    out_dir = tmp_path / "nested" / "run"
    assert main(["simulate", "--config", cfg, "--out", str(out_dir), "--delta-v", "0.05"]) == 0
    for name in ("profiles.csv", "events.csv", "gate_flux.csv", "mass.csv", "spacetime.svg", "summary.txt"):
        assert (out_dir / name).exists(), name
    header = (out_dir / "profiles.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "t,x,rho,q,v,w"
    assert "a1" in capsys.readouterr().out


def test_simulate_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, _toll_body())
    first, second = tmp_path / "first", tmp_path / "second"
    for out_dir in (first, second):
        assert main(["simulate", "--config", cfg, "--out", str(out_dir), "--delta-v", "0.05"]) == 0
    for name in ("profiles.csv", "events.csv", "gate_flux.csv", "mass.csv", "spacetime.svg"):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_negative_delta_v_exits_2(tmp_path):
    cfg = write_config(tmp_path, _toll_body())
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path), "--delta-v", "-1"]) == 2


@pytest.mark.parametrize("command", ["simulate", "solve"])
def test_missing_problem_section_exits_2(tmp_path, command):
    cfg = write_config(tmp_path, {"model": PTA})
    assert main([command, "--config", cfg, "--out", str(tmp_path)]) == 2
