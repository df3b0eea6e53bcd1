import json
import shutil
import subprocess
import sys

import pytest

from aggdiff.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, EXIT_RUNTIME, main, parse_config


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def _json(path):
    return json.loads(path.read_text())


def test_lattice_run_example(tmp_path, capsys):
    out = tmp_path / "case1"
    code, cap = _run(capsys, "lattice-run", "--init", "0.4,0.7,0.2", "--bc", "hostile", "--steps", "100000",
                     "--tol", "1e-15", "--stride", "100", "--svg", "--out", str(out))
    assert code == EXIT_OK
    printed = json.loads(cap.out)
    assert printed["converged"]
    summary = _json(tmp_path / "case1_summary.json")
    assert summary["n4_case"]["label"] == "Case1"
    assert summary["forward_region_monotone"]
    assert summary["region_history"][0] == {"step": 0, "forward": [2]}
    a, b, c = summary["final_state"]
    assert c < 1e-9 and abs(a - b) < 1e-9
    assert summary["interior_mass"]["final"] == pytest.approx(1.3, abs=1e-12)
    for suffix in ("series.csv", "summary.json", "plot.svg", "manifest.json"):
        assert (tmp_path / f"case1_{suffix}").exists()


def test_lattice_run_profile_needs_n(tmp_path, capsys):
    code, cap = _run(capsys, "lattice-run", "--init", "ramp 0.5 1", "--out", str(tmp_path / "r"))
    assert code == EXIT_CONFIG and "--n" in cap.err
    code, _ = _run(capsys, "lattice-run", "--init", "ramp 0.5 1", "--n", "9", "--steps", "10",
                   "--out", str(tmp_path / "r"))
    assert code == EXIT_OK
    assert len(_json(tmp_path / "r_summary.json")["final_state"]) == 8


def test_pde_run_well_posed(tmp_path, capsys):
    code, _ = _run(capsys, "pde-run", "--init", "0.75+0.1*cos(pi*x)", "--M", "50", "--eps", "1e-3",
                   "--tmax", "2", "--sample-every", "0.1", "--svg", "--out", str(tmp_path / "w"))
    assert code == EXIT_OK
    s = _json(tmp_path / "w_summary.json")
    assert s["energy_nonincreasing"] and not s["blew_up"] and not s["backward_regime"]
    assert s["l2_decay_rate"] < 0 and s["min_principle"]["passed"]
    header = (tmp_path / "w_diagnostics.csv").read_text().splitlines()[0]
    assert header == "t,mass,energy,weak_energy,l2_to_mean,max_gradient"
    assert len((tmp_path / "w_final.csv").read_text().splitlines()) == 51


def test_pde_run_ill_posed_blowup(tmp_path, capsys):
    code, cap = _run(capsys, "pde-run", "--init", "0.25+0.1*cos(3*pi*x)", "--M", "200", "--eps", "0",
                     "--tmax", "0.05", "--sample-every", "0.001", "--out", str(tmp_path / "b"))
    assert code == EXIT_OK
    s = _json(tmp_path / "b_summary.json")
    assert s["blew_up"] and s["gradient_growth"] and s["backward_regime"]
    assert s["l2_decay_rate"] is None and s["t_final"] < 0.05


def test_pde_run_overflow_without_cap(tmp_path, capsys):
    code, cap = _run(capsys, "pde-run", "--init", "0.25+0.1*cos(3*pi*x)", "--M", "400", "--eps", "0",
                     "--tmax", "0.05", "--blowup-cap", "0", "--out", str(tmp_path / "o"))
    assert code == EXIT_RUNTIME and "aborted" in cap.err


def test_pde_run_deterministic(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        code, _ = _run(capsys, "pde-run", "--init", "random 0.55 0.95", "--M", "40", "--tmax", "0.5",
                       "--seed", "5", "--out", str(tmp_path / name))
        assert code == EXIT_OK
        outs.append(tmp_path / name)
    for suffix in ("_diagnostics.csv", "_final.csv", "_summary.json"):
        assert outs[0].with_name(outs[0].name + suffix).read_bytes() == outs[1].with_name(outs[1].name + suffix).read_bytes()
    m = [_json(o.with_name(o.name + "_manifest.json")) for o in outs]
    for d in m:
        del d["started"], d["finished"], d["config"]["out"]
        d["files"] = [f.rsplit("_", 1)[1] for f in d["files"]]
    assert m[0] == m[1]


def test_classify_n4(capsys):
    code, cap = _run(capsys, "classify-n4", "0.2,0.4,0.3")
    assert code == EXIT_OK
    d = json.loads(cap.out)
    assert d["label"] == "Case3" and d["predicted"]["limit"] == [0.0, 0.9, 0.0]
    code, cap = _run(capsys, "classify-n4", "0.1,0.3,0.8", "--simulate")
    d = json.loads(cap.out)
    assert d["verdict"] == "Match"


@pytest.mark.parametrize("argv", [["classify-n4", "0.2,0.4"], ["classify-n4", "0.2,1.5,0.3"],
                                  ["classify-n4", "a,b,c"], ["lattice-run"], ["pde-run", "--init", "bogus"]])
def test_config_errors(argv, capsys):
    code, _ = _run(capsys, *argv)
    assert code == EXIT_CONFIG


def test_argparse_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as e:
        main(["lattice-run", "--bc", "periodic"])
    assert e.value.code == 2


def test_config_file_fills_missing_flags(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"init": "0.5,0.7,0.9", "steps": 7, "bc": "hostile"}))
    c, _ = parse_config(["lattice-run", "--config", str(cfg), "--steps", "3"])
    assert (c.init, c.steps, c.bc) == ("0.5,0.7,0.9", 3, "hostile")
    cfg.write_text(json.dumps({"nonsense": 1}))
    code, _ = _run(capsys, "lattice-run", "--config", str(cfg))
    assert code == EXIT_CONFIG


def test_sweep_pde(tmp_path, capsys):
    code, _ = _run(capsys, "sweep", "--kind", "pde", "--init", "0.75+0.1*cos(pi*x)", "--eps", "0.01,0.001",
                   "--M", "20,40", "--tmax", "0.2", "--workers", "2", "--out", str(tmp_path / "s"))
    assert code == EXIT_OK
    verdicts = _json(tmp_path / "s_manifest.json")["verdicts"]
    assert len(verdicts) == 4 and set(verdicts.values()) == {"ok"}
    assert (tmp_path / "s_eps0p001_M40_summary.json").exists()


def test_sweep_lattice_reports_failures(tmp_path, capsys):
    code, _ = _run(capsys, "sweep", "--kind", "lattice", "--init", "ramp 0.5 1", "--n", "5,1",
                   "--bc", "noflux,hostile", "--steps", "50", "--out", str(tmp_path / "l"))
    assert code == EXIT_FAILED
    verdicts = _json(tmp_path / "l_manifest.json")["verdicts"]
    assert sum(v == "ok" for v in verdicts.values()) == 2


def test_verify_small_scale(tmp_path, capsys):
    code, cap = _run(capsys, "verify", "--suite", "bounds", "--suite", "monotone", "--scale", "0.01",
                     "--out", str(tmp_path / "v"))
    assert code == EXIT_OK
    assert "[bounds] PASS" in cap.out
    data = _json(tmp_path / "v_verify.json")
    assert [d["suite"] for d in data] == ["bounds", "monotone"]


@pytest.mark.skipif(shutil.which("aggdiff") is None, reason="console script not installed")
def test_console_script():
    r = subprocess.run(["aggdiff", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("aggdiff ")
    r = subprocess.run([sys.executable, "-m", "aggdiff.cli", "classify-n4", "0.5,0.5,0.5"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and '"Case9"' in r.stdout
