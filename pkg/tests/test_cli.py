import json
import subprocess
import sys

import numpy as np
import pytest

from ilrlab.cli import main
from ilrlab.mdp import FiniteMdp, load_mdp, save_mdp, validate_mdp


@pytest.fixture
def mdp_file(tmp_path):
    path = tmp_path / "m.json"
    assert main(["gen-mdp", "--states", "5", "--actions", "3", "--branching", "2", "--seed", "8", "-o", str(path)]) == 0
    return path


def test_gen_mdp_writes_valid_file(mdp_file):
    mdp = load_mdp(mdp_file)
    assert validate_mdp(mdp).ok
    sums = mdp.transitions.sum(axis=2)
    assert sums.shape == (5, 3) and np.all(np.abs(sums - 1) <= 1e-12)
    assert np.all((mdp.transitions > 0).sum(axis=2) == 2)


def test_gen_mdp_byte_identical(tmp_path, mdp_file):
    other = tmp_path / "again.json"
    main(["gen-mdp", "--states", "5", "--actions", "3", "--branching", "2", "--seed", "8", "-o", str(other)])
    assert other.read_bytes() == mdp_file.read_bytes()


def test_gen_mdp_branching_exceeds_states(tmp_path, capsys):
    code = main(["gen-mdp", "--states", "5", "--actions", "2", "--branching", "9", "-o", str(tmp_path / "x.json")])
    assert code == 2
    assert "branching exceeds states" in capsys.readouterr().err
    assert not (tmp_path / "x.json").exists()


def test_gen_mdp_with_expert(tmp_path, capsys):
    main(["gen-mdp", "--states", "4", "--actions", "2", "--seed", "1", "--with-expert", "-o", str(tmp_path / "m.json")])
    assert capsys.readouterr().out.startswith("tau_mix ")


def test_gen_mdp_requires_sizes(tmp_path):
    assert main(["gen-mdp", "-o", str(tmp_path / "m.json")]) == 2
    assert main(["gen-mdp", "--states", "0", "--actions", "2", "-o", str(tmp_path / "m.json")]) == 2


def run_imitate(mdp_file, tmp_path, *extra):
    out = tmp_path / "report.json"
    code = main(["imitate", str(mdp_file), "--out", str(out), *extra])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_imitate_full_coverage(mdp_file, tmp_path):
    code, rep = run_imitate(mdp_file, tmp_path, "--samples", "20000", "--seed", "3")
    assert code == 0
    assert rep["tv_to_expert"] <= 0.01
    assert rep["intrinsic_gain"] == pytest.approx(1.0)
    assert rep["extrinsic_gain"] == pytest.approx(rep["expert_gain"], abs=1e-9)


def test_imitate_single_sample(mdp_file, tmp_path):
    code, rep = run_imitate(mdp_file, tmp_path, "--samples", "1")
    assert code == 0 and rep["n_samples"] == 1
    assert 0 <= rep["tv_to_expert"] <= 1


def test_imitate_bc_same_schema(mdp_file, tmp_path):
    _, ilr_rep = run_imitate(mdp_file, tmp_path, "--samples", "100")
    code, bc_rep = run_imitate(mdp_file, tmp_path, "--samples", "100", "--method", "bc")
    assert code == 0 and bc_rep["method"] == "bc"
    assert set(bc_rep) == set(ilr_rep)


def test_imitate_invalid_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"transitions": [[[0.5, 0.4]]], "rewards": [[0.0]], "initial_state": 0}')
    assert main(["imitate", str(bad)]) == 2
    assert main(["imitate", str(tmp_path / "missing.json")]) == 2


def test_imitate_runtime_failure_exit_3(tmp_path, capsys):
    # every deterministic policy is reducible, so no expert can be drawn
    path = tmp_path / "stuck.json"
    save_mdp(FiniteMdp(np.tile(np.eye(2)[:, None, :], (1, 2, 1)), np.zeros((2, 2))), path)
    assert main(["imitate", str(path)]) == 3
    assert "runtime failure" in capsys.readouterr().err


def test_verify_end_to_end_passes(tmp_path):
    out = tmp_path / "p.json"
    assert main(["verify", "prop1", "--eta", "0.5", "--delta", "0.2", "--trials", "50", "--seed", "1", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["pass"] is True and rep["trials"] == 50
    csv_lines = out.with_suffix(".csv").read_text().splitlines()
    assert csv_lines[0] == "# schema_version: 1"
    assert csv_lines[1].startswith("trial,seed,measured,bound,satisfied")
    assert len(csv_lines) == 52


def test_verify_gain_transfer(tmp_path, capsys):
    assert main(["verify", "lemma7", "--trials", "100"]) == 0
    assert "100/100" in capsys.readouterr().out


def test_verify_end_to_end_far_below_bound_fails():
    assert main(["verify", "prop1", "--eta", "0.5", "--samples-override", "1"]) == 1


@pytest.mark.parametrize("check", ["tv-duality", "lemma3", "lemma4", "lemma5", "stochastic-demo"])
def test_verify_other_checks(check):
    assert main(["verify", check, "--trials", "10"] + (["--samples", "2000"] if check == "lemma4" else [])) == 0


def test_verify_bad_input():
    assert main(["verify", "prop1", "--eta", "1.5"]) == 2
    assert main(["verify", "prop1", "--delta", "0"]) == 2
    assert main(["verify"]) == 2
    with pytest.raises(SystemExit) as info:
        main(["verify", "lemma99"])
    assert info.value.code == 2


def test_config_precedence_and_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"check": "lemma7", "trials": 7, "seed": 3}))
    assert main(["verify", "--config", str(cfg)]) == 0
    assert "7/7" in capsys.readouterr().out
    assert main(["verify", "--config", str(cfg), "--trials", "9"]) == 0
    assert "9/9" in capsys.readouterr().out
    cfg.write_text(json.dumps({"check": "lemma7", "bogus": 1}))
    assert main(["verify", "--config", str(cfg)]) == 2
    assert "bogus" in capsys.readouterr().err
    cfg.write_text("[1, 2]")
    assert main(["verify", "--config", str(cfg)]) == 2
    cfg.write_text(json.dumps({"check": "lemma7", "trials": "many"}))
    assert main(["verify", "--config", str(cfg)]) == 2


def test_sweep_single_row(mdp_file, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", str(mdp_file), "--fractions", "1.0", "--methods", "ILR", "--trials", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# schema_version: 1"
    assert lines[1] == "dataset_fraction,n_samples,method,extrinsic_gain,expert_gain,tv_to_expert,intrinsic_gain,trial,seed"
    assert len(lines) == 3


def test_sweep_deterministic(mdp_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", str(mdp_file), "--trials", "2", "--samples", "512", "--seed", "5"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 2 + 13 * 2 * 2


def test_sweep_bad_input(mdp_file):
    assert main(["sweep", str(mdp_file), "--fractions", "0,1"]) == 2
    assert main(["sweep", str(mdp_file), "--methods", "GAIL"]) == 2
    assert main(["sweep", str(mdp_file), "--fractions", "half"]) == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.json"
    proc = subprocess.run(
        [sys.executable, "-m", "ilrlab", "gen-mdp", "--states", "3", "--actions", "2", "-o", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and out.exists()
    proc = subprocess.run([sys.executable, "-m", "ilrlab", "verify", "lemma3", "--trials", "3"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("PASS lemma3")


def test_imitate_optimal_expert(mdp_file, tmp_path):
    code, rep = run_imitate(mdp_file, tmp_path, "--samples", "5000", "--expert", "optimal")
    assert code == 0 and rep["expert"] == "optimal"
    assert rep["extrinsic_gain"] <= rep["expert_gain"] + 1e-9


def test_sweep_optimal_expert_unavailable(tmp_path):
    t = np.zeros((2, 2, 2))
    t[0, 0, 0] = t[1, 0, 1] = t[0, 1, 1] = t[1, 1, 0] = 1.0
    r = np.zeros((2, 2))
    r[0, 1] = 1.0
    path = tmp_path / "periodic.json"
    save_mdp(FiniteMdp(t, r), path)
    assert main(["sweep", str(path), "--trials", "1"]) == 3
