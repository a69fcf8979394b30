import json

import pytest

from ewens_pitman.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_simulate_csv_and_json(capsys, tmp_path):
    out = tmp_path / "sim.csv"
    code, _ = run(capsys, "simulate", "--alpha", "0.3", "--n", "200", "--d", "2", "--replicates", "3",
                  "--checkpoints", "0.5", "--out", str(out))
    assert code == 0
    text = out.read_text()
    assert text.startswith("# ") and '"master_seed"' in text
    code, cap = run(capsys, "simulate", "--alpha", "0.3", "--n", "200", "--replicates", "2", "--format", "json")
    assert code == 0 and json.loads(cap.out)["R"] == 2


def test_simulate_is_reproducible(capsys):
    args = ("simulate", "--alpha", "0.1", "--n", "300", "--replicates", "4", "--seed", "5")
    assert run(capsys, *args)[1].out == run(capsys, *args)[1].out


def test_fixed_regime_needs_theta(capsys):
    code, cap = run(capsys, "simulate", "--alpha", "0", "--n", "10", "--regime", "fixed")
    assert code == 2 and "theta" in cap.err


def test_exact_and_asympt(capsys):
    code, cap = run(capsys, "exact", "--alpha", "0", "--n", "50", "--d", "2", "--s", "2", "--central")
    assert code == 0 and len(json.loads(cap.out)["variance"]) == 3
    code, cap = run(capsys, "asympt", "--alpha", "0.5", "--d", "2")
    data = json.loads(cap.out)
    assert code == 0 and "Sigma_linear_response" in data and "header" in data


def test_domain_error_exit_code(capsys):
    code, cap = run(capsys, "asympt", "--alpha", "1.5", "--d", "1")
    assert code == 2 and cap.err.startswith("error:")


def test_audit(capsys):
    code, cap = run(capsys, "audit", "--alpha", "0", "--d", "1", "--format", "json")
    assert code == 0 and json.loads(cap.out)["counts"]["MATCH"] > 0


def test_verify_exit_codes(capsys, tmp_path):
    code, cap = run(capsys, "verify", "lln", "--alphas", "0", "--n", "100000", "--d", "1")
    assert code == 0 and cap.out.rstrip().endswith("overall: PASS")
    code, _ = run(capsys, "verify", "martingale", "--alphas", "0", "--n", "10000", "--d", "1",
                  "--seeds", "2", "--csv", str(tmp_path / "m.csv"))
    assert code in (0, 1)
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0].startswith("# ") and lines[1] == "h,entry,value"


@pytest.mark.slow
def test_verify_moments(capsys):
    code, cap = run(capsys, "verify", "moments", "--format", "json")
    assert code == 0 and json.loads(cap.out)["pass"]
