import numpy as np
import pandas as pd
import pytest

from ipdg_lab import main as cli
from ipdg_lab.core.linalg import ConvergenceError


def _value(output: str, key: str) -> str:
    for line in output.splitlines():
        if line.startswith(f"{key}:"):
            return line.split(":", 1)[1].strip()
    raise AssertionError(f"{key} not in output")


def test_geometric_mesh_report(capsys):
    assert cli.main(["mesh", "--family", "geometric", "--beta", "0.9", "--levels", "20"]) == 0
    assert float(_value(capsys.readouterr().out, "alpha")) <= 0.42


def test_uniform_mesh_has_no_grading(capsys):
    assert cli.main(["mesh", "--family", "uniform", "--n", "4"]) == 0
    assert _value(capsys.readouterr().out, "alpha") == "0"


def test_family_parameters_in_the_family_string(capsys):
    assert cli.main(["mesh", "--family", "geometric(beta=0.5, N=2)"]) == 0
    assert _value(capsys.readouterr().out, "elements") == "18"


def test_invalid_beta_is_a_usage_error(capsys):
    assert cli.main(["mesh", "--family", "geometric", "--beta", "1.2"]) == 2
    assert "--beta" in capsys.readouterr().err


def test_unknown_problem_is_a_usage_error():
    assert cli.main(["solve", "--problem", "wave"]) == 2


def test_missing_mesh_file(tmp_path):
    assert cli.main(["solve", "--mesh", str(tmp_path / "absent.json")]) == 2


def test_version():
    assert cli.main(["--version"]) == 0


def test_solve_on_a_written_mesh(tmp_path, capsys):
    path = tmp_path / "g.json"
    assert cli.main(["mesh", "--family", "geometric", "--beta", "0.8", "--levels", "3", "--out", str(path)]) == 0
    capsys.readouterr()
    code = cli.main(
        ["solve", "--mesh", str(path), "--k", "1", "--csigma", "20", "--problem", "sinsin",
         "--mtx-dir", str(tmp_path)]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert float(_value(out, "l2_error")) > 0
    assert "z_error" in out
    assert (tmp_path / "system.mtx").exists()


def test_grading_command(capsys):
    assert cli.main(["grading", "--family", "geometric", "--beta", "0.9", "--levels", "6", "--k", "2"]) == 0
    out = capsys.readouterr().out
    assert "(estimated)" in _value(out, "cinv")
    assert float(_value(out, "geometric grading bound")) <= 0.42
    assert float(_value(out, "csigma threshold").split()[0]) >= 4.0


def test_ritz_command(capsys):
    assert cli.main(["ritz", "--family", "uniform", "--n", "2", "--problem", "polybubble", "--k", "2"]) == 0
    out = capsys.readouterr().out
    ratio = float(_value(out, "stability ratio |Ru|_Z/|u|_Z"))
    bound = float(_value(out, "stability bound 1/gamma"))
    assert 0 < ratio <= bound * (1 + 1e-5)


def test_infsup_on_the_geometric_mesh(capsys):
    assert cli.main(["infsup", "--family", "geometric", "--beta", "0.9", "--levels", "4", "--k", "1"]) == 0
    out = capsys.readouterr().out
    assert _value(out, "dofs") == "1014"
    assert float(_value(out, "gamma")) > 0


def test_infsup_rejects_nonsymmetric_method(capsys):
    assert cli.main(["infsup", "--family", "uniform", "--n", "2", "--theta", "-1"]) == 2
    assert "symmetric" in capsys.readouterr().err


def test_dof_limit_is_a_numerical_failure(capsys):
    assert cli.main(["infsup", "--family", "uniform", "--n", "21", "--k", "1"]) == 1
    assert "2500" in capsys.readouterr().err


def test_study_rejects_mesh_files(tmp_path):
    path = tmp_path / "m.json"
    assert cli.main(["mesh", "--n", "2", "--out", str(path)]) == 0
    assert cli.main(["study", "--mesh", str(path)]) == 2


def test_uniform_study_csv(tmp_path):
    first = tmp_path / "first.csv"
    second = tmp_path / "second.csv"
    argv = ["study", "--family", "uniform", "--levels", "4", "--k", "1", "--problem", "sinsin"]
    assert cli.main([*argv, "--out", str(first), "--svg", str(tmp_path / "rates.svg")]) == 0
    assert cli.main([*argv, "--out", str(second)]) == 0

    lines = first.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# ipdg-lab family=uniform(n0=4) k=1 problem=sinsin")
    table = pd.read_csv(first, comment="#")
    assert len(table) == 4
    assert 1.85 <= table["eoc_l2_error_h"].iloc[-1] <= 2.15
    assert first.read_bytes() == second.read_bytes()
    assert (tmp_path / "rates.svg").exists()


def test_numerical_failure_exit_code(monkeypatch, capsys):
    def failing(*args, **kwargs):
        raise ConvergenceError("pcg stalled", 1e-3, 10, np.zeros(1))

    monkeypatch.setattr(cli, "solve_poisson", failing)
    assert cli.main(["solve", "--n", "2"]) == 1
    assert "pcg stalled" in capsys.readouterr().err


def test_log_file(tmp_path):
    log = tmp_path / "run.log"
    assert cli.main(["mesh", "--n", "2", "--log-file", str(log), "--verbose"]) == 0
    text = log.read_text(encoding="utf-8")
    assert "Command 'mesh' finished" in text
