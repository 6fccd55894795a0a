import argparse
import os

import pytest

from ipdg_lab.utils.settings import RunConfig
from ipdg_lab.utils.validators import (
    validate_input_file,
    validate_output_dir,
    validate_output_file,
    validate_run_config,
)


def test_from_namespace_keeps_defaults_for_unset_flags():
    namespace = argparse.Namespace(command="solve", k=3, beta=None, verbose=None, unrelated=1)
    config = RunConfig.from_namespace(namespace)
    assert config.k == 3
    assert config.beta == 0.9
    assert config.verbose is False


def test_clone_is_independent():
    config = RunConfig(k=2)
    copy = config.clone()
    copy.k = 5
    assert config.k == 2


def test_flag_items_skip_output_options(tmp_path):
    config = RunConfig(command="study", out=str(tmp_path / "s.csv"), gamma=True, csigma=12.5)
    items = config.flag_items()
    assert "out" not in items and "command" not in items
    assert items["gamma"] is True
    assert items["csigma"] == "12.5"
    assert "coercivity" not in items
    flags = config.to_flags()
    assert flags.startswith("study ")
    assert "--gamma" in flags.split()
    assert "--csigma 12.5" in flags


def test_penalty_and_solver_settings():
    config = RunConfig(theta=-1.0, csigma=30.0, tol=1e-11, accept_tol=1e-9)
    assert not config.penalty().symmetric
    assert config.penalty().csigma == 30.0
    assert config.solver().accept_tol == 1e-9


def test_default_config_is_valid():
    assert validate_run_config(RunConfig()) is not None


@pytest.mark.parametrize(
    "changes, message",
    [
        ({"beta": 1.2}, "--beta must lie in"),
        ({"k": 9}, "--k must lie in"),
        ({"epsilon": 0.3}, "--epsilon"),
        ({"theta": 2.0}, "--theta"),
        ({"tol": 1e-8, "accept_tol": 1e-10}, "--tol"),
        ({"csigma": 0.0}, "--csigma must be positive"),
        ({"family": "shishkin", "n": 1}, "--n must be at least 2"),
        ({"command": "study", "levels": 2}, "--levels must be at least 3"),
        ({"samples": 10}, "--samples"),
        ({"family": "hex"}, "Unknown mesh family"),
        ({"problem": "wave"}, "Unknown problem"),
        ({"penalty_exponent": 0.5}, "--penalty-exponent"),
    ],
)
def test_invalid_settings(changes, message):
    config = RunConfig(**changes)
    with pytest.raises(ValueError, match=message):
        validate_run_config(config)


def test_input_file_checks(tmp_path):
    with pytest.raises(FileNotFoundError):
        validate_input_file(tmp_path / "absent.json")
    with pytest.raises(ValueError, match="Not a file"):
        validate_input_file(tmp_path)
    wrong = tmp_path / "mesh.txt"
    wrong.write_text("{}", encoding="utf-8")
    with pytest.raises(ValueError, match="extension"):
        validate_input_file(wrong)
    right = tmp_path / "mesh.json"
    right.write_text("{}", encoding="utf-8")
    assert validate_input_file(right) == right.resolve()


def test_output_checks(tmp_path):
    assert validate_output_dir(tmp_path) == tmp_path.resolve()
    with pytest.raises(FileNotFoundError):
        validate_output_dir(tmp_path / "missing")
    with pytest.raises(FileNotFoundError):
        validate_output_file(tmp_path / "missing" / "out.csv")
    with pytest.raises(ValueError, match="is a directory"):
        validate_output_file(tmp_path)
    assert validate_output_file(tmp_path / "out.csv").name == "out.csv"


@pytest.mark.skipif(os.name != "posix" or os.geteuid() == 0, reason="needs POSIX permissions as non-root")
def test_read_only_directory(tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    try:
        with pytest.raises(PermissionError):
            validate_output_dir(locked)
    finally:
        locked.chmod(0o700)
