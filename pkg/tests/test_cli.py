"""Configuration parsing, experiment runner, CSV round trips."""

import json

import numpy as np
import pytest

from rveplast.cli import (
    RunConfig,
    main,
    parse_config,
    read_trajectories,
    run,
    write_trajectories,
)
from rveplast.driver import monotonic_path
from rveplast.randfield import ConfigError, MaterialLaw
from rveplast.stats import monte_carlo


class TestParseConfig:
    def test_cyclic_defaults(self):
        config = parse_config(["cyclic"])
        assert config.experiment == "cyclic"
        assert (config.L, config.M, config.N, config.T) == (4, 5, 50, 1.0)
        assert config.law() == MaterialLaw()

    def test_monotonic_preset(self):
        config = parse_config(["monotonic"])
        assert (config.L, config.M) == (30, 40)

    def test_error_study_preset(self):
        config = parse_config(["error-study"])
        assert config.L_max == 42
        assert config.L_list == [6, 10, 14, 18, 22, 26, 30, 34, 38, 42]
        assert config.M == 25

    def test_flag_overrides(self):
        config = parse_config(["cyclic", "--L", "7", "--M", "2", "--seed", "99"])
        assert (config.L, config.M, config.seed) == (7, 2, 99)

    def test_invalid_size_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(["cyclic", "--L", "0"])

    def test_file_then_flag_precedence(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"M": 25, "L": 6}))
        config = parse_config(["cyclic", "--config", str(cfg), "--M", "40"])
        assert config.M == 40  # flag wins
        assert config.L == 6  # file beats preset default

    def test_unknown_file_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"no_such_key": 1}))
        with pytest.raises(ConfigError):
            parse_config(["cyclic", "--config", str(cfg)])

    def test_custom_path_requires_rows(self):
        with pytest.raises(ConfigError):
            parse_config(["custom-path"])

    def test_intervals_validated(self):
        with pytest.raises(ConfigError):
            parse_config(["cyclic", "--a-lo", "5e6"])  # lo > hi

    def test_L_list_bounds(self):
        with pytest.raises(ConfigError):
            parse_config(["error-study", "--L-list", "1,6", "--Lmax", "8"])


class TestRun:
    def test_cyclic_writes_trajectories(self, tmp_path, capsys):
        config = parse_config(
            ["cyclic", "--L", "3", "--M", "2", "--N", "5", "--out", str(tmp_path)]
        )
        assert run(config) == 0
        out = capsys.readouterr().out
        assert "final mean stress" in out
        data = read_trajectories(tmp_path / "cyclic_trajectories.csv")
        assert set(data) == {
            "sample_id", "l", "t", "F11", "s1", "s2", "s3", "R1", "R2", "R3", "energy",
        }
        assert len(data["l"]) == 2 * 6  # M samples x (N + 1) steps

    def test_csv_round_trip_is_exact(self, tmp_path):
        ens = monte_carlo(MaterialLaw(), 3, 2, 8, monotonic_path(n_steps=4))
        path = tmp_path / "traj.csv"
        write_trajectories(path, ens)
        data = read_trajectories(path)
        stresses = np.stack(
            [data[c].reshape(ens.M, -1) for c in ("s1", "s2", "s3")], axis=-1
        )
        assert np.array_equal(stresses, ens.stresses)
        assert np.array_equal(data["energy"].reshape(ens.M, -1), ens.energies)
        assert np.array_equal(data["t"].reshape(ens.M, -1)[0], ens.times)

    def test_rerun_is_bitwise_identical_across_threads(self, tmp_path):
        args = ["monotonic", "--L", "4", "--M", "3", "--N", "4"]
        run(parse_config(args + ["--out", str(tmp_path / "a"), "--threads", "1"]))
        run(parse_config(args + ["--out", str(tmp_path / "b"), "--threads", "3"]))
        a = (tmp_path / "a" / "monotonic_trajectories.csv").read_bytes()
        b = (tmp_path / "b" / "monotonic_trajectories.csv").read_bytes()
        assert a == b

    def test_error_study_files(self, tmp_path):
        config = parse_config(
            [
                "error-study",
                "--L-list", "4,6",
                "--Lmax", "8",
                "--M", "2",
                "--N", "4",
                "--out", str(tmp_path),
            ]
        )
        assert run(config) == 0
        header = (tmp_path / "error-study.csv").read_text().splitlines()[0]
        assert header == "L,l,t,F11,alpha,e_sys,variance,reference_scaling"
        slopes = (tmp_path / "error-study_slopes.csv").read_text().splitlines()
        assert slopes[0] == "quantity,t_label,window,slope"

    def test_custom_path_from_config(self, tmp_path):
        cfg = tmp_path / "run.json"
        rows = [[0.0, 0.0, 0.0, 0.0], [0.5, 1e-3, 0.0, 0.0], [1.0, 2e-3, 1e-4, 0.0]]
        cfg.write_text(json.dumps({"path": rows, "L": 3, "M": 1, "out": str(tmp_path)}))
        config = parse_config(["custom-path", "--config", str(cfg)])
        assert run(config) == 0
        data = read_trajectories(tmp_path / "custom-path_trajectories.csv")
        assert np.allclose(data["F11"], [0.0, 1e-3, 2e-3])


class TestMain:
    def test_usage_error_exit_code(self, capsys):
        assert main(["cyclic", "--L", "0"]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_solver_failure_exit_code(self, tmp_path, capsys):
        code = main(
            [
                "monotonic",
                "--L", "4",
                "--M", "1",
                "--N", "4",
                "--max-outer", "1",
                "--out", str(tmp_path),
            ]
        )
        assert code == 1
        err = capsys.readouterr().err
        assert "sample 1" in err and "step" in err

    def test_successful_run(self, tmp_path, capsys):
        code = main(["cyclic", "--L", "3", "--M", "1", "--N", "3", "--out", str(tmp_path)])
        assert code == 0


class TestRunConfig:
    def test_environment_thread_default(self, monkeypatch):
        config = RunConfig(experiment="cyclic")
        monkeypatch.setenv("RVE_PLAST_THREADS", "7")
        assert config.effective_threads() == 7
        monkeypatch.delenv("RVE_PLAST_THREADS")
        assert config.effective_threads() == 1
        assert RunConfig(experiment="cyclic", threads=3).effective_threads() == 3
