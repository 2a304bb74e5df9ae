import json

import pytest

from rscf import cli
from rscf.config import ExperimentConfig, KEY_SPECS, load_file, render, resolve


SMALL_ARGS = ["--set", "n_realizations=2", "--set", "n_err=5",
              "--set", "schemes=CF-MF,RS-CF-MF-SP", "--set", "snr_grid_db=0,10"]


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        cfg = ExperimentConfig(m=10, k=5, sigma_e2=0.1, schemes=("CF-MF",))
        path = tmp_path / "exp.cfg"
        path.write_text(render(cfg), encoding="utf-8")
        assert load_file(path) == cfg

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("# comment\n\nM = 12\nK = 3  # trailing comment\n")
        cfg = load_file(path)
        assert cfg.m == 12 and cfg.k == 3

    def test_unknown_key_lists_valid_ones(self, tmp_path):
        from rscf.config import ConfigError
        path = tmp_path / "exp.cfg"
        path.write_text("bandwidth = 1\n")
        with pytest.raises(ConfigError) as err:
            load_file(path)
        for key in KEY_SPECS:
            assert key in str(err.value)

    def test_override_precedence(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("seed = 3\nM = 12\n")
        cfg = resolve(path, ["seed=9"])
        assert cfg.seed == 9 and cfg.m == 12

    def test_validation_rejects_overloaded(self):
        from rscf.config import ConfigError
        with pytest.raises(ConfigError):
            resolve(None, ["M=4", "K=4"])


class TestCliDispatch:
    def test_run_emits_expected_rows(self, capsys):
        code = cli.main(["run", *SMALL_ARGS])
        assert code == 0
        out = capsys.readouterr().out.strip().split("\n")
        assert out[0].startswith("scheme,snr_db")
        assert len(out) == 1 + 2 * 2  # schemes x snr points

    def test_snr_override_row_count(self, capsys):
        code = cli.main(["run", "--set", "n_realizations=1", "--set", "n_err=3",
                         "--set", "schemes=CF-MF", "--set", "snr_grid_db=0,5,10"])
        assert code == 0
        out = capsys.readouterr().out.strip().split("\n")
        assert len(out) == 1 + 3

    def test_byte_identical_reruns(self, tmp_path):
        for sub in ("a", "b"):
            code = cli.main(["run", *SMALL_ARGS, "--out", str(tmp_path / sub)])
            assert code == 0
        assert ((tmp_path / "a" / "results.csv").read_bytes()
                == (tmp_path / "b" / "results.csv").read_bytes())

    def test_bad_key_exit_code(self, capsys):
        assert cli.main(["run", "--set", "bogus=1"]) == 1
        assert "config error" in capsys.readouterr().err

    def test_bad_value_exit_code(self, capsys):
        assert cli.main(["run", "--set", "M=eight"]) == 1

    def test_print_config(self, capsys):
        code = cli.main(["run", "--print-config", "--seed", "42", *SMALL_ARGS])
        assert code == 0
        out = capsys.readouterr().out
        assert "seed = 42" in out
        assert "schemes = CF-MF,RS-CF-MF-SP" in out

    def test_seed_flag_changes_results(self, capsys):
        cli.main(["run", *SMALL_ARGS, "--seed", "1"])
        first = capsys.readouterr().out
        cli.main(["run", *SMALL_ARGS, "--seed", "2"])
        second = capsys.readouterr().out
        assert first != second

    def test_verify_small(self, capsys):
        code = cli.main(["verify"])
        assert code == 0
        out = capsys.readouterr().out
        assert "verification PASSED" in out

    def test_cluster_report_json(self, capsys):
        code = cli.main(["cluster-report", "--set", "M=8", "--set", "K=4"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert isinstance(payload, list) and payload
        users = sorted(u for entry in payload for u in entry["users"])
        assert users == [0, 1, 2, 3]

    def test_cluster_report_out_file(self, tmp_path, capsys):
        code = cli.main(["cluster-report", "--out", str(tmp_path)])
        assert code == 0
        capsys.readouterr()
        assert (tmp_path / "cluster_report.json").exists()

    def test_sweep_runs_each_value(self, capsys, tmp_path):
        code = cli.main(["sweep", "--key", "sigma_e2", "--values", "0,0.05",
                         "--out", str(tmp_path), *SMALL_ARGS])
        assert code == 0
        out = capsys.readouterr().out
        assert "# sigma_e2 = 0" in out and "# sigma_e2 = 0.05" in out
        assert (tmp_path / "sweep_sigma_e2=0" / "results.csv").exists()
        assert (tmp_path / "sweep_sigma_e2=0.05" / "results.csv").exists()

    def test_sweep_rejects_bad_key(self, capsys):
        assert cli.main(["sweep", "--key", "nope", "--values", "1", *SMALL_ARGS]) == 1

    def test_dump_precoders(self, tmp_path, capsys):
        code = cli.main(["run", *SMALL_ARGS, "--out", str(tmp_path),
                         "--dump-precoders"])
        assert code == 0
        payload = json.loads((tmp_path / "precoders.json").read_text())
        assert set(payload) == {"CF-MF", "RS-CF-MF-SP"}
        entry = payload["RS-CF-MF-SP"]
        assert entry["label"] == "MF-SP"
        # M x K private matrix of [re, im] pairs, row-major
        assert len(entry["private"]) == 8 and len(entry["private"][0]) == 4
        assert len(entry["private"][0][0]) == 2
        assert len(entry["common"][0]) >= 1  # one beam per cluster

    def test_verification_failure_exit_code(self, capsys, monkeypatch):
        from rscf import harness
        broken = harness.VerifyReport((harness.CheckResult("x", False, 1.0, 0.0),))
        monkeypatch.setattr(harness, "verify", lambda config: broken)
        assert cli.main(["verify"]) == 2

    def test_runtime_failure_exit_code(self, capsys, monkeypatch):
        from rscf import harness
        def boom(config, out_dir=None):
            raise RuntimeError("realization 3: exhausted redraws")
        monkeypatch.setattr(harness, "run_experiment", boom)
        assert cli.main(["run", *SMALL_ARGS]) == 3
        assert "runtime error" in capsys.readouterr().err
