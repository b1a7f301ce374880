"""End-to-end command-line runs on a small, fast scenario."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from seglab.cli import (DEFAULT_OUT_DIR, EXIT_BAD_CONFIG, EXIT_OK,
                        EXIT_RUN_FAILED, main, resolve_out_dir)

TINY_YAML = """\
schema_version: 1
name: tiny
seed: 2024
grid: {n_interior: 40}
boundary: {m1: "2*(1 - x)", m2: "2*x"}
k_values: [20.0, 200.0]
evolve: {t_end: 2.0, snapshot_every: 500}
shooting: {n_scan: 400}
"""


@pytest.fixture(scope="module")
def tiny_scenario(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("scenario") / "tiny.yaml"
    path.write_text(TINY_YAML)
    return path


def _strip_clock(path: Path) -> dict:
    payload = json.loads(path.read_text())
    payload.pop("wall_clock_s")
    return payload


class TestShootCommand:
    def test_logistic_enumeration_output(self, capsys):
        code = main(["shoot", "--a", "2", "--b", "-2",
                     "--n-interior", "100", "--n-scan", "400"])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "1 solution(s)" in out
        assert "slope=-4.16" in out


class TestEvolveCommand:
    def test_artifacts_and_verdict(self, tiny_scenario, tmp_path, capsys):
        out_dir = tmp_path / "run"
        code = main(["evolve", str(tiny_scenario), "--out-dir", str(out_dir)])
        stdout = capsys.readouterr().out
        assert code == EXIT_OK
        for name in ("tiny_evolve_k20.csv", "tiny_evolve_k200.csv",
                     "tiny_evolve_summary.csv", "tiny_evolve_report.json"):
            assert (out_dir / name).is_file(), f"missing artifact {name}"
        assert "[PASS] bounds_box" in stdout
        assert "evolve (tiny): PASS" in stdout
        payload = json.loads((out_dir / "tiny_evolve_report.json").read_text())
        assert payload["passed"] is True
        assert payload["seed"] == 2024

    def test_runs_are_reproducible(self, tiny_scenario, tmp_path):
        dirs = [tmp_path / "r1", tmp_path / "r2"]
        for d in dirs:
            assert main(["evolve", str(tiny_scenario), "--out-dir", str(d)]) == EXIT_OK
        for name in ("tiny_evolve_k20.csv", "tiny_evolve_k200.csv",
                     "tiny_evolve_summary.csv"):
            b1 = (dirs[0] / name).read_bytes()
            b2 = (dirs[1] / name).read_bytes()
            assert b1 == b2, f"{name} differs between identical runs"
        assert (_strip_clock(dirs[0] / "tiny_evolve_report.json")
                == _strip_clock(dirs[1] / "tiny_evolve_report.json"))

    def test_parallel_jobs_match_serial(self, tiny_scenario, tmp_path):
        serial = tmp_path / "serial"
        parallel = tmp_path / "parallel"
        assert main(["evolve", str(tiny_scenario), "--out-dir", str(serial)]) == EXIT_OK
        assert main(["evolve", str(tiny_scenario), "--out-dir", str(parallel),
                     "--jobs", "2"]) == EXIT_OK
        for name in ("tiny_evolve_k20.csv", "tiny_evolve_summary.csv"):
            assert (serial / name).read_bytes() == (parallel / name).read_bytes()

    def test_unsteady_run_fails_the_gate(self, tmp_path, capsys):
        path = tmp_path / "short.yaml"
        path.write_text(TINY_YAML.replace("t_end: 2.0", "t_end: 0.01"))
        code = main(["evolve", str(path), "--out-dir", str(tmp_path / "out")])
        stdout = capsys.readouterr().out
        assert code == EXIT_RUN_FAILED
        assert "[FAIL] steady_every_k" in stdout


class TestOutDirResolution:
    def test_flag_beats_env_beats_default(self, monkeypatch):
        monkeypatch.delenv("SEGLAB_OUT_DIR", raising=False)
        assert resolve_out_dir(None) == Path(DEFAULT_OUT_DIR)
        monkeypatch.setenv("SEGLAB_OUT_DIR", "/tmp/envdir")
        assert resolve_out_dir(None) == Path("/tmp/envdir")
        assert resolve_out_dir("chosen") == Path("chosen")

    def test_environment_directory_is_used(self, tiny_scenario, tmp_path,
                                           monkeypatch, capsys):
        env_dir = tmp_path / "from_env"
        monkeypatch.setenv("SEGLAB_OUT_DIR", str(env_dir))
        code = main(["spectrum", str(tiny_scenario)])
        capsys.readouterr()
        assert code == EXIT_OK
        assert (env_dir / "tiny_spectrum_report.json").is_file()


class TestSeedOverride:
    def test_seed_flag_lands_in_report(self, tiny_scenario, tmp_path, capsys):
        out_dir = tmp_path / "seeded"
        code = main(["spectrum", str(tiny_scenario), "--out-dir", str(out_dir),
                     "--seed", "777"])
        capsys.readouterr()
        assert code == EXIT_OK
        payload = json.loads((out_dir / "tiny_spectrum_report.json").read_text())
        assert payload["seed"] == 777


class TestBadInvocations:
    def test_missing_scenario_file(self, tmp_path):
        assert main(["evolve", str(tmp_path / "no.yaml")]) == EXIT_BAD_CONFIG

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("k_values: [unclosed\n")
        assert main(["evolve", str(path)]) == EXIT_BAD_CONFIG

    def test_nonpositive_jobs(self, tiny_scenario):
        assert main(["evolve", str(tiny_scenario), "--jobs", "0"]) == EXIT_BAD_CONFIG

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            main([])
