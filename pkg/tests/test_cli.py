"""CLI wiring and error-code contract tests."""

import shutil

import pytest
from click.testing import CliRunner

from arepas.cli import main
from arepas.config import ExperimentConfig, smoke_config


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, args, env=None):
    return runner.invoke(main, args, env=env, catch_exceptions=False)


def error_code(result):
    assert result.exit_code != 0
    line = result.stderr.strip().splitlines()[-1]
    assert line.startswith("ERROR:"), line
    return line.split(":")[1]


class TestUsage:
    def test_run_dir_required(self, runner):
        result = invoke(runner, ["synth-generate"], env={"AREPAS_RUN_DIR": ""})
        assert error_code(result) == "E_USAGE"

    def test_run_dir_from_env(self, runner, tmp_path):
        cfg_path = tmp_path / "cfg.yaml"
        smoke_config().save(cfg_path)
        result = invoke(runner, ["synth-generate", "--config", str(cfg_path)],
                        env={"AREPAS_RUN_DIR": str(tmp_path / "run")})
        assert result.exit_code == 0, result.stderr
        assert (tmp_path / "run" / "dataset" / "manifest.csv").exists()

    def test_config_required(self, runner, tmp_path):
        result = invoke(runner, ["synth-generate", "--run-dir", str(tmp_path / "r")])
        assert error_code(result) == "E_USAGE"

    def test_accelerator_unavailable(self, runner, tmp_path):
        import torch

        if torch.cuda.is_available():
            pytest.skip("accelerator present")
        cfg_path = tmp_path / "cfg.yaml"
        smoke_config().save(cfg_path)
        result = invoke(runner, ["train-recon", "--run-dir", str(tmp_path / "r"),
                                 "--config", str(cfg_path),
                                 "--device", "accelerator"])
        assert error_code(result) == "E_USAGE"


class TestInitConfig:
    def test_writes_loadable_config(self, runner, tmp_path):
        out = tmp_path / "cfg.yaml"
        result = invoke(runner, ["init-config", "--out", str(out),
                                 "--preset", "smoke", "--seed", "5"])
        assert result.exit_code == 0, result.stderr
        cfg = ExperimentConfig.load(out)
        assert cfg == smoke_config(seed=5)

    def test_refuses_clobber(self, runner, tmp_path):
        out = tmp_path / "cfg.yaml"
        out.write_text("occupied")
        result = invoke(runner, ["init-config", "--out", str(out)])
        assert error_code(result) == "E_USAGE"
        assert out.read_text() == "occupied"


class TestErrorCodes:
    def test_bad_config(self, runner, tmp_path):
        bad = tmp_path / "cfg.yaml"
        bad.write_text("version: 1\nnot_a_real_key: 2\n")
        result = invoke(runner, ["synth-generate", "--run-dir",
                                 str(tmp_path / "r"), "--config", str(bad)])
        assert error_code(result) == "E_CONFIG"

    def test_exists_without_overwrite(self, runner, tmp_path):
        cfg_path = tmp_path / "cfg.yaml"
        smoke_config().save(cfg_path)
        args = ["synth-generate", "--run-dir", str(tmp_path / "r"),
                "--config", str(cfg_path)]
        assert invoke(runner, args).exit_code == 0
        assert error_code(invoke(runner, args)) == "E_EXISTS"
        assert invoke(runner, args + ["--overwrite"]).exit_code == 0

    def test_prereq_missing(self, runner, tmp_path):
        cfg_path = tmp_path / "cfg.yaml"
        smoke_config().save(cfg_path)
        result = invoke(runner, ["train-scorer", "--run-dir", str(tmp_path / "r"),
                                 "--config", str(cfg_path)])
        assert error_code(result) == "E_PREREQ"

    def test_manifest_error(self, runner, tmp_path):
        cfg_path = tmp_path / "cfg.yaml"
        smoke_config().save(cfg_path)
        bad_manifest = tmp_path / "manifest.csv"
        bad_manifest.write_text("image_id,split\n")
        result = invoke(runner, ["preprocess", "--run-dir", str(tmp_path / "r"),
                                 "--config", str(cfg_path),
                                 "--manifest", str(bad_manifest)])
        assert error_code(result) == "E_MANIFEST"


class TestStagesViaCli:
    def test_evaluate_and_report_on_finished_run(self, runner, smoke_run, tmp_path):
        # copy the finished run so CLI mutations cannot disturb other tests
        _, run = smoke_run
        clone = tmp_path / "clone"
        shutil.copytree(run.root, clone)
        result = invoke(runner, ["evaluate", "--run-dir", str(clone), "--overwrite"])
        assert result.exit_code == 0, result.stderr
        assert "mode,patch_size,dice" in result.output
        result = invoke(runner, ["report", "--run-dir", str(clone), "--overwrite"])
        assert result.exit_code == 0, result.stderr
        assert (clone / "report" / "report.md").exists()

    def test_seed_override_changes_dataset(self, runner, tmp_path):
        cfg_path = tmp_path / "cfg.yaml"
        smoke_config(seed=1).save(cfg_path)
        import numpy as np

        for seed, name in [("1", "a"), ("2", "b")]:
            result = invoke(runner, ["synth-generate", "--run-dir",
                                     str(tmp_path / name), "--config", str(cfg_path),
                                     "--seed", seed])
            assert result.exit_code == 0, result.stderr
        img_a = np.load(tmp_path / "a" / "dataset" / "train" / "img_0000.npy")
        img_b = np.load(tmp_path / "b" / "dataset" / "train" / "img_0000.npy")
        assert not np.array_equal(img_a, img_b)
