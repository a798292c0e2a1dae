import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


@pytest.fixture(scope="session")
def smoke_run(tmp_path_factory):
    """One tiny end-to-end run shared by pipeline, CLI, and report tests."""
    from arepas import pipeline as pl
    from arepas.config import smoke_config
    from arepas.experiments import stage_ablate, stage_sweep
    from arepas.report import stage_report

    cfg = smoke_config(seed=11)
    run = pl.RunPaths(tmp_path_factory.mktemp("smoke") / "run")
    run.root.mkdir(parents=True)
    cfg.save(run.config_path)
    pl.stage_synth(cfg, run)
    pl.stage_preprocess(cfg, run)
    pl.stage_train_recon(cfg, run)
    pl.stage_train_recon(cfg, run, no_augment=True)
    pl.stage_train_scorer(cfg, run)
    pl.stage_infer(cfg, run)
    pl.stage_evaluate(cfg, run)
    stage_ablate(cfg, run)
    stage_sweep(cfg, run)
    stage_report(cfg, run)
    return cfg, run
