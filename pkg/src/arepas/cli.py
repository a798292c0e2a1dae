"""Command-line experiment harness.

Every failure exits nonzero after printing one machine-parsable line of the
form ``ERROR:<CODE>: message`` on stderr, where CODE is one of E_USAGE,
E_CONFIG, E_MANIFEST, E_PREREQ, E_EXISTS, E_DATA, E_INTERNAL.
"""

from __future__ import annotations

import dataclasses
import functools
import os
import sys
from pathlib import Path

import click

from .config import ConfigError, ExperimentConfig, desk_scale_config, smoke_config
from .experiments import stage_ablate, stage_sweep
from .manifest import ManifestError
from .pipeline import (
    PipelineError,
    RunPaths,
    stage_evaluate,
    stage_infer,
    stage_preprocess,
    stage_synth,
    stage_train_recon,
    stage_train_scorer,
)
from .report import stage_report
from .synthetic import SynthDataError

RUN_DIR_ENV = "AREPAS_RUN_DIR"

_PRESETS = {
    "paper": lambda seed: ExperimentConfig(seed=seed),
    "desk": desk_scale_config,
    "smoke": smoke_config,
}


class UsageFault(Exception):
    pass


def _fail(code: str, message) -> None:
    click.echo(f"ERROR:{code}: {message}", err=True)
    sys.exit(1)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except UsageFault as exc:
            _fail("E_USAGE", exc)
        except ConfigError as exc:
            _fail("E_CONFIG", exc)
        except ManifestError as exc:
            _fail("E_MANIFEST", exc)
        except SynthDataError as exc:
            _fail("E_DATA", exc)
        except PipelineError as exc:
            _fail(exc.code, exc)
        except Exception as exc:  # last resort: never a bare traceback
            _fail("E_INTERNAL", f"{type(exc).__name__}: {exc}")

    return wrapper


def _resolve_run(run_dir: Path | None) -> RunPaths:
    if run_dir is None:
        env = os.environ.get(RUN_DIR_ENV)
        if not env:
            raise UsageFault(
                f"no run directory: pass --run-dir or set {RUN_DIR_ENV}")
        run_dir = Path(env)
    return RunPaths(Path(run_dir))


def _load_config(run: RunPaths, config: Path | None,
                 seed: int | None) -> ExperimentConfig:
    if config is not None:
        cfg = ExperimentConfig.load(config)
    elif run.config_path.exists():
        cfg = ExperimentConfig.load(run.config_path)
    else:
        raise UsageFault(
            "no configuration: pass --config or place config.yaml in the run dir")
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
        cfg.validate()
    if not run.config_path.exists():
        run.root.mkdir(parents=True, exist_ok=True)
        cfg.save(run.config_path)
    return cfg


def _resolve_device(device: str) -> str:
    if device == "cpu":
        return "cpu"
    import torch

    if torch.cuda.is_available():
        return "cuda"
    raise UsageFault("accelerator requested but none is available")


def _common(fn):
    fn = click.option("--run-dir", type=click.Path(path_type=Path), default=None,
                      help=f"Run directory (or set {RUN_DIR_ENV}).")(fn)
    fn = click.option("--config", type=click.Path(path_type=Path), default=None,
                      help="Config YAML; defaults to <run-dir>/config.yaml.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Override the master seed.")(fn)
    fn = click.option("--overwrite", is_flag=True,
                      help="Replace existing outputs of this stage.")(fn)
    return fn


def _device_opt(fn):
    return click.option("--device", type=click.Choice(["cpu", "accelerator"]),
                        default="cpu")(fn)


@click.group()
def main() -> None:
    """Anomaly segmentation by reconstruction and patch similarity."""


@main.command("init-config")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--preset", type=click.Choice(sorted(_PRESETS)), default="desk")
@click.option("--seed", type=int, default=0)
@click.option("--overwrite", is_flag=True)
@_guarded
def init_config(out: Path, preset: str, seed: int, overwrite: bool) -> None:
    """Write a ready-to-edit configuration file."""
    if out.exists() and not overwrite:
        raise UsageFault(f"config already exists: {out}")
    cfg = _PRESETS[preset](seed)
    cfg.validate()
    out.parent.mkdir(parents=True, exist_ok=True)
    cfg.save(out)
    click.echo(str(out))


@main.command("synth-generate")
@_common
@_guarded
def synth_generate(run_dir, config, seed, overwrite) -> None:
    """Generate the synthetic phantom dataset."""
    run = _resolve_run(run_dir)
    cfg = _load_config(run, config, seed)
    click.echo(str(stage_synth(cfg, run, overwrite=overwrite)))


@main.command("preprocess")
@_common
@click.option("--manifest", type=click.Path(path_type=Path), default=None,
              help="External raw-data manifest; defaults to the synth output.")
@_guarded
def preprocess(run_dir, config, seed, overwrite, manifest) -> None:
    """Normalize raw images into model inputs."""
    run = _resolve_run(run_dir)
    cfg = _load_config(run, config, seed)
    click.echo(str(stage_preprocess(cfg, run, manifest_path=manifest,
                                    overwrite=overwrite)))


@main.command("train-recon")
@_common
@_device_opt
@click.option("--no-augment", is_flag=True,
              help="Disable edge-map corruption; trains the ablation variant.")
@_guarded
def train_recon(run_dir, config, seed, overwrite, device, no_augment) -> None:
    """Train the edge-conditioned reconstructor."""
    run = _resolve_run(run_dir)
    cfg = _load_config(run, config, seed)
    path = stage_train_recon(cfg, run, no_augment=no_augment,
                             device=_resolve_device(device), overwrite=overwrite)
    click.echo(str(path))


@main.command("train-scorer")
@_common
@_device_opt
@click.option("--patch-size", type=int, default=None,
              help="Override the configured patch size.")
@_guarded
def train_scorer_cmd(run_dir, config, seed, overwrite, device, patch_size) -> None:
    """Train the patch-similarity scorer."""
    run = _resolve_run(run_dir)
    cfg = _load_config(run, config, seed)
    path = stage_train_scorer(cfg, run, patch_size=patch_size,
                              device=_resolve_device(device), overwrite=overwrite)
    click.echo(str(path))


@main.command("infer")
@_common
@_device_opt
@_guarded
def infer(run_dir, config, seed, overwrite, device) -> None:
    """Write reconstruction, heat-map, and final-map arrays per image."""
    run = _resolve_run(run_dir)
    cfg = _load_config(run, config, seed)
    click.echo(str(stage_infer(cfg, run, device=_resolve_device(device),
                               overwrite=overwrite)))


@main.command("evaluate")
@_common
@_guarded
def evaluate(run_dir, config, seed, overwrite) -> None:
    """Select the threshold on val maps and score the test split."""
    run = _resolve_run(run_dir)
    cfg = _load_config(run, config, seed)
    path = stage_evaluate(cfg, run, overwrite=overwrite)
    click.echo(path.read_text().strip())
    click.echo(str(path))


@main.command("ablate")
@_common
@_device_opt
@_guarded
def ablate(run_dir, config, seed, overwrite, device) -> None:
    """Compare the full method against its scorer-free variants."""
    run = _resolve_run(run_dir)
    cfg = _load_config(run, config, seed)
    path = stage_ablate(cfg, run, device=_resolve_device(device),
                        overwrite=overwrite)
    click.echo(path.read_text().strip())
    click.echo(str(path))


@main.command("sweep-patch-size")
@_common
@_device_opt
@_guarded
def sweep_patch_size(run_dir, config, seed, overwrite, device) -> None:
    """Evaluate the full method across the configured patch sizes."""
    run = _resolve_run(run_dir)
    cfg = _load_config(run, config, seed)
    path = stage_sweep(cfg, run, device=_resolve_device(device),
                       overwrite=overwrite)
    click.echo(path.read_text().strip())
    click.echo(str(path))


@main.command("report")
@_common
@_guarded
def report(run_dir, config, seed, overwrite) -> None:
    """Assemble the markdown report with figures and overlays."""
    run = _resolve_run(run_dir)
    cfg = _load_config(run, config, seed)
    click.echo(str(stage_report(cfg, run, overwrite=overwrite)))


if __name__ == "__main__":
    main()
