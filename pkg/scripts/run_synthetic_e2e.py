#!/usr/bin/env python3
"""End-to-end synthetic experiment: dataset, training, ablation, sweep, report.

Runs every pipeline stage into one run directory and prints the resulting
metric tables. The desk preset reproduces the full method on a single CPU
core; smoke is a minutes-scale plumbing check.

Usage:
    python3 scripts/run_synthetic_e2e.py --out runs/e2e --preset desk
"""

import argparse
import sys
import time
from pathlib import Path

from arepas import pipeline as pl
from arepas.config import desk_scale_config, smoke_config
from arepas.experiments import stage_ablate, stage_sweep
from arepas.report import stage_report

PRESETS = {"desk": desk_scale_config, "smoke": smoke_config}


def log(msg: str) -> None:
    print(f"[e2e] {msg}", flush=True)


def timed(label: str, fn, *args, **kwargs):
    start = time.monotonic()
    out = fn(*args, **kwargs)
    log(f"{label}: done in {time.monotonic() - start:.1f}s")
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, required=True, help="run directory")
    parser.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--skip-sweep", action="store_true",
                        help="skip the patch-size sweep stage")
    parser.add_argument("--overwrite", action="store_true")
    args = parser.parse_args(argv)

    cfg = PRESETS[args.preset](seed=args.seed)
    run = pl.RunPaths(args.out)
    run.root.mkdir(parents=True, exist_ok=True)
    if not run.config_path.exists():
        cfg.save(run.config_path)

    def epoch_logger(entry):
        log("  " + ", ".join(f"{k}={v:.4g}" for k, v in sorted(entry.items())
                             if isinstance(v, (int, float))))

    timed("synth-generate", pl.stage_synth, cfg, run, overwrite=args.overwrite)
    timed("preprocess", pl.stage_preprocess, cfg, run, overwrite=args.overwrite)
    timed("train-recon", pl.stage_train_recon, cfg, run,
          overwrite=args.overwrite, progress=epoch_logger)
    timed("train-recon --no-augment", pl.stage_train_recon, cfg, run,
          no_augment=True, overwrite=args.overwrite, progress=epoch_logger)
    timed("train-scorer", pl.stage_train_scorer, cfg, run,
          overwrite=args.overwrite, progress=epoch_logger)
    timed("infer", pl.stage_infer, cfg, run, overwrite=args.overwrite)
    timed("evaluate", pl.stage_evaluate, cfg, run, overwrite=args.overwrite)
    ablation_csv = timed("ablate", stage_ablate, cfg, run,
                         overwrite=args.overwrite)
    if not args.skip_sweep:
        sweep_csv = timed("sweep-patch-size", stage_sweep, cfg, run,
                          overwrite=args.overwrite)
        log("sweep results:\n" + sweep_csv.read_text())
    timed("report", stage_report, cfg, run, overwrite=args.overwrite)

    log("ablation results:\n" + ablation_csv.read_text())
    log(f"report: {run.report_dir / 'report.md'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
