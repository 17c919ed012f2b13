#!/usr/bin/env python3
"""Run simulate -> dataset -> train -> evaluate -> compare for one preset.

    python3 scripts/run_pipeline.py --preset desk --out runs/desk
    python3 scripts/run_pipeline.py --preset paper --epochs 20 --out runs/paper-short

Artifacts land in ``--out``; the policy comparison report is printed at the end.
"""
import argparse
import sys
import time

from softfail.cli import main

STAGES = ("simulate", "dataset", "train", "evaluate", "compare")


def run(preset: str, out: str, seed: int | None, epochs: int | None, config: str | None) -> int:
    common = ["--preset", preset, "--out", out]
    if seed is not None:
        common += ["--seed", str(seed)]
    if config:
        common += ["--config", config]
    for stage in STAGES:
        extra = ["--epochs", str(epochs)] if stage == "train" and epochs else []
        t0 = time.perf_counter()
        code = main([stage, *common, *extra])
        print(f"[{stage}] exit {code} in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
        if code:
            return code
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--preset", choices=("paper", "desk"), default="desk")
    ap.add_argument("--out", default=None)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--epochs", type=int, help="override the preset epoch count")
    ap.add_argument("--config")
    a = ap.parse_args()
    sys.exit(run(a.preset, a.out or f"runs/{a.preset}", a.seed, a.epochs, a.config))
