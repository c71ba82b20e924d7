"""Run an experiment suite from a TOML file and print the metrics table.

    python scripts/run_suite.py configs/tvpg_continue.toml --out-dir runs/tvpg
"""
import argparse
import logging
import time
from dataclasses import asdict

from crowdsense.harness.experiment import SuiteConfig, run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--out-dir")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--workers", type=int)
    a = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    cfg = SuiteConfig.load(a.config)
    over = {k: v for k, v in (("trials", a.trials), ("workers", a.workers)) if v is not None}
    if over:
        cfg = SuiteConfig(**{**asdict(cfg), **over})
    t = time.perf_counter()
    res = run_experiment(cfg, a.out_dir)
    print(res.table.to_markdown())
    print(f"{len(res.records)} trials in {time.perf_counter() - t:.1f}s, {len(res.errors)} errors")


if __name__ == "__main__":
    main()
