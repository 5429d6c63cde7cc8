"""Empirical decay of the worst-case error for the torus model.

Runs the draw / certify / subsample / recover pipeline over a grid of ``m``
and several seeds, writes one CSV row per run and fits the slope of
``log wce`` against ``log n_used``.

    python scripts/rate_experiment.py --m-grid 8,16,32,64 --seeds 3 --out rate.csv
"""

from __future__ import annotations

import csv
import sys
import time
from dataclasses import dataclass

from _common import dump, parse_config

from sampnum.io import fmt
from sampnum.pipeline import METHODS, fit_rate, run_recovery_experiment
from sampnum.spectrum import KernelModel


@dataclass
class RateConfig:
    """Worst-case error over a grid of approximation orders."""

    d: int = 1
    s: float = 1.0
    m_grid: tuple = (8, 16, 32, 64, 128)
    seeds: int = 3
    method: str = "subsample"
    trunc_ratio: float = 1e-2
    out: str = "rate.csv"
    plot: str = ""


def main(argv=None) -> int:
    cfg = parse_config(RateConfig, argv)
    if cfg.method not in METHODS:
        raise SystemExit(f"method must be one of {METHODS}")
    dump(cfg)
    model = KernelModel.torus(cfg.d, cfg.s)
    reports = []
    for m in cfg.m_grid:
        for seed in range(cfg.seeds):
            t0 = time.perf_counter()
            rep = run_recovery_experiment(model, m, cfg.method, seed=seed, trunc_ratio=cfg.trunc_ratio)
            reports.append(rep)
            print(f"m={m:4d} seed={seed} n_used={rep.n_used:6d} wce={rep.wce:.4e} "
                  f"sigma_m={rep.sigma_m:.4e} ({time.perf_counter() - t0:.1f}s)", file=sys.stderr)
    fields = list(reports[0].row())
    with open(cfg.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        w.writerows([[fmt(rep.row()[k]) for k in fields] for rep in reports])
    fit = fit_rate(reports, s=cfg.s, d=cfg.d)
    print(f"slope {fit.slope:.4f}  log-power {fit.log_power:.3f}  reference {fit.log_power_reference}")
    if cfg.plot:
        from sampnum.cli import plot_rate

        plot_rate(reports, cfg.plot)
    return 0


if __name__ == "__main__":
    sys.exit(main())
