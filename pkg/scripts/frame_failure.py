"""Monte Carlo frequency of frame-certification failures against the bound ``2 n^(1-r)``.

For each ``m`` the node count is the smallest ``n`` with
``2(m-1) <= n / (10 r log n)``; the script also reports how the failure
frequency grows when ``n`` is scaled down below that value.

    python scripts/frame_failure.py --model legendre --m-grid 3,5,8 --trials 2000
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np
from _common import dump, parse_config

from sampnum.concentration import certification_trials, failure_probability_bound, smallest_n
from sampnum.density import SamplingDensity
from sampnum.spectrum import KernelModel, enumerate_spectrum


@dataclass
class FailureConfig:
    """Frame failure frequencies for random weighted nodes."""

    model: str = "torus"
    d: int = 1
    s: float = 1.0
    ratio: float = 0.5
    m_grid: tuple = (2, 4, 8, 16)
    shrink: tuple = (1.0, 0.25, 0.1, 0.05)
    r: float = 2.0
    trials: int = 1000
    seed: int = 0
    jobs: int = 1


def main(argv=None) -> int:
    cfg = parse_config(FailureConfig, argv)
    dump(cfg)
    if cfg.model == "torus":
        model = KernelModel.torus(cfg.d, cfg.s)
    else:
        model = KernelModel.legendre_geometric(cfg.ratio, 80)
    print("m      n  shrink  failures  frequency  bound  3-sigma")
    for m in cfg.m_grid:
        basis = enumerate_spectrum(model, max(m, 80))
        rho = SamplingDensity.from_basis(basis, m)
        n0 = smallest_n(max(m - 1, 1), 2 * 10 * cfg.r)
        for shrink in cfg.shrink:
            n = max(m - 1, int(n0 * shrink))
            eig = certification_trials(rho, n, cfg.trials, cfg.seed, jobs=cfg.jobs)
            fails = int(np.sum(~((eig[:, 0] > 0.5) & (eig[:, 1] < 1.5))))
            p = fails / cfg.trials
            print(f"{m:<4d} {n:6d}  {shrink:5.2f}  {fails:8d}  {p:9.4f}  "
                  f"{failure_probability_bound(n, cfg.r):.4f}  {3 * math.sqrt(p * (1 - p) / cfg.trials):.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
