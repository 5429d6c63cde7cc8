"""Lower frame bound of the greedy selection as a function of its size.

Draws certified random nodes for the torus model, runs the barrier greedy
once per budget ``k m`` and prints the achieved frame bounds of the
selected rows, normalized so that the full node set has bounds near one.

    python scripts/greedy_budget.py --m 32 --budgets 2,3,4,6,8
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

from _common import dump, parse_config

from sampnum.concentration import certify_frame, smallest_n
from sampnum.density import SamplingDensity, draw_nodes
from sampnum.leastsq import build_matrix
from sampnum.spectrum import KernelModel, enumerate_spectrum
from sampnum.weaver import FiniteFrame, barrier_greedy_subsample


@dataclass
class GreedyConfig:
    """Greedy subsampling quality versus budget."""

    m: int = 32
    d: int = 1
    s: float = 1.0
    budgets: tuple = (1.5, 2.0, 3.0, 4.0, 6.0, 8.0)
    seed: int = 0


def main(argv=None) -> int:
    cfg = parse_config(GreedyConfig, argv)
    dump(cfg)
    basis = enumerate_spectrum(KernelModel.torus(cfg.d, cfg.s), cfg.m)
    rho = SamplingDensity.from_basis(basis, cfg.m)
    n = smallest_n(cfg.m, 40.0)
    L = build_matrix(basis, draw_nodes(rho, n, cfg.seed), cfg.m)
    cert = certify_frame(L)
    print(f"n={n} full-frame bounds [{cert.eigen_min:.4f}, {cert.eigen_max:.4f}]")
    frame = FiniteFrame(L.entries, scale=1.0 / math.sqrt(n))
    for k in cfg.budgets:
        size = max(cfg.m - 1, int(math.ceil(k * cfg.m)))
        res = barrier_greedy_subsample(frame, size)
        lo, hi = res.achieved_bounds
        # rescale so that a perfectly balanced selection would give (1, 1)
        scale = n / size
        print(f"budget {k:4.1f} m -> {size:5d} rows  bounds*n/#J = [{lo * scale:.4f}, {hi * scale:.4f}]  "
              f"condition {hi / lo:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
