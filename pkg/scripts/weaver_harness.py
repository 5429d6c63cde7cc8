"""Partition and halving harness for small and moderate frames.

Exhaustively partitions random tight frames and records how far the best
split stays inside the per-class bounds, then runs recursive halving in
the large regime and reports the size and frame bounds of the result
against the constant budget.

    python scripts/weaver_harness.py --frames 100 --halving-n 1024
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np
from _common import dump, parse_config

from sampnum.density import make_rng
from sampnum.weaver import (
    FiniteFrame, brute_force_partition, partition_bounds, recursive_halving, tight_frame,
)


@dataclass
class WeaverConfig:
    """Brute-force partition margins and large-regime halving."""

    frames: int = 100
    max_n: int = 14
    max_m: int = 4
    halving_n: int = 1024
    halving_m: tuple = (1, 2, 4)
    seed: int = 0


def harmonic(n: int, m: int) -> FiniteFrame:
    return FiniteFrame(np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(m)) / n) / math.sqrt(n))


def main(argv=None) -> int:
    cfg = parse_config(WeaverConfig, argv)
    dump(cfg)
    rng = make_rng(cfg.seed)
    margins, infeasible = [], 0
    for _ in range(cfg.frames):
        m = int(rng.integers(1, cfg.max_m + 1))
        n = int(rng.integers(2 * m, cfg.max_n + 1))
        frame = tight_frame(n, m, rng)
        part = brute_force_partition(frame)
        _, hi = partition_bounds(frame.eps, 1.0, 1.0)
        margins.append(hi - part.worst_upper)
        infeasible += not part.feasible
    print(f"partitions: {cfg.frames} frames, infeasible {infeasible}, "
          f"upper-bound margin min {min(margins):.4f} median {np.median(margins):.4f}")
    for m in cfg.halving_m:
        frame = harmonic(cfg.halving_n, m)
        res = recursive_halving(frame, 1.0, 1.0, 1.0)
        b, n = res.budget, frame.n
        lo, hi = res.achieved_bounds
        print(f"halving m={m} n={n}: #J={res.size} (c1 m = {b.c1 * m:.0f}) "
              f"bounds [{lo:.4f}, {hi:.4f}] vs [{b.c2 * m / n:.4f}, {b.c3 * m / n:.4f}] "
              f"steps={len(res.history) - 1} certified={res.certified}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
