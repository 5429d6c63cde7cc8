"""Weighted least-squares sampling recovery in reproducing kernel Hilbert spaces.

Random nodes from a spectrally weighted density are certified as a frame,
thinned to ``O(m)`` points by frame subsampling, and the resulting
least-squares operator is measured by its exact worst-case error.
"""

__version__ = "0.1.0"

from .concentration import certify_frame, smallest_n, tail_deviation
from .density import SamplingDensity, draw_nodes
from .leastsq import RecoveryOperator, build_matrix, solve_least_squares
from .pipeline import run_recovery_experiment, worst_case_error
from .spectrum import KernelModel, enumerate_spectrum
from .weaver import FiniteFrame, barrier_greedy_subsample, recursive_halving

__all__ = [
    "KernelModel", "enumerate_spectrum", "SamplingDensity", "draw_nodes",
    "build_matrix", "solve_least_squares", "RecoveryOperator", "certify_frame",
    "smallest_n", "tail_deviation", "FiniteFrame", "recursive_halving",
    "barrier_greedy_subsample", "run_recovery_experiment", "worst_case_error",
]
