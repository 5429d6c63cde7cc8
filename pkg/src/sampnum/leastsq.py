"""Evaluation matrices and the weighted least-squares recovery operator.

Row ``j`` of the weighted matrix is ``eta_l(x_j) / sqrt(rho_m(x_j))`` for
``l = 1..m-1``, and zero when ``rho_m(x_j) = 0``. Samples are weighted the
same way before the solve. The solve uses a Householder QR factorization;
the normal equations are available behind ``method="normal"`` for
cross-checking only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from .density import NodeSet
from .errors import ConsistencyError, RankError
from .spectrum import SpectralBasis

RANK_TOLERANCE = 1e-10


def row_weights(nodes: NodeSet) -> np.ndarray:
    """``1/sqrt(rho_m(x_j))``, or 0 where the density vanishes."""
    rho = nodes.density_values
    out = np.zeros(len(rho))
    pos = rho > 0
    out[pos] = 1.0 / np.sqrt(rho[pos])
    return out


@dataclass(frozen=True, eq=False)
class FrameMatrix:
    """An ``n x (m-1)`` matrix of (weighted) basis evaluations.

    The QR factorization and the extremal singular values are computed once
    on first use and cached.
    """

    entries: np.ndarray
    weighted: bool
    nodes: NodeSet
    m: int

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @cached_property
    def qr(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.qr(self.entries, mode="reduced")

    @cached_property
    def singular_values(self) -> np.ndarray:
        """Singular values in decreasing order (from the triangular factor)."""
        return linalg.svdvals(self.qr[1])

    @property
    def extremal_singular_values(self) -> tuple[float, float]:
        sv = self.singular_values
        return float(sv[-1]), float(sv[0])

    @property
    def full_rank(self) -> bool:
        tau_min, tau_max = self.extremal_singular_values
        return tau_max > 0 and tau_min > RANK_TOLERANCE * tau_max

    def require_full_rank(self) -> None:
        if self.shape[0] < self.shape[1]:
            raise RankError(f"{self.shape[0]} nodes cannot determine {self.shape[1]} coefficients")
        if not self.full_rank:
            tau_min, tau_max = self.extremal_singular_values
            raise RankError(
                f"evaluation matrix is numerically rank deficient "
                f"(tau_min={tau_min:.3e}, tau_max={tau_max:.3e})"
            )


def build_matrix(basis: SpectralBasis, nodes: NodeSet, m: int, weighted: bool = True) -> FrameMatrix:
    """Evaluate ``eta_1..eta_{m-1}`` at the nodes, optionally with density weights."""
    if m < 2:
        raise ValueError("m must be at least 2")
    if m - 1 > basis.count:
        raise ValueError(f"m - 1 = {m - 1} exceeds the {basis.count} retained eigenpairs")
    entries = basis.evaluate(nodes.points, 0, m - 1)
    if weighted:
        entries *= row_weights(nodes)[:, None]
    return FrameMatrix(entries, weighted, nodes, m)


def weight_samples(L: FrameMatrix, f_samples) -> np.ndarray:
    f = np.asarray(f_samples, dtype=complex).ravel()
    if f.shape[0] != L.shape[0]:
        raise ValueError(f"expected {L.shape[0]} samples, got {f.shape[0]}")
    return f * row_weights(L.nodes) if L.weighted else f


def solve_least_squares(L: FrameMatrix, samples, method: str = "qr") -> np.ndarray:
    """Minimize ``||L c - g||_2`` for already weighted samples ``g``.

    Parameters
    ----------
    method : {"qr", "normal"}
        ``"qr"`` solves ``R c = Q^* g``; ``"normal"`` forms ``L^* L`` and is
        meant for cross-checks.
    """
    g = np.asarray(samples, dtype=complex).ravel()
    if g.shape[0] != L.shape[0]:
        raise ValueError(f"expected {L.shape[0]} samples, got {g.shape[0]}")
    L.require_full_rank()
    if method == "qr":
        Q, R = L.qr
        return linalg.solve_triangular(R, Q.conj().T @ g)
    if method == "normal":
        A = L.entries
        return linalg.solve(A.conj().T @ A, A.conj().T @ g, assume_a="her")
    raise ValueError(f"unknown method {method!r}")


def frame_norm_bracket(n: int) -> tuple[float, float]:
    """Pseudo-inverse norm bracket ``[sqrt(2/(3n)), sqrt(2/n)]`` implied by frame bounds 1/2, 3/2."""
    return math.sqrt(2.0 / (3.0 * n)), math.sqrt(2.0 / n)


def operator_norm_bounds(L: FrameMatrix) -> tuple[float, float]:
    """Return ``(1/tau_max, 1/tau_min)``, which brackets ``||(L^*L)^{-1} L^*||``.

    When ``L^*L / n`` has spectrum in ``[1/2, 3/2]`` the result is also
    checked against :func:`frame_norm_bracket`.
    """
    L.require_full_rank()
    tau_min, tau_max = L.extremal_singular_values
    lower, upper = 1.0 / tau_max, 1.0 / tau_min
    n = L.shape[0]
    if n / 2 <= tau_min**2 and tau_max**2 <= 1.5 * n:
        lo, hi = frame_norm_bracket(n)
        if not (lo * (1 - 1e-12) <= lower and upper <= hi * (1 + 1e-12)):
            raise ConsistencyError("frame bounds hold but the norm bracket does not")
    return lower, upper


@dataclass(frozen=True, eq=False)
class RecoveryOperator:
    """Weighted least-squares recovery ``f -> sum_{k<m} c_k eta_k``."""

    frame: FrameMatrix
    basis: SpectralBasis

    @classmethod
    def build(cls, basis: SpectralBasis, nodes: NodeSet, m: int) -> RecoveryOperator:
        frame = build_matrix(basis, nodes, m, weighted=True)
        frame.require_full_rank()
        return cls(frame, basis)

    @property
    def m(self) -> int:
        return self.frame.m

    @property
    def nodes(self) -> NodeSet:
        return self.frame.nodes

    @cached_property
    def sample_map(self) -> np.ndarray:
        """The ``(m-1) x n`` matrix mapping raw samples to coefficients."""
        Q, R = self.frame.qr
        P = linalg.solve_triangular(R, Q.conj().T)
        return P * row_weights(self.nodes)[None, :]


def apply_recovery(op: RecoveryOperator, f_samples) -> np.ndarray:
    """Coefficients ``c_1..c_{m-1}`` of the recovered function from raw samples."""
    return solve_least_squares(op.frame, weight_samples(op.frame, f_samples))
