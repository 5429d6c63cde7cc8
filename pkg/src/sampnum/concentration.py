"""Frame certification for random evaluation matrices.

``certify_frame`` checks that ``H = L^* L / n`` has its spectrum inside
``(1/2, 3/2)``. ``tail_deviation`` measures how far the empirical Gram
matrix of the weighted spectral tail is from its expectation
``diag(sigma_m^2, sigma_{m+1}^2, ...)``, on a finite truncation with a
rigorous additive slack for the discarded part.

All logarithms are natural.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, eigsh

from .density import NodeSet, SamplingDensity, draw_nodes, transformed_tail_bound
from .errors import TruncationError
from .leastsq import FrameMatrix, build_matrix, row_weights
from .spectrum import TORUS, SpectralBasis

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
LOWER_FRAME = 0.5
UPPER_FRAME = 1.5
DENSE_COLUMNS = 2500


def check_condition(m: int, n: int, r: float, N_of_m: float, constant: float = 10.0) -> bool:
    """True iff ``N(m) <= n / (constant * r * log n)``."""
    if n < 2 or r <= 0:
        raise ValueError("need n >= 2 and r > 0")
    return N_of_m <= n / (constant * r * math.log(n))


def smallest_n(m: int, factor: float = 40.0) -> int:
    """Smallest integer ``n >= 3`` with ``m <= n / (factor * log n)``.

    Since ``n / log n`` increases for ``n >= 3``, the scan starts at
    ``factor*m*log(factor*m)``, which never satisfies the inequality when
    ``factor*m > e``.
    """
    if m < 1 or factor <= 0:
        raise ValueError("need m >= 1 and factor > 0")
    fm = factor * m
    start = 3 if fm <= math.e else max(3, int(fm * math.log(fm)))
    while True:
        cand = np.arange(start, start + 4096, dtype=float)
        ok = m <= cand / (factor * np.log(cand))
        if ok.any():
            return int(cand[np.argmax(ok)])
        start += 4096


def failure_probability_bound(n: int, r: float) -> float:
    """Probability bound ``2 n^(1-r)`` for the frame event to fail."""
    return 2.0 * n ** (1.0 - r)


@dataclass(frozen=True)
class FrameCertificate:
    """Extremal eigenvalues of ``L^* L / n`` and whether they lie in ``(1/2, 3/2)``."""

    eigen_min: float
    eigen_max: float
    n: int
    columns: int

    @property
    def passed(self) -> bool:
        return LOWER_FRAME < self.eigen_min and self.eigen_max < UPPER_FRAME


def certify_frame(L: FrameMatrix) -> FrameCertificate:
    """Extremal eigenvalues of the Hermitian matrix ``H = L^* L / n``."""
    n, cols = L.shape
    H = L.entries.conj().T @ L.entries / n
    ev = linalg.eigvalsh(H)
    # H is positive semidefinite; clip round-off below zero
    return FrameCertificate(max(float(ev[0]), 0.0), float(ev[-1]), n, cols)


def _certify_trial(args):
    density, n, seed, stream, weighted = args
    nodes = draw_nodes(density, n, seed, stream)
    cert = certify_frame(build_matrix(density.basis, nodes, density.m, weighted))
    return cert.eigen_min, cert.eigen_max


def certification_trials(
    density: SamplingDensity, n: int, trials: int, seed: int,
    weighted: bool = True, jobs: int = 1,
) -> np.ndarray:
    """Extremal eigenvalues of ``H`` for ``trials`` independent node draws.

    Trial ``t`` uses RNG stream ``t``, so results do not depend on ``jobs``.
    Returns an array of shape ``(trials, 2)``.
    """
    tasks = [(density, n, seed, t, weighted) for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_certify_trial, tasks, chunksize=max(1, trials // (4 * jobs))))
    else:
        out = [_certify_trial(t) for t in tasks]
    return np.array(out, dtype=float).reshape(trials, 2)


def deviation_probability(t: float, n: int, M2: float) -> float:
    """Matrix Bernstein-type bound ``2^(3/4) n exp(-t^2 n / (21 M^2))``."""
    return 2.0**0.75 * n * math.exp(-(t**2) * n / (21.0 * M2))


@dataclass(frozen=True)
class TailDeviationReport:
    """Deviation of the weighted tail Gram matrix from its expectation.

    Attributes
    ----------
    deviation : float
        ``||Phi^* Phi / n - Lambda||`` on the truncated tail.
    slack : float
        Rigorous bound on how much the discarded columns can change it.
    threshold : float
        ``F = max(8 r log(n)/n * M^2 kappa^2, sigma_m^2)``.
    norm_lambda : float
        ``sigma_m^2``.
    """

    deviation: float
    slack: float
    threshold: float
    norm_lambda: float
    M2: float
    M_trunc: int
    n: int
    r: float
    rigorous: bool

    @property
    def exceeds(self) -> bool:
        """Conservative failure flag: the deviation might reach ``F``.

        A vanishing tail can never fail, even though then ``F = 0``.
        """
        bound = self.deviation + self.slack
        return bound > 0 and bound >= self.threshold

    @property
    def probability_bound(self) -> float:
        return 2.0**0.75 * self.n ** (1.0 - self.r)


def _tail_beyond(basis: SpectralBasis, x, M: int) -> np.ndarray:
    """``sum_{k>M} |e_k(x)|^2`` at each node."""
    if basis.model.family == TORUS:
        value, rem = basis.tail_sum(M + 1)
        return np.full(len(x), value + rem)
    return basis.tail_diag(x, M + 1)


def truncation_level(basis: SpectralBasis, density: SamplingDensity, tol: float) -> int:
    """Smallest ``M`` whose discarded weighted tail is at most ``tol`` everywhere.

    For the torus the weighted tail is ``sum_{k>M} sigma_k^2``; for a stored
    finite sequence the full length is returned.
    """
    if basis.model.family != TORUS:
        return len(basis.model.sigma)
    lam = basis.lambdas
    tails = basis.trace - np.cumsum(lam) + basis.trace_remainder
    ok = np.nonzero(tails[density.m - 1 :] <= tol)[0]
    if ok.size == 0:
        raise TruncationError(
            f"tail beyond {basis.count} retained eigenpairs is {tails[-1]:.3e} > {tol:.3e}; "
            "enumerate more eigenpairs or relax the tolerance"
        )
    return int(density.m + ok[0])


def tail_deviation(
    density: SamplingDensity, nodes: NodeSet, r: float = 2.0,
    M_trunc: int | None = None, tol: float = 1e-4,
) -> TailDeviationReport:
    """Spectral deviation of the weighted tail matrix with rows ``y_i``.

    ``y_i = (e_m(x_i), ..., e_M(x_i)) / sqrt(rho_m(x_i))``. If ``M_trunc`` is
    not given it is chosen by :func:`truncation_level` with ``tol``.
    """
    basis, m = density.basis, density.m
    if M_trunc is None:
        M_trunc = truncation_level(basis, density, tol)
    if M_trunc > basis.count:
        raise TruncationError(f"M_trunc={M_trunc} exceeds the {basis.count} retained eigenpairs")
    n = len(nodes)
    w = row_weights(nodes)
    lam = basis.lambdas[m - 1 : M_trunc]
    sigma_m2 = float(basis.lambdas[m - 1]) if m <= basis.count else 0.0
    M2 = transformed_tail_bound(density)
    threshold = float(max(8.0 * r * math.log(n) / n * M2 * GOLDEN**2, sigma_m2))

    rigorous = True
    if lam.size == 0:
        deviation, gram_norm = 0.0, 0.0
    else:
        Phi = basis.right_vectors(nodes.points, m - 1, M_trunc) * w[:, None]
        if lam.size <= DENSE_COLUMNS:
            G = Phi.conj().T @ Phi / n
            G[np.diag_indices_from(G)] -= lam
            ev = linalg.eigvalsh(G)
            deviation = float(max(abs(ev[0]), abs(ev[-1])))
        else:
            rigorous = False

            def mv(v):
                v = np.asarray(v).ravel()
                return Phi.conj().T @ (Phi @ v) / n - lam * v

            op = LinearOperator((lam.size, lam.size), matvec=mv, dtype=complex)
            v0 = np.ones(lam.size, dtype=complex)
            deviation = float(abs(eigsh(op, k=1, which="LM", v0=v0, return_eigenvectors=False)[0]))
        gram_norm = deviation + float(lam[0])

    t = float(np.max(_tail_beyond(basis, nodes.points, M_trunc) * w**2))
    lam_next = float(basis.lambdas[M_trunc]) if M_trunc < basis.count else basis.tail_sum(M_trunc + 1)[0]
    slack = math.sqrt(gram_norm * t) + max(t, lam_next)
    return TailDeviationReport(deviation, slack, threshold, sigma_m2, M2, M_trunc, n, r, rigorous)
