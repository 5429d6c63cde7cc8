"""End-to-end recovery experiments and the exact worst-case error oracle.

For a recovery operator built on ``m - 1`` basis functions, a function
``f = sum_k c_k e_k`` with ``||c||_2 <= 1`` is mapped to the
L2-coefficients of ``f - S f``. On the first ``M`` eigenpairs this is the
matrix

    Err = [[D_head - B_head, -B_tail],
           [0,               D_tail]],

with ``D = diag(sigma_k)`` and ``B = P E D`` the coefficients recovered from
the samples of each ``e_k``. The worst-case error on the truncation is the
largest singular value of ``Err``; the discarded part is bounded separately
to give a certified upper value.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .concentration import certify_frame, smallest_n
from .density import SamplingDensity, draw_nodes
from .errors import CertificationError, RankError, TruncationError
from .leastsq import RecoveryOperator, build_matrix, row_weights
from .spectrum import TORUS, KernelModel, SpectralBasis, enumerate_spectrum
from .weaver import FiniteFrame, barrier_greedy_subsample, remark_constant_chain

RANDOM_ONLY = "random"
RANDOM_THEN_SUBSAMPLE = "subsample"
METHODS = (RANDOM_ONLY, RANDOM_THEN_SUBSAMPLE)
DENSE_ERROR_LIMIT = 1000
DEFAULT_TRUNC_RATIO = 1e-2
MAX_RETRIES = 20


@dataclass(frozen=True)
class ErrorReport:
    """Worst-case error of one recovery operator with provenance.

    ``wce`` is exact on the first ``M_trunc`` eigenpairs and therefore a lower
    bound for the full worst-case error; ``wce_upper`` adds a certified bound
    for everything beyond ``M_trunc``.
    """

    m: int
    n_drawn: int
    n_used: int
    wce: float
    wce_upper: float
    sigma_m: float
    bound_rhs: float
    retries: int
    seed: int | None
    method: str
    M_trunc: int
    split_mismatch: float = 0.0

    def row(self) -> dict:
        return dataclasses.asdict(self)


CSV_FIELDS = ("m", "n_drawn", "n_used", "wce", "sigma_m", "bound_rhs", "retries", "seed", "method")


def truncation_for(basis: SpectralBasis, m: int, ratio: float = DEFAULT_TRUNC_RATIO) -> int:
    """Smallest ``M >= m`` with ``sigma_{M+1} <= ratio * sigma_m``.

    For a stored finite sequence the truncation never exceeds its length
    (beyond it every ``sigma`` vanishes).
    """
    sig = basis.sigmas
    if basis.model.family != TORUS:
        full = np.asarray(basis.model.sigma)
        small = np.nonzero(full[m:] <= ratio * full[m - 1])[0]
        return int(m + small[0]) if small.size else len(full)
    if m > basis.count:
        raise TruncationError(f"sigma_m needs {m} eigenpairs, have {basis.count}")
    small = np.nonzero(sig[m:] <= ratio * sig[m - 1])[0]
    if small.size == 0:
        raise TruncationError(
            f"no sigma_(M+1) <= {ratio:g} sigma_m among {basis.count} eigenpairs; enumerate more"
        )
    return int(m + small[0])


def basis_for(model: KernelModel, m: int, ratio: float = DEFAULT_TRUNC_RATIO) -> SpectralBasis:
    """Enumerate enough eigenpairs to truncate at ``sigma_{M+1} <= ratio sigma_m``."""
    if model.family != TORUS:
        return enumerate_spectrum(model, len(model.sigma))
    count = max(4 * m, 64)
    while True:
        basis = enumerate_spectrum(model, count)
        try:
            truncation_for(basis, m, ratio)
            return basis
        except TruncationError:
            count *= 2


def _tail_beyond(basis: SpectralBasis, x, M: int) -> np.ndarray:
    if basis.model.family == TORUS:
        value, rem = basis.tail_sum(M + 1)
        return np.full(len(x), value + rem)
    return basis.tail_diag(x, M + 1)


def _sigma_after(basis: SpectralBasis, M: int) -> float:
    if basis.model.family == TORUS:
        return float(basis.sigmas[M])
    full = np.asarray(basis.model.sigma)
    return float(full[M]) if M < len(full) else 0.0


def _recovered_coefficients(op: RecoveryOperator, start: int, stop: int, chunk: int = 2048) -> np.ndarray:
    """``B[:, start:stop]``: recovered head coefficients of ``e_k`` for ``k = start+1..stop``."""
    P = op.sample_map
    x = op.nodes.points
    basis = op.basis
    out = np.empty((P.shape[0], stop - start), dtype=complex)
    for s in range(start, stop, chunk):
        e = min(stop, s + chunk)
        out[:, s - start : e - start] = P @ basis.right_vectors(x, s, e)
    return out


def _largest_root(d2: np.ndarray, Y: np.ndarray, floor: float) -> tuple[float, np.ndarray]:
    """Largest eigenvalue above ``floor = max(d2)`` of ``diag(d2) + Y Y^*``.

    Such an eigenvalue ``mu`` makes ``Y^* (mu - d2)^-1 Y`` have eigenvalue 1;
    the largest eigenvalue of that matrix decreases in ``mu``, so the root is
    found by safeguarded Newton iteration. Returns ``(floor, None)`` when no
    eigenvalue lies above the floor (to relative precision 1e-15).
    """
    if Y.size == 0 or not np.any(Y):
        return floor, None

    def phi(mu):
        w = 1.0 / (mu - d2)
        Mmat = Y.conj().T @ (w[:, None] * Y)
        ev, V = linalg.eigh(Mmat)
        v = V[:, -1]
        z = Y @ v
        slope = -float(np.sum(w**2 * np.abs(z) ** 2))
        return ev[-1] - 1.0, slope, v

    lo = floor * (1.0 + 1e-15) + 1e-300
    hi = floor + float(np.linalg.norm(Y, 2)) ** 2 * (1.0 + 1e-12) + 1e-300
    f_lo, _, _ = phi(lo)
    if f_lo <= 0:
        return floor, None
    mu = hi
    for _ in range(200):
        f, slope, v = phi(mu)
        if f > 0:
            lo = mu
        else:
            hi = mu
        if abs(f) < 1e-15 or hi - lo <= 1e-15 * hi:
            break
        step = mu - f / slope
        mu = step if lo < step < hi else 0.5 * (lo + hi)
    z = Y @ v
    vec = z / (mu - d2)
    return mu, vec / np.linalg.norm(vec)


def worst_case_error(
    op: RecoveryOperator, M_trunc: int | None = None, trunc_ratio: float = DEFAULT_TRUNC_RATIO,
    dense_limit: int = DENSE_ERROR_LIMIT,
) -> ErrorReport:
    """Worst-case L2 error of ``op`` over the unit ball, exact on ``M_trunc`` eigenpairs.

    Up to ``dense_limit`` eigenpairs the error matrix is formed and its SVD
    taken; beyond that the exact reproduction of the head reduces the
    problem to the largest eigenvalue of a diagonal plus rank-``(m-1)``
    matrix, solved through its secular equation.

    The reported ``split_mismatch`` compares ``wce^2`` with
    ``||D_tail c||^2 + ||B_tail c||^2`` (projection error plus least-squares
    error of the tail) at the maximizing input ``c``.
    """
    basis, m = op.basis, op.m
    if M_trunc is None:
        M_trunc = truncation_for(basis, m, trunc_ratio)
    if M_trunc < m:
        raise ValueError("M_trunc must be at least m")
    if M_trunc > basis.count or (basis.model.family == TORUS and M_trunc >= basis.count):
        raise TruncationError(f"M_trunc={M_trunc} needs more than the {basis.count} retained eigenpairs")
    h = m - 1
    sig = basis.sigmas[:M_trunc]
    B = _recovered_coefficients(op, 0, M_trunc)
    head_residual = np.diag(sig[:h]) - B[:, :h]
    Bt = B[:, h:]
    d_tail = sig[h:]

    if M_trunc <= dense_limit:
        Err = np.zeros((M_trunc, M_trunc), dtype=complex)
        Err[:h, :] = -B
        Err[np.arange(M_trunc), np.arange(M_trunc)] += sig
        _, s, Vh = linalg.svd(Err)
        wce2 = float(s[0] ** 2)
        c = Vh[0].conj()
        ct = c[h:]
    else:
        mu, ct = _largest_root(d_tail**2, Bt.conj().T, float(d_tail[0] ** 2))
        if ct is None:
            ct = np.zeros(len(d_tail), dtype=complex)
            ct[0] = 1.0
        # the head block only carries round-off from the exact reproduction;
        # it enters the certified upper value below
        wce2 = mu
    split = float(np.sum(d_tail**2 * np.abs(ct) ** 2) + np.linalg.norm(Bt @ ct) ** 2)
    mismatch = float(abs(split - wce2) / wce2) if wce2 > 0 else 0.0

    tau_min = op.frame.extremal_singular_values[0]
    w = row_weights(op.nodes)
    tail_mass = float(np.sum(w**2 * _tail_beyond(basis, op.nodes.points, M_trunc)))
    head_slack = float(np.linalg.norm(head_residual, 2))
    upper2 = (math.sqrt(wce2) + head_slack) ** 2 + tail_mass / tau_min**2 + _sigma_after(basis, M_trunc) ** 2
    n = len(op.nodes)
    return ErrorReport(
        m=m, n_drawn=n, n_used=n, wce=math.sqrt(wce2), wce_upper=math.sqrt(upper2),
        sigma_m=float(basis.sigmas[m - 1]), bound_rhs=explicit_bound_rhs(basis, m),
        retries=0, seed=op.nodes.seed, method="given", M_trunc=M_trunc, split_mismatch=mismatch,
    )


def explicit_bound_rhs(basis: SpectralBasis, m: int) -> float:
    """``c5 * log(m)/m * sum_{k >= floor(m/2)} sigma_k^2`` with ``c5 = 113.35...``."""
    if m < 2:
        raise ValueError("m must be at least 2")
    tail, rem = basis.tail_sum(max(1, m // 2))
    return remark_constant_chain().c5 * math.log(m) / m * (tail + rem)


def run_recovery_experiment(
    model: KernelModel, m: int, method: str = RANDOM_THEN_SUBSAMPLE, r: float = 2.0,
    seed: int = 0, target_ratio: float = 4.0, trunc_ratio: float = DEFAULT_TRUNC_RATIO,
    max_retries: int = MAX_RETRIES, basis: SpectralBasis | None = None,
) -> ErrorReport:
    """Draw, certify, optionally subsample, recover and measure the worst-case error.

    The node count is the smallest ``n`` with ``m <= n / (20 r log n)``
    (``n = 497`` for ``m = 2``, ``r = 2``). A frame that fails certification
    is redrawn from the next RNG stream, up to ``max_retries`` times.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    basis = basis_for(model, m, trunc_ratio) if basis is None else basis
    density = SamplingDensity.from_basis(basis, m)
    n = smallest_n(m, 20.0 * r)
    for retries in range(max_retries + 1):
        nodes = draw_nodes(density, n, seed, stream=retries)
        L = build_matrix(basis, nodes, m, weighted=True)
        if certify_frame(L).passed:
            break
    else:
        raise CertificationError(
            f"frame certification failed {max_retries + 1} times (m={m}, n={n}); "
            "parameters are likely outside the concentration regime"
        )

    if method == RANDOM_THEN_SUBSAMPLE:
        frame = FiniteFrame(L.entries, scale=1.0 / math.sqrt(n))
        target = min(n, int(math.ceil(target_ratio * m)))
        sub = barrier_greedy_subsample(frame, target)
        if not sub.certified:
            raise RankError("greedy subsample did not certify a positive lower frame bound")
        del frame, L
        nodes = nodes.subset(sub.J)
    else:
        del L
    op = RecoveryOperator.build(basis, nodes, m)
    report = worst_case_error(op, trunc_ratio=trunc_ratio)
    return dataclasses.replace(report, n_drawn=n, retries=retries, seed=seed, method=method)


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of ``log wce`` against ``log n_used``.

    ``log_power`` is the fitted exponent ``p`` in ``wce * n^s ~ (log n)^p``
    and is a diagnostic only; the grid cannot separate nearby powers.
    """

    n_used: np.ndarray
    wce: np.ndarray
    slope: float
    intercept: float
    residuals: np.ndarray
    log_power: float | None = None
    log_power_reference: tuple[float, float] | None = None


def fit_rate(reports, s: float | None = None, d: int | None = None) -> RateFit:
    """Fit the empirical decay exponent of the worst-case error.

    Requires at least five reports whose ``n_used`` spans two octaves.
    With ``s`` the log-power residual diagnostic is also fitted, and with
    ``d`` the reference powers ``(d-1)s + 1/2`` and ``(d-1)s + s`` are
    attached for comparison.
    """
    n = np.array([rep.n_used for rep in reports], dtype=float)
    e = np.array([rep.wce for rep in reports], dtype=float)
    if len(n) < 5 or n.max() < 4 * n.min() or np.any(e <= 0):
        raise ValueError("rate fit needs >= 5 positive points spanning at least two octaves")
    x, y = np.log(n), np.log(e)
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    log_power = reference = None
    if s is not None and n.min() > math.e:
        log_power = float(np.polyfit(np.log(x), y + s * x, 1)[0])
        if d is not None:
            reference = ((d - 1) * s + 0.5, (d - 1) * s + s)
    return RateFit(n, e, float(slope), float(intercept), residuals, log_power, reference)
