"""Model kernels given through their spectral data.

Two families are supported:

* ``torus``: the tensor-product mixed Sobolev kernel on ``[0, 1)^d`` whose
  eigenvalues are ``prod_j (1 + (2 pi |k_j|)^(2s))^(-1)`` for ``k`` in
  ``Z^d`` and whose eigenfunctions are the complex exponentials.
* ``legendre``: an explicit finite sequence of singular numbers attached to
  the orthonormal Legendre polynomials on ``[-1, 1]`` with measure ``dx/2``.

Indices follow the one-based convention of the theory: ``sigma_1`` is
``basis.sigmas[0]`` and ``eta_1`` is column 0 of :meth:`SpectralBasis.evaluate`.
"""

from __future__ import annotations

import csv
import heapq
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidModelError, TruncationError

TORUS = "torus"
LEGENDRE = "legendre"


@dataclass(frozen=True)
class KernelModel:
    family: str
    d: int = 1
    s: float | None = None
    sigma: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.family == TORUS:
            if int(self.d) != self.d or self.d < 1:
                raise InvalidModelError(f"dimension must be a positive integer, got {self.d}")
            if self.s is None or not self.s > 0.5:
                raise InvalidModelError(
                    f"smoothness s={self.s} gives an infinite trace; need s > 1/2"
                )
        elif self.family == LEGENDRE:
            if self.d != 1:
                raise InvalidModelError("the Legendre model lives on [-1, 1] (d = 1)")
            sig = np.asarray(self.sigma if self.sigma is not None else (), dtype=float)
            if sig.size == 0:
                raise InvalidModelError("empty sigma sequence")
            if not np.all(np.isfinite(sig)) or np.any(sig <= 0):
                raise InvalidModelError("sigma must be finite and strictly positive")
            if np.any(np.diff(sig) > 0):
                raise InvalidModelError("sigma must be non-increasing")
        else:
            raise InvalidModelError(f"unknown model family {self.family!r}")

    @classmethod
    def torus(cls, d: int, s: float) -> KernelModel:
        return cls(TORUS, d=int(d), s=float(s))

    @classmethod
    def legendre(cls, sigma) -> KernelModel:
        return cls(LEGENDRE, d=1, sigma=tuple(float(v) for v in sigma))

    @classmethod
    def legendre_geometric(cls, ratio: float, count: int) -> KernelModel:
        """Legendre model with ``sigma_k^2 = ratio^(k-1)``, ``k = 1..count``."""
        return cls.legendre(np.sqrt(ratio) ** np.arange(count))


def _torus_weight(k_abs, s):
    return 1.0 / (1.0 + (2.0 * math.pi * k_abs) ** (2.0 * s))


def _torus_tail_integral(K: float, s: float) -> tuple[float, float]:
    """``int_K^inf (1 + (2 pi x)^(2s))^-1 dx`` and a bound on its error.

    Expanding the integrand in powers of ``q = (2 pi x)^(-2s) < 1`` gives an
    alternating series with decreasing terms, so the first omitted term
    bounds the truncation error.
    """
    q = (2.0 * math.pi * K) ** (-2.0 * s)
    terms = [K * q ** (j + 1) / (2.0 * s * (j + 1) - 1.0) for j in range(6)]
    value = math.fsum(t if j % 2 == 0 else -t for j, t in enumerate(terms[:-1]))
    return value, terms[-1]


def _torus_trace_1d(s: float, tol: float = 1e-12) -> tuple[float, float]:
    """Return ``sum_{k in Z} (1 + (2 pi |k|)^(2s))^-1`` and a bound on its error.

    The sum beyond ``K`` is bracketed by the integrals of the (decreasing)
    summand over ``[K+1, inf)`` and ``[K, inf)``; ``K`` doubles until the
    bracket is narrower than ``tol`` or the cap is reached.
    """
    K = 1 << 16
    cap = 1 << 24
    head = 0.0
    done = 0
    while True:
        ks = np.arange(done + 1, K + 1, dtype=float)
        head += math.fsum(_torus_weight(ks, s))
        done = K
        upper, err_u = _torus_tail_integral(K, s)
        lower, err_l = _torus_tail_integral(K + 1, s)
        half_width = 0.5 * (upper - lower) + max(err_u, err_l)
        if 2.0 * half_width <= tol or K >= cap:
            break
        K *= 2
    tail = 0.5 * (upper + lower)
    # two symmetric half-lines plus the rounding of the head sum
    remainder = 2.0 * half_width + 4 * sys.float_info.epsilon * (1.0 + 2.0 * head)
    return 1.0 + 2.0 * (head + tail), remainder


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Ordered eigensystem of a model embedding ``H(K) -> L2``.

    ``sigmas`` are the retained singular numbers in non-increasing order,
    ``labels`` one row per eigenpair (frequency vector or polynomial degree).
    """

    model: KernelModel
    sigmas: np.ndarray
    labels: np.ndarray
    trace: float
    trace_remainder: float = 0.0
    _lambda_head: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.sigmas.setflags(write=False)
        self.labels.setflags(write=False)
        lam = self.sigmas**2
        lam.setflags(write=False)
        object.__setattr__(self, "_lambda_head", lam)

    @property
    def count(self) -> int:
        return len(self.sigmas)

    @property
    def lambdas(self) -> np.ndarray:
        return self._lambda_head

    @property
    def dim(self) -> int:
        return self.model.d

    def right_vectors(self, x, start=0, stop=None):
        """Values of ``e_k = sigma_k eta_k`` for ``k = start+1 .. stop``."""
        stop = self.count if stop is None else stop
        return self.evaluate(x, start, stop) * self.sigmas[start:stop]

    def tail_sum(self, m: int) -> tuple[float, float]:
        """``sum_{k >= m} sigma_k^2`` and a bound on its numerical remainder."""
        raise NotImplementedError

    def evaluate(self, x, start=0, stop=None) -> np.ndarray:
        raise NotImplementedError

    def head_diag(self, x, m: int) -> np.ndarray:
        """``sum_{k < m} |eta_k(x)|^2`` at every row of ``x``."""
        raise NotImplementedError

    def tail_diag(self, x, m: int) -> np.ndarray:
        """``sum_{k >= m} |e_k(x)|^2`` at every row of ``x`` (full tail)."""
        raise NotImplementedError

    def as_points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1, 1)
        elif x.ndim == 1:
            x = x.reshape(-1, 1) if self.dim == 1 else x.reshape(1, -1)
        if x.shape[1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates, got {x.shape[1]}")
        return x


class TorusBasis(SpectralBasis):
    """Complex exponentials ``exp(2 pi i k.x)`` on the torus."""

    def evaluate(self, x, start=0, stop=None):
        x = self.as_points(x)
        stop = self.count if stop is None else stop
        k = self.labels[start:stop]
        return np.exp(2j * np.pi * (x @ k.T.astype(float)))

    def tail_sum(self, m):
        if m < 1:
            raise ValueError("index m is one-based")
        if m - 1 > self.count:
            raise TruncationError(
                f"tail from index {m} needs {m - 1} retained eigenvalues, have {self.count}"
            )
        value = self.trace - math.fsum(self.lambdas[: m - 1])
        # round-off from the subtraction is of the order of the trace itself
        remainder = self.trace_remainder + 4 * sys.float_info.epsilon * self.trace
        return max(value, 0.0), remainder

    def head_diag(self, x, m):
        x = self.as_points(x)
        return np.full(len(x), float(m - 1))

    def tail_diag(self, x, m):
        x = self.as_points(x)
        return np.full(len(x), self.tail_sum(m)[0])


class LegendreBasis(SpectralBasis):
    """Orthonormal Legendre polynomials on ``[-1, 1]`` w.r.t. ``dx/2``."""

    @property
    def full_sigmas(self) -> np.ndarray:
        return np.asarray(self.model.sigma)

    def evaluate(self, x, start=0, stop=None):
        stop = self.count if stop is None else stop
        return legendre_orthonormal(self.as_points(x)[:, 0], stop)[:, start:stop]

    def tail_sum(self, m):
        if m < 1:
            raise ValueError("index m is one-based")
        return math.fsum(self.full_sigmas[m - 1 :] ** 2), 0.0

    def head_diag(self, x, m):
        vals = legendre_orthonormal(self.as_points(x)[:, 0], m - 1)
        return np.sum(vals**2, axis=1)

    def tail_diag(self, x, m):
        full = self.full_sigmas
        x = self.as_points(x)[:, 0]
        if m - 1 >= len(full):
            return np.zeros(len(x))
        vals = legendre_orthonormal(x, len(full))[:, m - 1 :]
        return (vals**2) @ (full[m - 1 :] ** 2)


def legendre_orthonormal(x, count: int) -> np.ndarray:
    """Evaluate ``sqrt(2k+1) P_k(x)`` for ``k = 0..count-1`` by the three-term recurrence.

    Returns an array of shape ``(len(x), count)``.
    """
    x = np.asarray(x, dtype=float).ravel()
    out = np.empty((x.size, count))
    if count == 0:
        return out
    out[:, 0] = 1.0
    if count > 1:
        out[:, 1] = math.sqrt(3.0) * x
    for k in range(1, count - 1):
        a = math.sqrt((2 * k + 1) * (2 * k + 3)) / (k + 1)
        b = k / (k + 1) * math.sqrt((2 * k + 3) / (2 * k - 1))
        out[:, k + 1] = a * x * out[:, k] - b * out[:, k - 1]
    return out


def _torus_sort_key(lam, k):
    return (-lam, max(abs(v) for v in k), k)


def _enumerate_torus(model: KernelModel, M: int):
    # best-first search: every eigenvalue is reached through coordinate
    # steps towards the origin, each of which strictly increases lambda
    d, s = model.d, model.s
    w1 = {}

    def lam(k):
        prod = 1.0
        for a in sorted(abs(v) for v in k):
            if a not in w1:
                w1[a] = _torus_weight(float(a), s)
            prod *= w1[a]
        return prod

    origin = (0,) * d
    heap = [_torus_sort_key(1.0, origin)]
    seen = {origin}
    sig2, labels = [], []
    while len(labels) < M:
        neg, _, k = heapq.heappop(heap)
        sig2.append(-neg)
        labels.append(k)
        for j in range(d):
            for step in (-1, 1):
                nb = k[:j] + (k[j] + step,) + k[j + 1 :]
                if nb not in seen:
                    seen.add(nb)
                    heapq.heappush(heap, _torus_sort_key(lam(nb), nb))
    return np.sqrt(np.array(sig2)), np.array(labels, dtype=np.int64).reshape(M, d)


def enumerate_spectrum(model: KernelModel, M_max: int) -> SpectralBasis:
    """Return the ``M_max`` largest eigenpairs of ``model`` in non-increasing order.

    Ties in the torus model are broken by the sup-norm of the frequency and
    then lexicographically. The Legendre model returns its stored sequence
    (at most ``M_max`` entries retained; tails always use the full sequence).
    """
    if M_max < 1:
        raise ValueError("M_max must be at least 1")
    if model.family == TORUS:
        sigmas, labels = _enumerate_torus(model, M_max)
        t1, r1 = _torus_trace_1d(model.s)
        trace = t1**model.d
        remainder = (t1 + r1) ** model.d - trace
        return TorusBasis(model, sigmas, labels, trace, remainder)
    full = np.asarray(model.sigma, dtype=float)
    count = min(M_max, len(full))
    labels = np.arange(count, dtype=np.int64).reshape(count, 1)
    return LegendreBasis(model, full[:count].copy(), labels, math.fsum(full**2), 0.0)


def spectral_function_N(basis: SpectralBasis, m: int) -> float:
    """``sup_x sum_{k < m} |eta_k(x)|^2``.

    Torus: ``m - 1`` exactly. Legendre: attained at ``x = 1``.
    """
    if not 2 <= m <= basis.count + 1:
        raise ValueError(f"m={m} outside [2, {basis.count + 1}]")
    if basis.model.family == TORUS:
        return float(m - 1)
    return float(basis.head_diag(np.array([1.0]), m)[0])


def spectral_function_T(basis: SpectralBasis, m: int) -> tuple[float, float]:
    """``sup_x sum_{k >= m} |e_k(x)|^2`` with a certified remainder bound."""
    if m < 2:
        raise ValueError("m must be at least 2")
    if basis.model.family == TORUS:
        return basis.tail_sum(m)
    return float(basis.tail_diag(np.array([1.0]), m)[0]), 0.0


def format_label(label) -> str:
    return " ".join(str(int(v)) for v in np.atleast_1d(label))


def write_spectrum_csv(basis: SpectralBasis, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["rank", "sigma", "sigma_squared", "label"])
    for i, (sig, lab) in enumerate(zip(basis.sigmas, basis.labels), start=1):
        writer.writerow([i, repr(float(sig)), repr(float(sig * sig)), format_label(lab)])
