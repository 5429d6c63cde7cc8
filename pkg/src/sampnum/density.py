"""Importance density for the random nodes and the samplers that draw from it.

The density mixes a normalized Christoffel-type term with the normalized
spectral tail,

    rho_m(x) = 1/2 * ( sum_{k<m} |eta_k(x)|^2 / (m-1)
                       + sum_{k>=m} |e_k(x)|^2 / sum_{k>=m} sigma_k^2 ),

so both halves integrate to 1/2 against the reference probability measure.
The tail numerator is always evaluated as a sum over the tail, never as
``K(x, x)`` minus the head.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConsistencyError
from .spectrum import TORUS, SpectralBasis

ENVELOPE_GRID = 10_000
ENVELOPE_INFLATION = 1.01
NEGATIVE_ROUNDOFF = 1e-14


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for trial ``stream`` of a run seeded by ``seed``.

    Distinct streams are statistically independent and each is a pure
    function of ``(seed, stream)``.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class SamplingDensity:
    """The density ``rho_m`` for a basis and approximation order ``m``.

    Attributes
    ----------
    basis : SpectralBasis
    m : int
        Approximation order; the recovery uses ``m - 1`` basis functions.
    trace : float
        ``sum_k sigma_k^2``.
    tail_normalizer : float
        ``sum_{k>=m} sigma_k^2``. Zero for a finite-rank model whose rank is
        below ``m``; the density then reduces to its first half, rescaled
        to unit mass.
    """

    basis: SpectralBasis
    m: int
    trace: float
    tail_normalizer: float
    tail_remainder: float = 0.0

    @classmethod
    def from_basis(cls, basis: SpectralBasis, m: int) -> SamplingDensity:
        if m < 2:
            raise ValueError("the density needs m >= 2")
        if m - 1 > basis.count:
            raise ValueError(f"m - 1 = {m - 1} exceeds the {basis.count} retained eigenpairs")
        tail, rem = basis.tail_sum(m)
        return cls(basis, m, basis.trace, tail, rem)

    @property
    def constant(self) -> bool:
        """True when ``rho_m`` is identically one (torus model)."""
        return self.basis.model.family == TORUS

    def __call__(self, x) -> np.ndarray:
        return density_eval(self, x)

    @cached_property
    def envelope(self) -> float:
        """Inflated supremum of ``rho_m`` estimated on a uniform grid."""
        if self.constant:
            return 1.0
        grid = np.linspace(-1.0, 1.0, ENVELOPE_GRID)
        return ENVELOPE_INFLATION * float(np.max(density_eval(self, grid)))


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Sampling nodes with the density values at each node.

    ``points`` has shape ``(n, d)``. ``seed`` and ``stream`` are ``None`` for
    node sets that were not drawn at random.
    """

    points: np.ndarray
    density_values: np.ndarray
    m: int
    seed: int | None = None
    stream: int | None = None

    def __post_init__(self):
        if len(self.points) != len(self.density_values):
            raise ValueError("one density value per node is required")
        if np.any(self.density_values < 0):
            raise ValueError("density values must be non-negative")
        self.points.setflags(write=False)
        self.density_values.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, index) -> NodeSet:
        index = np.asarray(index)
        return NodeSet(
            self.points[index].copy(), self.density_values[index].copy(),
            self.m, self.seed, self.stream,
        )


def density_eval(density: SamplingDensity, x) -> np.ndarray:
    """Evaluate ``rho_m`` at every row of ``x``; returns shape ``(n,)``."""
    basis = density.basis
    x = basis.as_points(x)
    if density.constant:
        return np.ones(len(x))
    m = density.m
    head = basis.head_diag(x, m) / (m - 1)
    if density.tail_normalizer > 0:
        tail = basis.tail_diag(x, m) / density.tail_normalizer
        values = 0.5 * (head + tail)
    else:
        values = head
    if np.any(values < -NEGATIVE_ROUNDOFF):
        raise ConsistencyError("density evaluated to a clearly negative value")
    return np.maximum(values, 0.0)


def nodes_at(density: SamplingDensity, points) -> NodeSet:
    """Wrap deterministic points (e.g. an equispaced grid) as a node set."""
    points = density.basis.as_points(points).copy()
    return NodeSet(points, density_eval(density, points), density.m)


def draw_nodes(density: SamplingDensity, n: int, seed: int, stream: int = 0) -> NodeSet:
    """Draw ``n`` i.i.d. nodes from ``rho_m`` times the reference measure.

    The torus density is constant, so nodes are uniform. On ``[-1, 1]`` the
    sampler rejects uniform proposals against the grid envelope and raises
    :class:`ConsistencyError` if an accepted proposal exceeds it.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = make_rng(seed, stream)
    d = density.basis.dim
    if density.constant:
        points = rng.random((n, d))
        return NodeSet(points, np.ones(n), density.m, int(seed), int(stream))

    env = density.envelope
    chunks, values, have = [], [], 0
    while have < n:
        batch = max(64, int(1.2 * env * (n - have)))
        prop = rng.uniform(-1.0, 1.0, batch)
        rho = density_eval(density, prop)
        if np.any(rho > env):
            raise ConsistencyError(
                f"density value {rho.max():.6g} exceeds the sampling envelope {env:.6g}"
            )
        keep = rng.random(batch) * env < rho
        chunks.append(prop[keep])
        values.append(rho[keep])
        have += int(keep.sum())
    points = np.concatenate(chunks)[:n].reshape(n, 1)
    rho = np.concatenate(values)[:n]
    return NodeSet(points, rho, density.m, int(seed), int(stream))


def transformed_tail_bound(density: SamplingDensity) -> float:
    """Upper bound ``2 * sum_{k>=m} sigma_k^2`` on ``sup_x sum_{k>=m} |e_k(x)|^2 / rho_m(x)``.

    It holds because ``rho_m`` is at least half the normalized tail.
    """
    return float(2.0 * (density.tail_normalizer + density.tail_remainder))
