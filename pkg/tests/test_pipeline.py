import math

import numpy as np
import pytest
from scipy import optimize

from sampnum.density import SamplingDensity, draw_nodes, nodes_at
from sampnum.errors import TruncationError
from sampnum.leastsq import RecoveryOperator
from sampnum.pipeline import (
    CSV_FIELDS, RANDOM_ONLY, RANDOM_THEN_SUBSAMPLE, ErrorReport, basis_for, fit_rate,
    explicit_bound_rhs, run_recovery_experiment, truncation_for, worst_case_error,
)
from sampnum.spectrum import KernelModel, enumerate_spectrum

TORUS = KernelModel.torus(1, 1.0)


@pytest.fixture(scope="module")
def torus_basis():
    return enumerate_spectrum(TORUS, 1024)


def synthetic(n_used, wce):
    return [
        ErrorReport(m=2, n_drawn=n, n_used=n, wce=e, wce_upper=e, sigma_m=e, bound_rhs=1.0,
                    retries=0, seed=0, method="random", M_trunc=2)
        for n, e in zip(n_used, wce)
    ]


def test_equispaced_sixteen_nodes(torus_basis):
    # recovery by the sample mean; only frequencies in 16Z alias onto the constant,
    # and that aliasing block is far smaller than sigma_2^2
    rho = SamplingDensity.from_basis(torus_basis, 2)
    op = RecoveryOperator.build(torus_basis, nodes_at(rho, np.arange(16) / 16), 2)
    rep = worst_case_error(op)
    sig2 = torus_basis.lambdas[1]
    aliased = np.array([1 / (1 + (2 * math.pi * k) ** 2) for k in range(16, 16 * 40, 16)] * 2)
    alias_top = optimize.brentq(lambda mu: 1 - np.sum(aliased / (mu - aliased)),
                                aliased.max() * (1 + 1e-12), 1.0)
    assert alias_top < sig2
    assert rep.wce**2 == pytest.approx(max(sig2, alias_top), rel=1e-12)


def test_single_node_secular_oracle(torus_basis):
    # with one node every frequency aliases onto the constant
    rho = SamplingDensity.from_basis(torus_basis, 2)
    op = RecoveryOperator.build(torus_basis, nodes_at(rho, [0.0]), 2)
    M = 401
    rep = worst_case_error(op, M_trunc=M)
    lam = torus_basis.lambdas[1:M]
    mu = optimize.brentq(lambda t: 1 - np.sum(lam / (t - lam)), lam.max() * (1 + 1e-12), 10.0)
    assert rep.wce**2 == pytest.approx(mu, rel=1e-10)
    assert rep.wce > rep.sigma_m


@pytest.mark.parametrize("model, m", [(TORUS, 16), (KernelModel.legendre_geometric(0.6, 60), 8)])
def test_dense_and_secular_paths_agree(model, m):
    basis = basis_for(model, m)
    rho = SamplingDensity.from_basis(basis, m)
    op = RecoveryOperator.build(basis, draw_nodes(rho, 6 * m, seed=3), m)
    dense = worst_case_error(op)
    secular = worst_case_error(op, dense_limit=0)
    assert secular.wce == pytest.approx(dense.wce, rel=1e-10)
    assert dense.split_mismatch < 1e-8 and secular.split_mismatch < 1e-8
    assert isinstance(dense.split_mismatch, float)


@pytest.mark.parametrize("seed", range(5))
def test_wce_at_least_sigma_m(seed):
    for model, m in [(TORUS, 6), (KernelModel.legendre_geometric(0.5, 40), 5)]:
        basis = basis_for(model, m)
        rho = SamplingDensity.from_basis(basis, m)
        op = RecoveryOperator.build(basis, draw_nodes(rho, 3 * m, seed), m)
        rep = worst_case_error(op)
        assert rep.wce >= rep.sigma_m - 1e-9
        assert rep.wce_upper >= rep.wce


def test_truncation_rules(torus_basis):
    M = truncation_for(torus_basis, 8, 1e-2)
    assert torus_basis.sigmas[M] <= 1e-2 * torus_basis.sigmas[7] < torus_basis.sigmas[M - 1]
    with pytest.raises(TruncationError):
        truncation_for(enumerate_spectrum(TORUS, 20), 8, 1e-2)
    leg = enumerate_spectrum(KernelModel.legendre((1.0, 0.9, 0.8)), 3)
    assert truncation_for(leg, 2, 1e-2) == 3


def test_explicit_bound_rhs():
    finite = enumerate_spectrum(KernelModel.legendre((1.0, 0.5, 0.25)), 3)
    assert explicit_bound_rhs(finite, 8) == 0.0
    small = enumerate_spectrum(KernelModel.legendre((1.0, 0.5, 0.25, 0.1, 0.1)), 5)
    large = enumerate_spectrum(KernelModel.legendre((1.0, 0.5, 0.25, 0.2, 0.2)), 5)
    assert explicit_bound_rhs(large, 6) > explicit_bound_rhs(small, 6) > 0


def test_experiment_is_deterministic():
    a = run_recovery_experiment(TORUS, 8, RANDOM_THEN_SUBSAMPLE, seed=4)
    b = run_recovery_experiment(TORUS, 8, RANDOM_THEN_SUBSAMPLE, seed=4)
    assert a == b
    assert a.n_drawn == 2505 and a.n_used <= 8 * 8
    assert a.wce**2 <= a.bound_rhs


@pytest.mark.parametrize("m", [8, 16, 32])
def test_subsampling_costs_little_accuracy(m):
    sub = run_recovery_experiment(TORUS, m, RANDOM_THEN_SUBSAMPLE, seed=1)
    full = run_recovery_experiment(TORUS, m, RANDOM_ONLY, seed=1)
    assert full.n_used == full.n_drawn
    assert sub.n_used == 4 * m
    assert sub.wce <= 10 * full.wce


def test_legendre_experiment():
    rep = run_recovery_experiment(KernelModel.legendre_geometric(0.5, 60), 6, seed=2)
    assert rep.wce >= rep.sigma_m - 1e-9
    assert rep.method == RANDOM_THEN_SUBSAMPLE


def test_experiment_validation():
    with pytest.raises(ValueError):
        run_recovery_experiment(TORUS, 1)
    with pytest.raises(ValueError):
        run_recovery_experiment(TORUS, 4, method="other")


def test_fit_rate_exact_power():
    n = 2.0 ** np.arange(6, 13)
    fit = fit_rate(synthetic(n, 1 / n))
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)
    assert np.abs(fit.residuals).max() < 1e-12


def test_fit_rate_log_factor():
    n = 2.0 ** np.arange(6, 13)
    fit = fit_rate(synthetic(n, np.sqrt(np.log(n)) / n), s=1.0, d=1)
    assert -1.15 <= fit.slope <= -0.85
    assert fit.log_power == pytest.approx(0.5, abs=1e-10)
    assert fit.log_power_reference == (0.5, 1.0)


def test_fit_rate_rejects_degenerate_grids():
    with pytest.raises(ValueError):
        fit_rate(synthetic([10, 20, 30, 40], [1, 1, 1, 1]))
    with pytest.raises(ValueError):
        fit_rate(synthetic([10, 11, 12, 13, 14], [1, 1, 1, 1, 1]))


def test_report_row_has_csv_fields():
    row = synthetic([10], [0.1])[0].row()
    assert set(CSV_FIELDS) <= set(row)
