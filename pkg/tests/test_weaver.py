import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sampnum.density import make_rng
from sampnum.errors import BudgetError
from sampnum.weaver import (
    ZETA, FiniteFrame, alpha_beta_recursion, barrier_greedy_subsample, brute_force_partition,
    certify_subset, constant_budget, duplicated_basis, gamma_product, local_search_partition,
    partition_bounds, recursive_halving, remark_constant_chain, tight_frame,
)


def harmonic_frame(n, m):
    """Equal-norm tight frame from ``m`` columns of the ``n``-point DFT."""
    return FiniteFrame(np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(m)) / n) / math.sqrt(n))


def test_gamma_product():
    g = gamma_product(1e-10)
    assert g.partials[0] == 3.0
    assert all(b > a for a, b in zip(g.partials, g.partials[1:]))
    assert g.remainder < 1e-10
    assert g.upper < 35.21
    assert g.value == pytest.approx(35.2098, abs=1e-4)
    with pytest.raises(ValueError):
        gamma_product(0.0)


def test_constant_budget_examples():
    assert constant_budget(2, 0.5, 1.5, 1000).triple == (6568, 2 * ZETA**2, 9852)
    assert constant_budget(1, 1, 1, 1000).triple == (1642, ZETA**2, 1642)
    small = constant_budget(1, 1, 1, 10)
    assert small.triple == (47, 1, 47) and small.regime == "small"
    assert constant_budget(1, 1, 1, 47).regime == "large"
    with pytest.raises(ValueError):
        constant_budget(1, 1, 1, 0.5)
    with pytest.raises(ValueError):
        constant_budget(0, 1, 1, 10)


def test_large_regime_size_constant_rounds_product_up():
    # 1642 is gamma (2 zeta)^2 = 1641.7... rounded up to an integer
    b = constant_budget(3, 2, 5, 1e4)
    exact = gamma_product().upper * (2 * ZETA) ** 2
    assert exact * 3 / 2 <= b.c1 <= (exact + 1) * 3 / 2
    assert 35.21 * (2 * ZETA) ** 2 < 1642


def test_recursion_examples():
    assert alpha_beta_recursion(0.999 / (2 * ZETA) ** 2, 1, 1).L == 0
    assert alpha_beta_recursion(1 / 4096, 1, 1).L >= 5
    with pytest.raises(ValueError):
        alpha_beta_recursion(1 / (2 * ZETA) ** 2, 1, 1)


@settings(max_examples=100, deadline=None)
@given(frac=st.floats(1e-6, 0.999), k2=st.floats(0.01, 10), spread=st.floats(1, 10))
def test_recursion_invariants(frac, k2, spread):
    k3 = k2 * spread
    delta = frac * k2 / (2 * ZETA) ** 2
    s = alpha_beta_recursion(delta, k2, k3)
    a, b, L = s.alphas, s.betas, s.L
    for ell in range(L + 1):
        assert a[ell] / 4 <= a[ell + 1] < a[ell] / 2
    assert ZETA**2 * delta <= a[L + 1] < (2 * ZETA) ** 2 * delta
    assert b[L + 1] / a[L + 1] <= 35.21 * k3 / k2


def test_constant_chain_passes():
    chain = remark_constant_chain()
    assert chain.all_passed, {k: v for k, v in chain.checks.items() if not v[1]}
    assert chain.c1 == pytest.approx(1 + 0.8 * ((1 + math.sqrt(5)) / 2) ** 2)


def test_frame_invariants():
    f = tight_frame(20, 3, make_rng(0))
    lo, hi = f.frame_bounds
    assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)
    assert f.eps * f.n >= lo * f.dim * (1 - 1e-12)


def test_partition_bounds_tight_case():
    lo, hi = partition_bounds(0.01, 1.0, 1.0)
    assert lo == pytest.approx((1 - ZETA * 0.1) / 2)
    assert hi == pytest.approx((1 + math.sqrt(0.02)) ** 2 / 2)
    assert hi <= (1 + ZETA * 0.1) / 2


def test_duplicated_basis_partition():
    p = brute_force_partition(duplicated_basis(3))
    assert p.feasible
    np.testing.assert_array_equal(p.first, [0, 2, 4])
    for lo, hi in p.bounds:
        assert lo == pytest.approx(0.5, abs=1e-14) and hi == pytest.approx(0.5, abs=1e-14)


def test_brute_force_random_tight_frames():
    rng = make_rng(1)
    for _ in range(50):
        p = brute_force_partition(tight_frame(12, 3, rng))
        # eps is large here, so the target is weak, but the search must meet it
        assert p.feasible


def test_brute_force_budget():
    with pytest.raises(BudgetError):
        brute_force_partition(tight_frame(25, 2, make_rng(0)))


def test_local_search_agrees_with_brute_force_feasibility():
    rng = make_rng(2)
    for _ in range(10):
        f = tight_frame(14, 1, rng)
        assert local_search_partition(f, seed=3).feasible == brute_force_partition(f).feasible


def test_halving_small_regime_is_trivial():
    f = duplicated_basis(4)
    res = recursive_halving(f, 1, 1, 1)
    assert res.method == "halving-trivial" and res.size == 8
    assert res.certified


@pytest.mark.parametrize("n, m", [(128, 2), (1024, 2), (1024, 4)])
def test_halving_large_regime(n, m):
    f = harmonic_frame(n, m)
    res = recursive_halving(f, 1, 1, 1)
    sched = alpha_beta_recursion(m / n, 1, 1)
    assert res.method == "halving"
    assert res.size <= n / 2 ** sched.steps
    assert res.certified
    phis = [h["phi"] for h in res.history]
    assert all(b >= a for a, b in zip(phis, phis[1:]))
    for h in res.history[1:]:
        lo, hi = h["achieved"]
        assert lo >= h["alpha"] * (1 - 1e-10) and hi <= h["beta"] * (1 + 1e-10)


def test_halving_rejects_frames_outside_hypotheses():
    with pytest.raises(ValueError):
        recursive_halving(harmonic_frame(128, 2), 0.5, 1, 1)


def test_greedy_orthonormal_rows():
    res = barrier_greedy_subsample(FiniteFrame(np.eye(4, dtype=complex)), 4)
    assert res.size == 4
    assert res.achieved_bounds == pytest.approx((1.0, 1.0))


def test_greedy_random_tight_frame_and_monotone_budget():
    f = tight_frame(200, 10, make_rng(4))
    lows = []
    for target in range(20, 81, 10):
        res = barrier_greedy_subsample(f, target)
        assert res.size == target and res.certified
        lows.append(res.achieved_bounds[0])
    assert all(b >= a - 1e-12 for a, b in zip(lows, lows[1:]))


def test_greedy_selections_are_nested():
    f = tight_frame(150, 6, make_rng(5))
    small = set(barrier_greedy_subsample(f, 20).J)
    large = set(barrier_greedy_subsample(f, 40).J)
    assert small <= large


def test_greedy_target_validation():
    with pytest.raises(ValueError):
        barrier_greedy_subsample(tight_frame(30, 5, make_rng(0)), 3)


def test_certified_flag_recomputed():
    f = tight_frame(100, 2, make_rng(6))
    budget = constant_budget(f.eps * 50, 1, 1, 50)
    res = certify_subset(f, np.arange(100), budget, "given")
    assert res.achieved_bounds == pytest.approx(f.frame_bounds)
    bad = certify_subset(f, [0], budget, "given")
    assert bad.achieved_bounds[0] == pytest.approx(0.0, abs=1e-12)
    assert not bad.certified
