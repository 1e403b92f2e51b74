from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaoslab import (
    CoefficientTensor,
    SearchConfig,
    SearchError,
    SearchInfeasible,
    ell_r_norm,
    estimate_A1,
    exponent_sweep,
    maximize_ratio,
    mean_abs_rademacher_sum,
    moment_p_exact,
)
from chaoslab.search import Objective, product_ones_ratio

from conftest import oracle_moment

LOCAL = ("sign-coordinate-ascent", "annealing", "continuous-perturbation")


def brute_best_sign_ratio(m, n, r, p=1):
    """Best l_r / moment_p over every +-1 tensor, by the itertools oracle."""
    best = None
    for flat in itertools.product((1, -1), repeat=n**m):
        a = np.array(flat).reshape((n,) * m)
        val = float(np.sum(np.abs(a) ** r)) ** (1 / r) / oracle_moment(a, p)
        if best is None or val > best[0] + 1e-12:
            best = (val, a)
    return best


def test_exhaustive_linear_pair():
    res = maximize_ratio(SearchConfig(m=1, n=2, r=1, strategy="exhaustive-signs"))
    assert res.best_ratio == 2


def test_exhaustive_two_by_two_matches_oracle():
    res = maximize_ratio(SearchConfig(m=2, n=2, r=1, strategy="exhaustive-signs"))
    val, arg = brute_best_sign_ratio(2, 2, 1)
    assert res.best_ratio == pytest.approx(val, rel=1e-12) and val == pytest.approx(4.0)
    # ties resolve to the lexicographically smallest tensor, +1 before -1
    assert res.best_tensor.entries.tolist() == arg.tolist() == [[1, 1], [1, 1]]


@pytest.mark.parametrize("m, n, r", [(1, 4, 1), (2, 3, 1.5), (3, 2, 1)])
def test_exhaustive_against_oracle(m, n, r):
    res = maximize_ratio(SearchConfig(m=m, n=n, r=r, strategy="exhaustive-signs"))
    assert res.best_ratio == pytest.approx(brute_best_sign_ratio(m, n, r)[0], rel=1e-12)


def test_exhaustive_size_limit():
    with pytest.raises(SearchInfeasible):
        SearchConfig(m=2, n=5, r=1, strategy="exhaustive-signs")


def test_config_validation():
    with pytest.raises(SearchError):
        SearchConfig(m=2, n=2, r=1, strategy="nope")
    with pytest.raises(SearchError):
        SearchConfig(m=2, n=2, r=1, budget=-1)


def test_product_ones_budget_zero():
    res = maximize_ratio(SearchConfig(m=2, n=3, r=1, strategy="product-ones", budget=0))
    assert np.all(res.best_tensor.entries == 1)
    mom = mean_abs_rademacher_sum(3) ** 2
    assert res.exact_moment == f"{mom.numerator}/{mom.denominator}"
    assert res.best_ratio == pytest.approx(9 / float(mom), rel=1e-15)


@pytest.mark.parametrize("m, n", [(1, 5), (1, 12), (2, 4), (2, 6), (3, 3)])
def test_product_ones_closed_form_matches_engine(m, n):
    ratio, mom = product_ones_ratio(m, n, 1)
    res = moment_p_exact(CoefficientTensor(np.ones((n,) * m, dtype=np.int64)), 1)
    assert res.exact_power == mom
    assert ratio == pytest.approx(n**m / res.value, rel=1e-14)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(LOCAL), st.integers(0, 1000), st.sampled_from([(1, 5), (2, 3), (3, 2)]))
def test_local_strategies(strategy, seed, shape):
    m, n = shape
    cfg = SearchConfig(m=m, n=n, r=1, strategy=strategy, budget=300, seed=seed, restarts=2)
    res = maximize_ratio(cfg)
    ratios = [v for _, v in res.trace]
    assert all(b >= a for a, b in zip(ratios, ratios[1:]))
    a = res.best_tensor
    recomputed = ell_r_norm(a, 1) / oracle_moment(a.entries, 1)
    assert res.best_ratio == pytest.approx(recomputed, rel=1e-12)
    if strategy != "continuous-perturbation":
        assert res.best_ratio <= brute_best_sign_ratio(m, n, 1)[0] * (1 + 1e-12)


@pytest.mark.parametrize("strategy", LOCAL)
def test_deterministic_and_thread_free(strategy):
    cfg = SearchConfig(m=2, n=3, r=1.5, strategy=strategy, budget=400, seed=7, restarts=4)
    one = maximize_ratio(cfg, threads=1)
    many = maximize_ratio(cfg, threads=4)
    assert one.to_dict() == many.to_dict() == maximize_ratio(cfg, threads=1).to_dict()


def test_ascent_equivariant_under_sign_symmetries():
    cfg = SearchConfig(m=2, n=3, r=1, strategy="sign-coordinate-ascent", budget=200, seed=1)
    start = np.array([[1, -1, 1], [1, 1, -1], [-1, 1, 1]])
    base = maximize_ratio(cfg, start=CoefficientTensor(start)).best_ratio
    flipped = start.copy()
    flipped[:, 1] *= -1
    for variant in (-start, flipped):
        assert maximize_ratio(cfg, start=CoefficientTensor(variant)).best_ratio == pytest.approx(base, rel=1e-12)


def test_objective_invariance():
    obj = Objective((3, 3), 1.0, 1.0)
    a = np.random.default_rng(0).standard_normal((3, 3))
    b = a[[2, 0, 1]][:, [1, 2, 0]] * np.array([1, -1, 1])
    assert obj.ratios(a.ravel())[0] == pytest.approx(obj.ratios(b.ravel())[0], rel=1e-12)


def test_monte_carlo_objective_is_fixed():
    cfg = SearchConfig(m=2, n=3, r=1, strategy="sign-coordinate-ascent", budget=200, seed=3, max_bits=4)
    res = maximize_ratio(cfg)
    assert res.objective_mode == "monte-carlo"
    assert maximize_ratio(cfg).to_dict() == res.to_dict()


@pytest.mark.parametrize("n, lo, hi", [(1, 1.0, 1.0), (2, 1 / math.sqrt(2), 1 / math.sqrt(2)), (4, 1 / math.sqrt(2), 0.75)])
def test_estimate_a1(n, lo, hi):
    res = estimate_A1(n, 3000, seed=0)
    assert lo - 1e-12 <= res.best_ratio <= hi + 1e-12


def test_estimate_a1_trace_nonincreasing():
    ratios = [v for _, v in estimate_A1(5, 2000, seed=2).trace]
    assert all(b <= a for a, b in zip(ratios, ratios[1:]))


def test_sweep_slopes():
    assert exponent_sweep(1, 1, 1, range(2, 65, 2)).slope == pytest.approx(0.5, abs=0.1)
    assert exponent_sweep(2, 1, 1, range(2, 11)).slope == pytest.approx(1.0, abs=0.15)


def test_sweep_needs_three_sizes():
    with pytest.raises(SearchError):
        exponent_sweep(2, 1, 1, [2, 3, 6], strategy="exhaustive-signs")


def test_sweep_collects_results():
    got = []
    fit = exponent_sweep(1, 1, 1, [2, 3, 4], strategy="exhaustive-signs", results=got)
    assert [r.config.n for r in got] == [2, 3, 4]
    assert [pt[1] for pt in fit.points] == [r.best_ratio for r in got]
