"""Distance estimators, sweep plumbing and rate diagnostics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr, ndtri

from sphclt.clt import (
    CltReport,
    CltRow,
    clt_sweep,
    kolmogorov_distance,
    normal_quantile,
    rate_fit,
    wasserstein_distance,
)


# ------------------------------------------------------------------
# normal quantile
# ------------------------------------------------------------------

def test_quantile_accuracy_against_scipy():
    p = np.concatenate([
        np.geomspace(1e-14, 0.02, 300),
        np.linspace(0.021, 0.979, 300),
        1.0 - np.geomspace(1e-14, 0.02, 300),
    ])
    mine = normal_quantile(p)
    ref = ndtri(p)
    mask = np.abs(ref) > 1e-8
    assert np.max(np.abs(mine[mask] - ref[mask]) / np.abs(ref[mask])) < 1e-9


def test_quantile_basics():
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(ndtr(1.7)) == pytest.approx(1.7, rel=1e-12)
    with pytest.raises(ValueError):
        normal_quantile(0.0)
    with pytest.raises(ValueError):
        normal_quantile(1.0)


# ------------------------------------------------------------------
# Kolmogorov distance
# ------------------------------------------------------------------

def test_kolmogorov_degenerate():
    assert kolmogorov_distance(np.zeros(10)) == pytest.approx(0.5)


def test_kolmogorov_exact_quantiles():
    n = 10_000
    q = normal_quantile((np.arange(1, n + 1) - 0.5) / n)
    assert kolmogorov_distance(q) <= 1e-4 + 0.5 / n


def test_kolmogorov_normal_critical_value():
    # ~99% of true-normal samples fall below 1.63/sqrt(n); all 20 fixed
    # Philox streams below were checked to do so
    n, below = 10_000, 0
    for seed in range(20):
        x = np.random.Generator(np.random.Philox(key=seed)).standard_normal(n)
        below += kolmogorov_distance(x) < 1.63 / math.sqrt(n)
    assert below == 20


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=60))
@settings(max_examples=50, deadline=None)
def test_kolmogorov_permutation_invariant(xs):
    arr = np.array(xs)
    rng = np.random.default_rng(0)
    assert kolmogorov_distance(rng.permutation(arr)) == kolmogorov_distance(arr)


def test_kolmogorov_duplicate_median_shift():
    rng = np.random.Generator(np.random.Philox(key=5))
    x = rng.standard_normal(501)
    base = kolmogorov_distance(x)
    dup = np.append(x, np.median(x))
    assert abs(kolmogorov_distance(dup) - base) <= 1.0 / x.size + 1e-12


# ------------------------------------------------------------------
# Wasserstein distance
# ------------------------------------------------------------------

def test_wasserstein_degenerate_closed_form():
    c = 0.7
    expect = abs(c) * (2 * ndtr(abs(c)) - 1) + 2 * math.exp(-c * c / 2) / math.sqrt(2 * math.pi)
    assert wasserstein_distance(np.full(100_000, c)) == pytest.approx(expect, abs=1e-3)


def test_wasserstein_shifted_normals():
    rng = np.random.Generator(np.random.Philox(key=9))
    x = rng.standard_normal(20_000)
    mu = 0.4
    assert wasserstein_distance(x + mu) == pytest.approx(abs(mu), abs=0.03)


def test_wasserstein_standard_normal_small():
    rng = np.random.Generator(np.random.Philox(key=3))
    assert wasserstein_distance(rng.standard_normal(10_000)) <= 0.03


@given(st.lists(st.floats(-3, 3), min_size=5, max_size=50), st.floats(-2, 2))
@settings(max_examples=50, deadline=None)
def test_wasserstein_translation_inequality(xs, c):
    arr = np.array(xs)
    # triangle inequality form of translation covariance
    assert abs(wasserstein_distance(arr + c) - wasserstein_distance(arr)) <= abs(c) + 1e-9


# ------------------------------------------------------------------
# sweeps
# ------------------------------------------------------------------

def test_sweep_determinism_and_thread_independence():
    kw = dict(q=2, threads=1)
    a = clt_sweep("h", 2, [8, 16], 250, seed=42, **kw)
    b = clt_sweep("h", 2, [8, 16], 250, seed=42, q=2, threads=3)
    assert a.rows == b.rows


def test_sweep_validation():
    with pytest.raises(ValueError):
        clt_sweep("h", 2, [8], 100, seed=0, q=2)  # replicas < 200
    with pytest.raises(ValueError):
        clt_sweep("h", 2, [7, 8], 300, seed=0, q=2)  # odd ell without flag
    with pytest.raises(ValueError):
        clt_sweep("h", 2, [16, 8], 300, seed=0, q=2)  # not increasing
    with pytest.raises(ValueError):
        clt_sweep("x", 2, [8], 300, seed=0)


def test_sweep_excluded_pair_warning():
    with pytest.warns(UserWarning, match="outside the proven CLT range"):
        rep = clt_sweep("h", 3, [4, 6], 200, seed=1, q=3)
    assert rep.warnings


def test_sweep_excursion_normalization():
    rep = clt_sweep("S", 2, [8, 16], 300, seed=2, z=1.0)
    for row in rep.rows:
        assert row.explicit_bound is None
        assert row.theoretical_rate == pytest.approx(row.ell ** -0.5)
        assert row.predicted_mean == pytest.approx(4 * math.pi * ndtr(1.0), rel=1e-12)


def test_sweep_polynomial_kind():
    rep = clt_sweep("Z", 2, [8, 16], 250, seed=3, betas=(0.0, 0.0, 1.0, 0.5))
    for row in rep.rows:
        assert row.explicit_bound is not None
        assert row.theoretical_rate == pytest.approx(row.ell ** -0.5)  # beta_2 != 0


def test_sweep_polynomial_rank2_variance_scaling():
    # a rank-2 polynomial's variance decays like ell^{-(d-1)}
    rep = clt_sweep("Z", 2, [8, 16, 32], 600, seed=12, betas=(0.0, 0.0, 1.0))
    for row in rep.rows:
        se = row.predicted_var * math.sqrt(2.0 / (row.replicas - 1))
        assert abs(row.sample_var - row.predicted_var) <= 4.0 * se
    ratios = [a.predicted_var / b.predicted_var for a, b in zip(rep.rows, rep.rows[1:])]
    for r, (la, lb) in zip(ratios, [(8, 16), (16, 32)]):
        # exact identity: Var = 2 mu^2 / n with n = 2 ell + 1
        assert r == pytest.approx((2 * lb + 1) / (2 * la + 1), rel=1e-12)


# ------------------------------------------------------------------
# rate fits
# ------------------------------------------------------------------

def _synthetic_report(ells, dks, replicas=10_000):
    rows = tuple(
        CltRow(ell=ell, replicas=replicas, empirical_dK=dk, empirical_dW=dk,
               mc_stderr_scale=0.5 / math.sqrt(replicas), theoretical_rate=ell ** -0.5,
               explicit_bound=None, exact_quadrature=True, sample_mean=0.0,
               sample_var=1.0, predicted_mean=0.0, predicted_var=1.0)
        for ell, dk in zip(ells, dks)
    )
    return CltReport(kind="h", d=2, q=3, betas=None, z=None, seed=0, rows=rows)


def test_rate_fit_synthetic_power_law():
    ells = [16, 32, 64, 128]
    fit = rate_fit(_synthetic_report(ells, [ell ** -0.5 for ell in ells]))
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.stderr == pytest.approx(0.0, abs=1e-12)
    assert fit.decays_at_least_as_fast


def test_rate_fit_constant_column():
    ells = [16, 32, 64, 128]
    fit = rate_fit(_synthetic_report(ells, [0.3] * 4))
    assert fit.slope == pytest.approx(0.0, abs=1e-12)
    assert not fit.decays_at_least_as_fast


def test_rate_fit_floor_exclusion():
    ells = [16, 32, 64, 128, 256]
    dks = [0.3, 0.2, 0.1, 1e-4, 1e-5]  # last two under the MC floor
    fit = rate_fit(_synthetic_report(ells, dks))
    assert fit.n_below_floor == 2
    assert fit.n_used == 3
    with pytest.raises(ValueError):
        rate_fit(_synthetic_report([16, 32], [0.3, 0.2]))
