"""Grids, Gaussian eigenfunction sampling and functional evaluation.

Statistical assertions use fixed seeds and 4-standard-error windows; the
closed form J_q(1{. <= z}) = -H_{q-1}(z) phi(z) (integration by parts)
serves as the independent oracle for the Hermite projections.
"""

import math

import numpy as np
import pytest
from scipy.special import ndtr

from sphclt.moments import variance_h
from sphclt.simulate import (
    NodeBudgetError,
    ZeroVarianceError,
    _sample_batch,
    build_grid,
    excursion_variance,
    functional_excursion,
    functional_h,
    functional_Z,
    hermite_projection,
    monomial_to_hermite,
    recover_harmonic_coeffs,
    sample_field,
    FieldRealization,
)
from sphclt.specfun import GegenbauerCtx, SphereDim, gegenbauer_value


def phi(z):
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def indicator_projection_oracle(z, q):
    """J_q(1{. <= z}) = -H_{q-1}(z) phi(z) for q >= 1, by parts."""
    from sphclt.specfun import hermite
    return -float(hermite(q - 1, z)) * phi(z)


# ------------------------------------------------------------------
# grids
# ------------------------------------------------------------------

def test_grid_d2_shape_and_weights():
    ell = 12
    grid = build_grid(2, 2 * ell)
    assert grid.n_nodes == (ell + 1) * (2 * ell + 1)
    assert grid.weights.sum() == pytest.approx(4 * math.pi, rel=1e-12)
    assert grid.exact_degree >= 2 * ell
    assert np.all(grid.weights > 0)
    np.testing.assert_allclose(np.linalg.norm(grid.nodes, axis=1), 1.0, atol=1e-12)


def test_grid_d3_weights():
    grid = build_grid(3, 16)
    assert grid.weights.sum() == pytest.approx(2 * math.pi ** 2, rel=1e-12)
    np.testing.assert_allclose(np.linalg.norm(grid.nodes, axis=1), 1.0, atol=1e-12)


def test_grid_orthogonality():
    grid = build_grid(2, 30)
    ctx = GegenbauerCtx(grid.exact_degree, SphereDim(2))
    pole = np.array([0.0, 0.0, 1.0])
    table = ctx.evaluate_all(grid.nodes @ pole)
    worst = np.max(np.abs(table[1:] @ grid.weights))
    assert worst < 1e-11 * 4 * math.pi


def test_grid_node_budget():
    with pytest.raises(NodeBudgetError):
        build_grid(2, 4000, node_budget=10_000)


# ------------------------------------------------------------------
# sampling
# ------------------------------------------------------------------

def test_sampling_deterministic():
    grid = build_grid(2, 24)
    a = sample_field(2, 8, grid, seed=11, replica=3)
    b = sample_field(2, 8, grid, seed=11, replica=3)
    assert np.array_equal(a.values, b.values)
    c = sample_field(2, 8, grid, seed=11, replica=4)
    assert not np.array_equal(a.values, c.values)


def test_sampling_d2_statistics():
    ell, n = 10, 4000
    grid = build_grid(2, 2 * ell)
    reps = _sample_batch(grid, ell, seed=5, replicas=range(n))
    # unit variance at every node
    node_var = np.mean(reps ** 2, axis=0)
    assert np.max(np.abs(node_var - 1.0)) < 4.0 * math.sqrt(2.0 / n) * 1.25
    # covariance at a fixed pair matches the Gegenbauer kernel
    i, j = 0, grid.n_phi * 5 + 3
    cth = float(np.clip(grid.nodes[i] @ grid.nodes[j], -1, 1))
    emp = float(np.mean(reps[:, i] * reps[:, j]))
    exact = gegenbauer_value(ell, 2, cth)
    se = math.sqrt((1.0 + exact ** 2) / n)
    assert abs(emp - exact) < 4.0 * se


def test_sampling_d3_statistics():
    grid = build_grid(3, 12)
    n = 3000
    reps = _sample_batch(grid, 6, seed=9, replicas=range(n))
    assert abs(np.mean(reps ** 2) - 1.0) < 0.05
    i, j = 0, grid.n_nodes // 2
    cth = float(np.clip(grid.nodes[i] @ grid.nodes[j], -1, 1))
    emp = float(np.mean(reps[:, i] * reps[:, j]))
    exact = gegenbauer_value(6, 3, cth)
    assert abs(emp - exact) < 4.0 * math.sqrt((1 + exact ** 2) / n)


def test_sampling_d3_caps():
    grid = build_grid(3, 12)
    with pytest.raises(ValueError):
        sample_field(3, 40, grid, seed=0)  # ell cap on the dense path
    big = build_grid(3, 64)
    assert big.n_nodes > 8192
    with pytest.raises(NodeBudgetError):
        sample_field(3, 4, big, seed=0)


def test_coefficient_recovery_variance():
    # E[a^2] = mu_2 / n_{ell;2} = 4 pi / 21 at ell = 10
    ell, n = 10, 800
    grid = build_grid(2, 2 * ell)
    reps = _sample_batch(grid, ell, seed=5, replicas=range(n))
    coefs = np.array([
        recover_harmonic_coeffs(FieldRealization(grid, reps[r], ell, 5, r))
        for r in range(n)
    ])
    target = 4 * math.pi / 21
    se = target * math.sqrt(2.0 / (n * (2 * ell + 1)))
    assert abs(coefs.var() - target) < 4.0 * se


def test_parseval_on_grid():
    ell = 10
    grid = build_grid(2, 2 * ell)
    f = sample_field(2, ell, grid, seed=8, replica=0)
    coefs = recover_harmonic_coeffs(f)
    assert float(np.sum(coefs ** 2)) == pytest.approx(float(grid.integrate(f.values ** 2)), abs=1e-9)


# ------------------------------------------------------------------
# functionals
# ------------------------------------------------------------------

@pytest.fixture(scope="module")
def field_d2():
    grid = build_grid(2, 40)
    return sample_field(2, 10, grid, seed=3, replica=0)


def test_functional_h_trivial_orders(field_d2):
    h0 = functional_h(field_d2, 0, normalize=False)
    assert h0.raw == pytest.approx(4 * math.pi, rel=1e-12)
    h1 = functional_h(field_d2, 1, normalize=False)
    assert abs(h1.raw) < 1e-10


def test_functional_h_zero_variance(field_d2):
    grid = field_d2.grid
    odd = sample_field(2, 9, grid, seed=3, replica=1)
    with pytest.raises(ZeroVarianceError):
        functional_h(odd, 3)
    assert functional_h(odd, 3, normalize=False).raw == pytest.approx(0.0, abs=1e-9)


def test_functional_h_exactness_flag(field_d2):
    assert functional_h(field_d2, 4, normalize=True).exact_quadrature
    assert not functional_h(field_d2, 5, normalize=True).exact_quadrature


def test_functional_h_empirical_variance():
    ell, q, n = 8, 2, 2000
    grid = build_grid(2, q * ell)
    reps = _sample_batch(grid, ell, seed=13, replicas=range(n))
    from sphclt.specfun import hermite
    vals = hermite(q, reps) @ grid.weights
    target = variance_h(ell, q, 2)
    kurt = float(np.mean((vals - vals.mean()) ** 4)) / float(np.var(vals)) ** 2
    se = target * math.sqrt(max(kurt - 1.0, 0.1) / n)
    assert abs(float(np.var(vals, ddof=1)) - target) < 4.0 * se


def test_grid_exactness_consistency():
    # same coefficients on a doubled grid: quadrature-exact functionals move
    # only at rounding level
    for q in (2, 3, 4):
        g1 = build_grid(2, 4 * 10)
        g2 = build_grid(2, 8 * 10)
        f1 = sample_field(2, 10, g1, seed=4, replica=2)
        f2 = sample_field(2, 10, g2, seed=4, replica=2)
        a = functional_h(f1, q, normalize=False).raw
        b = functional_h(f2, q, normalize=False).raw
        assert abs(a - b) < 1e-9


def test_monomial_to_hermite():
    np.testing.assert_allclose(monomial_to_hermite([0, 0, 1]), [1, 0, 1])        # t^2 = H0 + H2
    np.testing.assert_allclose(monomial_to_hermite([0, 0, 0, 1]), [0, 3, 0, 1])  # t^3 = 3H1 + H3
    np.testing.assert_allclose(monomial_to_hermite([0, 0, 0, 0, 1]), [3, 0, 6, 0, 1])
    with pytest.raises(ValueError):
        monomial_to_hermite(np.zeros(20))


def test_functional_Z_identities(field_d2):
    h2 = functional_h(field_d2, 2, normalize=False).raw
    h3 = functional_h(field_d2, 3, normalize=False).raw
    z2 = functional_Z(field_d2, [0, 0, 1], normalize=False)
    assert z2.raw == pytest.approx(4 * math.pi + h2, rel=1e-12)
    z3 = functional_Z(field_d2, [0, 0, 0, 1], normalize=False)
    assert z3.raw == pytest.approx(h3, abs=1e-10)


def test_functional_excursion_limits(field_d2):
    assert functional_excursion(field_d2, 60.0).raw == pytest.approx(4 * math.pi, rel=1e-12)
    assert functional_excursion(field_d2, -60.0).raw == 0.0


def test_functional_excursion_symmetry():
    ell, n = 8, 1500
    grid = build_grid(2, 4 * ell)
    reps = _sample_batch(grid, ell, seed=21, replicas=range(n))
    centered = (reps <= 0.0) @ grid.weights - 4 * math.pi * 0.5
    se = float(np.std(centered)) / math.sqrt(n)
    assert abs(float(np.mean(centered))) < 4.0 * se


# ------------------------------------------------------------------
# Hermite projections and the excursion variance
# ------------------------------------------------------------------

def test_hermite_projection_indicator_values():
    z = 1.0
    assert hermite_projection(("indicator", z), 0) == pytest.approx(ndtr(z), abs=1e-12)
    assert hermite_projection(("indicator", z), 1) == pytest.approx(-phi(z), abs=1e-12)
    # magnitude z*phi(z); the <= z convention makes the sign negative
    assert hermite_projection(("indicator", z), 2) == pytest.approx(-z * phi(z), abs=1e-12)
    assert abs(hermite_projection(("indicator", z), 2)) == pytest.approx(
        math.exp(-0.5) / math.sqrt(2 * math.pi), abs=1e-12)


@pytest.mark.parametrize("z", [-1.3, 0.0, 0.6, 2.2])
@pytest.mark.parametrize("q", [1, 2, 3, 4, 6, 8])
def test_hermite_projection_matches_parts_oracle(z, q):
    assert hermite_projection(("indicator", z), q) == pytest.approx(
        indicator_projection_oracle(z, q), abs=1e-11)


def test_hermite_projection_callable_path():
    assert hermite_projection(lambda t: t * t, 2) == pytest.approx(2.0, abs=1e-10)
    assert hermite_projection(lambda t: t * t, 0) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(TypeError):
        hermite_projection("indicator", 2)


def test_excursion_variance_truncation():
    v8 = excursion_variance(16, 2, 1.0, q_max=8)
    v12 = excursion_variance(16, 2, 1.0, q_max=12)
    assert v8 > 0
    assert abs(v12 - v8) / v8 < 0.01  # truncation tail is sub-percent
