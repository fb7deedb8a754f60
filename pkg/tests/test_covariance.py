import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avgwave.covariance import (ModelConstants, SchoenbergMeasure, correlation, correlation_complex,
                                lemma41_limit, mean_x_tau, mean_x_tau_quad, minus_two_pi_i_pow, rbar,
                                rbar2_prime, renorm_constant, rho_d, oscillatory_kernel_integral,
                                spectral_density)

ONE = SchoenbergMeasure.from_atoms([(1.0, 1.0)])
TWO = SchoenbergMeasure.from_atoms([(1.0, 0.5), (2.0, 0.5)])

atoms = st.lists(st.tuples(st.floats(0.2, 5.0), st.floats(0.05, 3.0)), min_size=1, max_size=4)


def test_measure_rejects_bad_atoms():
    with pytest.raises(ValueError):
        SchoenbergMeasure.from_atoms([(0.0, 1.0)])
    with pytest.raises(ValueError):
        SchoenbergMeasure.from_atoms([(1.0, -1.0)])
    with pytest.raises(ValueError):
        SchoenbergMeasure.from_atoms([(math.inf, 1.0)])
    assert SchoenbergMeasure.zero().is_zero


def test_correlation_values():
    assert correlation(ONE, 0.0) == 1.0
    assert correlation(TWO, 1.0) == pytest.approx(0.370933, abs=1e-6)
    assert correlation(ONE, 1e3) == 0.0


def test_correlation_complex_values():
    assert correlation_complex(ONE, 0.0) == 1.0
    assert correlation_complex(ONE, math.sqrt(math.pi)) == pytest.approx(-1j, abs=1e-15)
    assert correlation_complex(TWO, 0.0) == 1.0


def test_rbar_values():
    assert rbar(SchoenbergMeasure.from_atoms([(math.sqrt(2 * math.pi), 1.0)]), 2) == pytest.approx(1.0, rel=1e-15)
    assert rbar(SchoenbergMeasure.zero(), 1) == 0.0
    assert rbar(ONE, 1) == pytest.approx(2.506628, abs=1e-6)


def test_rbar2_prime_values():
    assert rbar2_prime(ONE) == 0.0
    # 2 pi / e^2 evaluates to 0.850337; the tabulated 0.850270 is a rounding slip
    assert rbar2_prime(SchoenbergMeasure.from_atoms([(math.e, 1.0)])) == pytest.approx(2 * math.pi / math.e**2)
    assert rbar2_prime(SchoenbergMeasure.from_atoms([(math.e, 1.0)])) == pytest.approx(0.850337, abs=1e-6)
    assert rbar2_prime(SchoenbergMeasure.from_atoms([(1.0, 0.5), (1.0, 0.5)])) == 0.0


def test_renorm_constant_values():
    assert renorm_constant(ONE, 1, 0.01) == 0.0
    m = SchoenbergMeasure.from_atoms([(math.sqrt(2.0), 1.0)])
    assert rbar(m, 2) == pytest.approx(math.pi)
    assert renorm_constant(m, 2, math.exp(-1)) == pytest.approx(1.0, rel=1e-14)
    assert renorm_constant(ONE, 2, 1.0) == 0.0
    with pytest.raises(ValueError):
        renorm_constant(ONE, 2, 0.0)


def test_rho_d_values():
    m1 = SchoenbergMeasure.from_atoms([(math.sqrt(2 * math.pi), 1.0)])
    assert rbar(m1, 1) == pytest.approx(1.0)
    assert rho_d(m1, 1, 1.0) == pytest.approx(-0.376126 + 0.376126j, abs=1e-6)
    # Rbar_2 = 1 and Rbar_2' = 0 with lambda = 1
    m2 = SchoenbergMeasure.from_atoms([(1.0, 1 / (2 * math.pi))])
    assert rho_d(m2, 2, math.e) == pytest.approx(-math.e / 4, abs=1e-12)
    assert rho_d(SchoenbergMeasure.zero(), 2, 0.7) == 0


def test_branch_consistency():
    half = minus_two_pi_i_pow(1)
    assert half * half == pytest.approx(-2j * math.pi, rel=1e-15)
    assert minus_two_pi_i_pow(2) == pytest.approx(-2j * math.pi, rel=1e-15)


def test_model_constants():
    c = ModelConstants.from_measure(ONE, 2)
    assert c.i_pow_3d_2 == -1j
    assert c.sqrt_i**2 == pytest.approx(1j)
    assert c.i_pow_3_2 == pytest.approx(1j**1.5)
    assert ModelConstants.from_measure(ONE, 1).rbar2_prime == 0.0


def test_mean_x_tau_asymptotics():
    assert abs(mean_x_tau(1, 1e-8, 1.0) - 4 / (3 * math.sqrt(2 * math.pi))) < 1e-3
    target = (1 / (2 * math.pi)) * math.log(1 / (math.e * 1e-6)) - 0.25j
    assert abs(mean_x_tau(2, 1e-6, 1.0) - target) < 0.01
    for d in (1, 2):
        assert abs(mean_x_tau(d, 1e-3, 1e-12)) < 1e-9


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("tau", [1e-6, 1e-3, 0.1, 1.0, 30.0])
@pytest.mark.parametrize("t", [0.05, 1.0, 4.0])
def test_mean_x_tau_closed_form_matches_quadrature(dim, tau, t):
    assert mean_x_tau(dim, tau, t) == pytest.approx(mean_x_tau_quad(dim, tau, t), rel=1e-8)


@pytest.mark.parametrize("dim", [1, 2])
def test_mean_x_tau_bounded_for_large_tau(dim):
    for tau in (1.0, 10.0, 100.0, 1000.0):
        assert abs(mean_x_tau(dim, tau, 1.0)) <= 10


@pytest.mark.parametrize("dim", [1, 2])
def test_lemma41_converges_to_rho(dim):
    target = rho_d(ONE, dim, 1.0)
    errs = [abs(lemma41_limit(ONE, dim, eps, 1.0) - target) for eps in (1e-1, 1e-2, 1e-3)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 0.01 * abs(target)


def test_lemma41_zero_measure():
    assert lemma41_limit(SchoenbergMeasure.zero(), 1, 0.1, 1.0) == 0


def test_spectral_density_values():
    assert spectral_density(ONE, 1, 0.0) == pytest.approx(rbar(ONE, 1))
    assert spectral_density(ONE, 2, [0.0, 0.0]) == pytest.approx(rbar(ONE, 2))
    assert spectral_density(ONE, 1, 1.0) == pytest.approx(1.520347, abs=1e-6)
    assert spectral_density(ONE, 1, 60.0) < 1e-300


@pytest.mark.parametrize("dim", [1, 2])
def test_correlation_is_fourier_transform_of_spectral_density(dim):
    # rho(r) = (2 pi)^{-d} int R_hat(p) e^{i p.x} dp, done as a Riemann sum on a wide grid
    n, box = 512, 80.0
    dp = box / n
    p = (np.arange(n) - n // 2) * dp
    if dim == 1:
        dens = spectral_density(TWO, 1, p)
        for r in (0.0, 0.5, 1.3):
            val = np.sum(dens * np.cos(p * r)) * dp / (2 * math.pi)
            assert val == pytest.approx(correlation(TWO, r), rel=1e-6)
    else:
        px, py = np.meshgrid(p, p, indexing="ij")
        dens = spectral_density(TWO, 2, np.stack([px, py], axis=-1))
        for r in (0.0, 0.5, 1.3):
            val = np.sum(dens * np.cos(px * r)) * dp**2 / (2 * math.pi) ** 2
            assert val == pytest.approx(correlation(TWO, r), rel=1e-6)


def test_oscillatory_kernel_bound():
    grid = (0.01, 0.1, 1.0, 10.0)
    for tau in grid:
        for lam in grid:
            for t in grid:
                assert abs(oscillatory_kernel_integral(tau, lam, t)) <= 10 / math.sqrt(lam)


@settings(max_examples=40, deadline=None)
@given(atoms, st.floats(0.0, 10.0))
def test_correlation_bounded_by_total_mass(a, r):
    m = SchoenbergMeasure.from_atoms(a)
    assert 0.0 <= correlation(m, r) <= m.total_mass * (1 + 1e-12)
    assert abs(correlation_complex(m, r)) <= m.total_mass * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(atoms, st.floats(0.1, 10.0))
def test_rbar_and_rho_linear_in_weights(a, c):
    m = SchoenbergMeasure.from_atoms(a)
    for d in (1, 2):
        assert rbar(m.scaled(c), d) == pytest.approx(c * rbar(m, d), rel=1e-12)
        assert rho_d(m.scaled(c), d, 0.3) == pytest.approx(c * rho_d(m, d, 0.3), rel=1e-12, abs=1e-14)
