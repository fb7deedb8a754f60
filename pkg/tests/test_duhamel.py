import itertools

import numpy as np
import pytest

from avgwave.covariance import SchoenbergMeasure
from avgwave.duhamel import (first_order_term, first_order_term_exact_inner, free_term, momentum_integral_exact,
                             pairing_count, weak_coupling_check, _momentum_factor)
from avgwave.ensemble import EnsembleEstimate
from avgwave.representation import FKEnsemble, InitialProfile

ONE = SchoenbergMeasure.from_atoms([(1.0, 1.0)])
TWO = SchoenbergMeasure.from_atoms([(1.0, 0.6), (2.0, 0.3)])


def _pairings(items):
    if not items:
        yield []
        return
    a = items[0]
    for i in range(1, len(items)):
        rest = items[1:i] + items[i + 1:]
        for p in _pairings(rest):
            yield [(a, items[i])] + p


def test_pairing_count():
    assert [pairing_count(n) for n in (1, 2, 3)] == [1, 3, 15]
    for n in (1, 2, 3, 4):
        assert pairing_count(n) == sum(1 for _ in _pairings(list(range(2 * n))))
    with pytest.raises(ValueError):
        pairing_count(0)


def test_free_term():
    prof = InitialProfile.gaussian(2)
    assert free_term(2, 0.3, [1.0, 2.0], prof).value == prof.free_evolution([1.0, 2.0], 0.3)


def test_trivial_limits():
    prof = InitialProfile.gaussian(1)
    assert first_order_term(SchoenbergMeasure.zero(), 1, 0.25, 0.25, [1.0], prof).value == 0
    assert abs(first_order_term(ONE, 1, 0.25, 1e-8, [1.0], prof).value) < 1e-14


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("eps", [0.25, 0.05])
def test_quadrature_matches_closed_form_inner_integral(dim, eps):
    prof = InitialProfile.gaussian(dim)
    xi = np.array([1.0, -0.5][:dim])
    quad = first_order_term(TWO, dim, eps, 0.25, xi, prof)
    exact = first_order_term_exact_inner(TWO, dim, eps, 0.25, xi, prof)
    assert quad.value == pytest.approx(exact, rel=1e-10)
    assert quad.quadrature_error < 1e-10 * abs(quad.value)


def test_momentum_factor_against_closed_form():
    v = np.array([1e-4, 0.01, 0.2])
    per_axis = _momentum_factor(1.0, 0.25, 0.7, v, 48)
    full = momentum_integral_exact(ONE, 1, 0.25, [0.7], v)
    assert np.allclose(np.sqrt(2 * np.pi) * per_axis, full, rtol=1e-10)


@pytest.mark.parametrize("dim", [1, 2])
def test_linear_in_weights(dim):
    prof = InitialProfile.gaussian(dim)
    xi = [0.8] * dim
    a = first_order_term(TWO, dim, 0.2, 0.3, xi, prof).value
    b = first_order_term(TWO.scaled(2.0), dim, 0.2, 0.3, xi, prof).value
    assert abs(b - 2 * a) <= 1e-10 * abs(2 * a)


@pytest.mark.parametrize("dim", [1, 2])
def test_reflection_symmetry(dim):
    # the first pairing term depends on |xi| only, so F_1(-xi) = F_1(xi), not its conjugate
    prof = InitialProfile.gaussian(dim)
    xi = np.array([1.0, 0.4][:dim])
    plus = first_order_term(ONE, dim, 0.25, 0.25, xi, prof).value
    minus = first_order_term(ONE, dim, 0.25, 0.25, -xi, prof).value
    assert minus == pytest.approx(plus, rel=1e-12)
    assert abs(minus - np.conj(plus)) > 1e-3


@pytest.mark.slow
def test_first_order_is_weight_derivative_of_fk():
    prof = InitialProfile.gaussian(1)
    xi = np.array([1.0])
    ens = FKEnsemble.simulate(ONE, 1, 0.25, 0.25, 4000, 2048, 7)
    ws = np.array([0.04, 0.02, 0.01])
    # weights of the quadratic extrapolation to w = 0
    coef = np.linalg.solve(np.vander(ws, 3, increasing=True).T, [1.0, 0.0, 0.0])
    phi0, drift, x = prof.fourier(xi), ens._drift(xi), ens.x_eps()
    quotients = [phi0 * (np.exp(drift - w * x) - np.exp(drift)) / w for w in ws]
    est = EnsembleEstimate.from_samples(sum(c * q for c, q in zip(coef, quotients)))
    first = first_order_term(ONE, 1, 0.25, 0.25, xi, prof).value
    assert abs(est.mean - first) <= 3 * est.stderr


def test_weak_coupling_residual_vanishes():
    prof = InitialProfile.gaussian(1)
    rep = weak_coupling_check(ONE, 1, 0.25, 0.25, [0.0], prof, [0.2, 0.1, 0.05], 300, 256, 3)
    assert rep.residuals[0] > rep.residuals[1] > rep.residuals[2]
    assert len(rep.ratios) == 2
    with pytest.raises(ValueError):
        weak_coupling_check(ONE, 1, 0.25, 0.25, [0.0], prof, [0.5, 1.0], 10, 16, 0)
