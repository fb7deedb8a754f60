import io

import numpy as np
import pytest

from avgwave.covariance import SchoenbergMeasure, lemma41_limit, rho_d
from avgwave.ensemble import EnsembleEstimate, combined_stderr, compatible
from avgwave.representation import (Budgets, EstimateRow, FKEnsemble, InitialProfile, LimitEnsemble,
                                    compare_routes, fk_average, limit_average, rows_to_csv, split_average)

ONE = SchoenbergMeasure.from_atoms([(1.0, 1.0)])
ZERO = SchoenbergMeasure.zero()


@pytest.mark.parametrize("dim", [1, 2])
def test_zero_measure_is_free_evolution(dim):
    prof = InitialProfile.gaussian(dim)
    xi = np.array([0.8, -0.4][:dim])
    target = prof.free_evolution(xi, 0.5)
    for est in (fk_average(ZERO, dim, 0.1, 0.5, xi, prof, 400, 16, 1),
                split_average(ZERO, dim, 0.1, 0.5, xi, prof, 400, 16, 1),
                limit_average(ZERO, dim, 0.5, xi, prof, 400, 16, seed=1)):
        assert abs(est.mean - target) <= 3 * est.stderr
    exact = fk_average(ZERO, dim, 0.1, 0.5, np.zeros(dim), prof, 10, 16, 1)
    assert exact.mean == prof.fourier(np.zeros(dim))
    assert exact.stderr == 0.0


@pytest.mark.parametrize("dim", [1, 2])
def test_split_equals_fk(dim):
    m = SchoenbergMeasure.from_atoms([(1.0, 1.0), (2.0, 0.3)])
    prof = InitialProfile.gaussian(dim)
    ens = FKEnsemble.simulate(m, dim, 0.2, 0.25, 200, 256, 3)
    for xi in ([0.0] * dim, [1.0] * dim):
        a, b = ens.fk(xi, prof), ens.split(xi, prof)
        assert abs(a.mean - b.mean) <= 1e-10 * abs(a.mean)
        assert b.stderr == pytest.approx(a.stderr, rel=1e-8)
    assert split_average(m, dim, 0.2, 0.25, [1.0] * dim, prof, 200, 256, 3).mean == \
        pytest.approx(fk_average(m, dim, 0.2, 0.25, [1.0] * dim, prof, 200, 256, 3).mean, rel=1e-10)


def test_split_prefactor_is_lemma41_partial_sum():
    prof = InitialProfile.gaussian(2)
    ens = FKEnsemble.simulate(ONE, 2, 0.1, 0.2, 2, 8, 0)
    pref = ens.split_prefactor([0.0, 0.0], prof)
    expected = prof.fourier([0.0, 0.0]) * np.exp(lemma41_limit(ONE, 2, 0.1, 0.2))
    assert pref == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("dim", [1, 2])
def test_mirrored_paths_give_identical_average_at_minus_xi(dim):
    prof = InitialProfile.gaussian(dim)
    ens = FKEnsemble.simulate(ONE, dim, 0.25, 0.25, 100, 128, 5)
    xi = np.array([1.0, 0.5][:dim])
    plus = ens.fk(xi, prof)
    minus = ens.mirrored().fk(-xi, prof)
    assert minus.mean == plus.mean
    # X_eps is complex, so the mirrored average is not the conjugate
    assert abs(minus.mean - np.conj(plus.mean)) > 1e-3


def test_coupling_rescales_measure():
    prof = InitialProfile.gaussian(2)
    ens = FKEnsemble.simulate(ONE, 2, 0.2, 0.2, 50, 64, 2)
    half = FKEnsemble.simulate(ONE.scaled(0.5), 2, 0.2, 0.2, 50, 64, 2)
    assert ens.fk([1.0, 0.0], prof, coupling=0.5).mean == pytest.approx(half.fk([1.0, 0.0], prof).mean, rel=1e-12)


def test_limit_modulus_bound_d2():
    prof = InitialProfile.gaussian(2)
    ens = LimitEnsemble.simulate(2, 0.2, 200, 128, 4)
    est = ens.average(ONE, [0.0, 0.0], prof)
    bound = abs(prof.fourier([0.0, 0.0]) * np.exp(rho_d(ONE, 2, 0.2)))
    assert abs(est.mean) <= bound * (1 + 1e-12)
    gam = ens.gammas["mollified"]
    assert np.allclose(np.abs(np.exp(-1j * 2 * np.pi * gam)), 1.0)


@pytest.mark.slow
def test_limit_matches_small_eps_fk_d1():
    # fk at eps = 0.02 carries an O(eps) bias of the size of the MC error;
    # the linear extrapolation from eps = 0.02, 0.01 removes it
    prof = InitialProfile.gaussian(1)
    f2 = fk_average(ONE, 1, 0.02, 0.25, [0.0], prof, 500, 8192, 1)
    f1 = fk_average(ONE, 1, 0.01, 0.25, [0.0], prof, 500, 8192, 1)
    lim = limit_average(ONE, 1, 0.25, [0.0], prof, 2000, 4096, seed=2)
    extrap = 2 * f1.mean - f2.mean
    se = np.sqrt(4 * f1.stderr**2 + f2.stderr**2 + lim.stderr**2)
    assert abs(extrap - lim.mean) <= 3 * se
    assert abs(f1.mean - lim.mean) < abs(f2.mean - lim.mean) + 3 * se


def test_compare_routes_zero_measure():
    prof = InitialProfile.gaussian(1)
    rep = compare_routes(ZERO, 1, 0.25, [[0.0]], [0.5, 0.25], prof, Budgets(20, 16, 4, 40.0, 512), 0)
    assert rep.passed
    for row in rep.rows:
        assert row.estimate.mean == pytest.approx(prof.fourier([0.0]), rel=1e-9)
    assert all(c["fk_minus_pde"] < 1e-9 for c in rep.comparisons)
    assert '"fk_pde_compatible": true' in rep.to_json()


def test_csv_schema():
    rows = [EstimateRow(2, 0.1, 0.2, (0.0, 1.0), "fk", EnsembleEstimate(1 + 2j, 0.1, 10)),
            EstimateRow(2, 0.0, 0.2, (0.0, 1.0), "limit", EnsembleEstimate(0.5, 0.2, 20))]
    text = rows_to_csv(rows)
    assert text.splitlines() == [
        "dim,eps,t,xi1,xi2,route,mean_re,mean_im,stderr,n",
        "2,0.1,0.2,0.0,1.0,fk,1.0,2.0,0.1,10",
        "2,0.0,0.2,0.0,1.0,limit,0.5,0.0,0.2,20",
    ]


def test_preconditions():
    prof = InitialProfile.gaussian(1)
    with pytest.raises(ValueError):
        fk_average(ONE, 1, 0.0, 1.0, [0.0], prof, 10, 10, 0)
    with pytest.raises(ValueError):
        fk_average(ONE, 1, 0.1, 1.0, [0.0], prof, 1, 10, 0)
    with pytest.raises(ValueError):
        limit_average(ONE, 1, 1.0, [0.0], prof, 10, 10, moll_eps=-1.0)
