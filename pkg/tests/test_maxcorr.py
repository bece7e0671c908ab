import numpy as np
import pytest

from efflen.errors import DomainError
from efflen.info_math import JointPMF
from efflen.maxcorr import correlation, hgr_maximal_correlation, verify_psi_by_search


def random_pmf(rng, kx, ky):
    w = rng.random((kx, ky))
    return JointPMF(w / w.sum())


@pytest.mark.parametrize("alpha", np.round(np.arange(0, 0.5001, 0.05), 2))
def test_dsbs_psi(alpha):
    res = hgr_maximal_correlation(JointPMF.dsbs(alpha))
    assert abs(res.psi - abs(1 - 2 * alpha)) <= 1e-9


def test_independent_pmfs_have_zero_psi():
    rng = np.random.default_rng(0)
    for _ in range(20):
        px, py = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
        assert hgr_maximal_correlation(JointPMF.independent(px, py)).psi <= 1e-9


def test_identity_pmf_has_unit_psi():
    assert hgr_maximal_correlation(JointPMF(np.diag([0.2, 0.3, 0.5]))).psi == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_spectral_value_matches_search(seed):
    pmf = random_pmf(np.random.default_rng(seed), 3, 3)
    res = hgr_maximal_correlation(pmf)
    rep = verify_psi_by_search(pmf, res, restarts=10, iterations=500, samples=5000, seed=seed)
    assert abs(rep.gap) <= 1e-4
    assert rep.upper_ok


def test_optimal_functions_are_normalised_and_attain_psi():
    pmf = random_pmf(np.random.default_rng(42), 3, 4)
    res = hgr_maximal_correlation(pmf)
    px, py = pmf.marginal_x(), pmf.marginal_y()
    assert px @ res.optimal_e == pytest.approx(0.0, abs=1e-12)
    assert py @ res.optimal_f == pytest.approx(0.0, abs=1e-12)
    assert px @ res.optimal_e**2 == pytest.approx(1.0, abs=1e-12)
    assert py @ res.optimal_f**2 == pytest.approx(1.0, abs=1e-12)
    assert correlation(pmf, res.optimal_e, res.optimal_f) == pytest.approx(res.psi, abs=1e-12)


def test_zero_mass_symbols_are_dropped():
    probs = np.array([[0.4, 0.1, 0.0], [0.1, 0.4, 0.0], [0.0, 0.0, 0.0]])
    res = hgr_maximal_correlation(JointPMF(probs))
    assert res.psi == pytest.approx(0.6, abs=1e-12)
    assert res.optimal_e[2] == 0.0 and res.optimal_f[2] == 0.0


def test_degenerate_marginal():
    res = hgr_maximal_correlation(JointPMF(np.array([[0.3, 0.7]])))
    assert res.degenerate and res.psi == 0.0


def test_invalid_pmf_rejected():
    with pytest.raises(DomainError):
        JointPMF(np.array([[0.5, 0.5], [0.5, 0.5]]))
