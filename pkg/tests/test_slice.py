import numpy as np
import pytest

from honeylat import bloch
from honeylat import slice as sl
from honeylat.errors import InvalidArgument
from honeylat.potential import zero_potential


def test_free_slice_matches_closed_form(lat, zigzag):
    lam = np.linspace(-0.5, 0.5, 41)
    curves = sl.dispersion_slice(zero_potential(lat), zigzag, lam, n_bands=8, M=4)
    E = np.column_stack([c.energies for c in curves])
    mu = sl.free_slice_zigzag(lam, lat.q)
    # each K-triplet branch is a free level; other plane waves may sit below the top one
    gap = np.abs(E[:, :, None] - mu[:, None, :]).min(axis=1)
    assert gap.max() < 1e-10
    small = np.abs(lam) <= 0.2
    assert np.allclose(E[small, :3], mu[small], atol=1e-10)


def test_slice_lambda_range(lat, zigzag):
    with pytest.raises(InvalidArgument):
        sl.dispersion_slice(zero_potential(lat), zigzag, [0.7])


def test_reduced_matrix_hermitian_and_delta_symmetric(VW):
    V, W = VW
    for lam in (-0.3, 0.0, 0.2):
        M = sl.m_approx(0.01, 1e-4, lam, V, W).total
        assert np.max(np.abs(M - M.conj().T)) < 1e-12
        a = sl.m_approx(0.01, 1e-4, lam, V, W).det
        b = sl.m_approx(0.01, -1e-4, lam, V, W).det
        assert a == pytest.approx(b, abs=1e-12)


def test_fold_root_between_regime_bounds(VW):
    V, W = VW
    rc = sl.regime_constants(V, -0.2)
    r = sl.find_fold_crossing(-0.2, 0.0, V, W)
    assert rc["lam_lo"] < r < rc["lam_hi"]
    with pytest.raises(InvalidArgument):
        sl.find_fold_crossing(0.2, 0.0, V, W)


def test_no_fold_sign_of_eps(VW, zigzag):
    V, _ = VW
    dp = bloch.find_dirac_point(V, 6, eps=0.2)
    assert sl.no_fold_check(V.scaled(0.2), zigzag, dp, M=6).passed
    dm = bloch.find_dirac_point(V, 6, eps=-0.2)
    r = sl.no_fold_check(V.scaled(-0.2), zigzag, dm, M=6)
    assert not r.passed and r.witness_lambda is not None
