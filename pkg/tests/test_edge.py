import math
from dataclasses import replace

import numpy as np
import pytest

from honeylat import bloch, edge
from honeylat.errors import ConfigError, InvalidArgument
from honeylat.potential import zero_potential


def cfg(zz, **kw):
    base = dict(edge=zz, N=8, M1=3, M2=4, eps=10.0, delta=0.4)
    base.update(kw)
    return edge.SupercellConfig(**base)


def test_delta_zero_decouples(VW, zigzag, armchair):
    V, _ = VW
    assert edge.decoupling_check(V, cfg(zigzag)) < 1e-12
    assert edge.decoupling_check(V, cfg(armchair, M1=2)) < 1e-12


@pytest.mark.parametrize("method", ["planewave", "fd"])
def test_hermitian(VW, zigzag, method):
    V, W = VW
    op = edge.assemble_edge(V, W, cfg(zigzag, method=method))
    assert op.hermiticity() < 1e-13


def test_free_operator_is_diagonal(lat, zigzag):
    op = edge.assemble_edge(zero_potential(lat), None, cfg(zigzag, delta=0.0, check_separation=False))
    assert np.count_nonzero(op.H - np.diag(np.diag(op.H))) == 0


def test_fd_matches_planewave_bulk(VW, zigzag):
    V, _ = VW
    dp = bloch.find_dirac_point(V, 8, eps=10.0)
    a = edge.reference_energy(V, cfg(zigzag, M1=4), dp.E_star)
    b = edge.reference_energy(V, cfg(zigzag, M1=4, method="fd"), dp.E_star)
    assert a == pytest.approx(b, abs=1e-6)


def test_walls_too_close(VW, zigzag):
    V, W = VW
    with pytest.raises(ConfigError):
        edge.assemble_edge(V, W, cfg(zigzag, delta=0.1))


def test_bad_config(zigzag):
    with pytest.raises(InvalidArgument):
        cfg(zigzag, method="spectral")
    with pytest.raises(InvalidArgument):
        cfg(zigzag, method="fd", fd_order=7)
    with pytest.raises(InvalidArgument):
        cfg(zigzag, N=0)


def test_dirac_alignment(zigzag):
    c = cfg(zigzag, N=64)
    a, b, tie = c.dirac_frame()
    assert not tie and a == pytest.approx(1 / 3)
    ms, c2, j0 = c.layout()
    # the grid omega = c2 + j/N hits the Dirac point exactly
    assert c2 + j0 / 64 == pytest.approx(b, abs=1e-12)
    _, _, tie = cfg(zigzag, k_par=math.pi).dirac_frame()
    assert tie


def test_free_cylinder_transform(lat, zigzag):
    basis = edge.cylinder_basis(zero_potential(lat), zigzag, N=8, M1=2, M2=2, n_bands=4)
    rng = np.random.default_rng(3)
    ft = rng.normal(size=(4, 8)) + 1j * rng.normal(size=(4, 8))
    f = edge.inverse_cylinder_bloch_transform(ft, basis)
    g, res = edge.cylinder_bloch_transform(f, basis)
    assert np.allclose(g, ft, atol=1e-12) and res < 1e-12
    assert np.linalg.norm(f) == pytest.approx(np.linalg.norm(ft), rel=1e-13)
    # free energies are |k|^2 sorted
    assert np.all(np.diff(basis.energies, axis=1) >= -1e-12)


def test_power_fit():
    x = np.array([0.1, 0.2, 0.4])
    p, C = edge.power_fit(x, -3 * x ** 2)
    assert p == pytest.approx(2) and C == pytest.approx(-3)
    with pytest.raises(InvalidArgument):
        edge.power_fit([0, 1], [1, 1])


def test_reversed_wall():
    from honeylat.potential import make_wall
    w = make_wall("tanh")
    r = edge.reversed_wall(w)
    z = np.linspace(-3, 3, 7)
    assert np.allclose(r(z), -w(z)) and np.allclose(r.derivative(z), -w.derivative(z))


def test_kpar_mirror_small(VW, zigzag):
    V, W = VW
    c = cfg(zigzag, N=16, M1=3, delta=0.3)
    k = 2 * math.pi / 3 + 0.05
    sw = edge.sweep_kpar(V, W, zigzag, 10.0, 0.3, [k, 2 * math.pi - k], c, n_eigs=4)
    a, b = ([s.E for s in sp] for sp in sw.spectra)
    assert np.allclose(a, b, atol=1e-9)


@pytest.fixture(scope="module")
def small_eps_states(VW, zigzag):
    V, W = VW
    dp = bloch.find_dirac_point(V, 8, eps=0.5)
    bloch.lambda_sharp(dp)
    out = []
    for d in (0.0625, 0.03125):
        c = edge.SupercellConfig(edge=zigzag, N=int(math.ceil(140 / d)), M1=2, eps=0.5, delta=d, method="fd")
        Er = edge.reference_energy(V, c, dp.E_star)
        op = edge.assemble_edge(V, W, c)
        wall, anti = edge.doublet(edge.solve_near(op, Er, 4))
        out.append((d, Er, op, wall, anti, edge.compare_multiscale(op, wall, dp, W)))
    return dp, out


def test_multiscale_defect_shrinks(small_eps_states):
    _, rows = small_eps_states
    (d1, *_, r1), (d2, *_, r2) = rows
    p = math.log(r1.defect / r2.defect) / math.log(d1 / d2)
    assert p >= 0.5
    assert r2.rate_error < 0.05


def test_doublet_is_second_order(small_eps_states, VW, zigzag):
    # wall and antiwall energies sit at E_star + E2 delta^2 with their own E2; the
    # tunneling part of the splitting is invisible once N delta is large
    from honeylat import effective
    from honeylat.potential import make_wall
    dp, rows = small_eps_states
    _, W = VW
    e2w = effective.e2_coefficient(dp, W, make_wall("tanh"), zigzag.frak_K2).value
    e2a = effective.e2_coefficient(dp, W.scaled(-1), make_wall("tanh"), zigzag.frak_K2).value
    d, Er, _, wall, anti, _ = rows[-1]
    assert (wall.E - Er) / d ** 2 == pytest.approx(e2w, rel=0.02)
    assert (anti.E - Er) / d ** 2 == pytest.approx(e2a, rel=0.02)
