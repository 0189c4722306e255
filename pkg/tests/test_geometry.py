import math

import numpy as np
import pytest

from honeylat.errors import InvalidArgument
from honeylat.geometry import R, edge_frame, make_lattice, parse_edge, rotate_index


def test_duality(lat):
    A = np.vstack([lat.v1, lat.v2])
    B = np.vstack([lat.k1, lat.k2])
    assert np.allclose(A @ B.T, 2 * math.pi * np.eye(2), atol=1e-14)
    assert lat.q == pytest.approx(4 * math.pi / math.sqrt(3), rel=1e-15)
    assert lat.cell_area == pytest.approx(abs(np.linalg.det(A)), rel=1e-15)


def test_K_is_rotation_fixed_mod_dual(lat):
    # R K - K must be a dual vector
    d = lat.frac(R @ lat.K - lat.K)
    assert np.allclose(d, np.round(d), atol=1e-12)
    assert np.linalg.norm(lat.K) == pytest.approx(4 * math.pi / 3, rel=1e-14)


def test_rotate_index_matches_matrix(lat):
    for m in [(1, 0), (0, 1), (2, -3), (5, 7)]:
        assert np.allclose(R @ lat.dual(m), lat.dual(rotate_index(m)), atol=1e-12)
    m = (3, 1)
    assert rotate_index(rotate_index(rotate_index(m))) == m


@pytest.mark.parametrize("a1,b1", [(1, 0), (1, 1), (2, 1), (3, -2), (0, 1)])
def test_edge_frame_unimodular(lat, a1, b1):
    e = edge_frame(a1, b1, lat)
    assert a1 * e.b2 - e.a2 * b1 == 1
    V = np.vstack([e.frak_v1, e.frak_v2])
    K = np.vstack([e.frak_K1, e.frak_K2])
    assert np.allclose(V @ K.T, 2 * math.pi * np.eye(2), atol=1e-12)
    for m in [(1, 0), (0, 1), (2, -1)]:
        assert e.from_frame(e.to_frame(m)) == m


def test_zigzag_and_armchair_kpar(zigzag, armchair):
    assert zigzag.kpar_at_K == pytest.approx(2 * math.pi / 3, abs=1e-12)
    assert armchair.kpar_at_K == 0.0


def test_bad_input(lat):
    with pytest.raises(InvalidArgument):
        edge_frame(2, 4, lat)
    with pytest.raises(InvalidArgument):
        edge_frame(0, 0, lat)
    with pytest.raises(InvalidArgument):
        make_lattice(-1.0)
    with pytest.raises(InvalidArgument):
        parse_edge("diagonal")
    assert parse_edge("zigzag") == (1, 0)
    assert parse_edge(" 2,-1 ") == (2, -1)
