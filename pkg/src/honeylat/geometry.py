"""Triangular lattice, dual lattice, high-symmetry points and rational edge frames.

Conventions (lattice constant a):
    v1 = a (sqrt3/2,  1/2)      k1 = (q) (1/2,  sqrt3/2)
    v2 = a (sqrt3/2, -1/2)      k2 = (q) (1/2, -sqrt3/2)      q = 4 pi / (sqrt3 a)

so k_i . v_j = 2 pi delta_ij.  An integer pair m = (m1, m2) labels the dual
vector m1 k1 + m2 k2 throughout the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

SQRT3 = math.sqrt(3.0)

# clockwise rotation by 2 pi / 3
R = np.array([[-0.5, SQRT3 / 2.0], [-SQRT3 / 2.0, -0.5]])


@dataclass(frozen=True)
class TriangularLattice:
    a: float
    v1: np.ndarray
    v2: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    q: float
    cell_area: float

    def dual(self, m) -> np.ndarray:
        """Dual-lattice vector(s) m1 k1 + m2 k2; m may be (2,) or (n, 2)."""
        return np.asarray(m, dtype=float) @ np.vstack([self.k1, self.k2])

    def direct(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return n[0] * self.v1 + n[1] * self.v2

    @property
    def K(self) -> np.ndarray:
        return (self.k1 - self.k2) / 3.0

    @property
    def Kprime(self) -> np.ndarray:
        return -(self.k1 - self.k2) / 3.0

    def frac(self, k) -> np.ndarray:
        """Coordinates of k in the (k1, k2) basis."""
        B = np.column_stack([self.k1, self.k2])
        return np.linalg.solve(B, np.asarray(k, dtype=float))


def make_lattice(a: float = 1.0) -> TriangularLattice:
    if not (a > 0) or not math.isfinite(a):
        raise InvalidArgument(f"lattice scale must be positive, got {a!r}")
    v1 = a * np.array([SQRT3 / 2.0, 0.5])
    v2 = a * np.array([SQRT3 / 2.0, -0.5])
    q = 4.0 * math.pi / (SQRT3 * a)
    k1 = q * np.array([0.5, SQRT3 / 2.0])
    k2 = q * np.array([0.5, -SQRT3 / 2.0])
    for arr in (v1, v2, k1, k2):
        arr.setflags(write=False)
    return TriangularLattice(a=a, v1=v1, v2=v2, k1=k1, k2=k2, q=q,
                             cell_area=SQRT3 * a * a / 2.0)


@dataclass(frozen=True)
class HighSymmetryPoints:
    K: np.ndarray
    Kprime: np.ndarray
    R: np.ndarray = field(default_factory=lambda: R.copy())


def high_symmetry_points(lat: TriangularLattice) -> HighSymmetryPoints:
    return HighSymmetryPoints(K=lat.K, Kprime=lat.Kprime, R=R.copy())


def rotate_index(m):
    """Index action of R on dual vectors: R (m1 k1 + m2 k2) = (-m2) k1 + (m1 - m2) k2."""
    m1, m2 = int(m[0]), int(m[1])
    return (-m2, m1 - m2)


def _ext_gcd(x: int, y: int):
    # returns (g, s, t) with s x + t y = g
    old_r, r = x, y
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        quo = old_r // r
        old_r, r = r, old_r - quo * r
        old_s, s = s, old_s - quo * s
        old_t, t = t, old_t - quo * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


@dataclass(frozen=True)
class EdgeFrame:
    a1: int
    b1: int
    a2: int
    b2: int
    frak_v1: np.ndarray
    frak_v2: np.ndarray
    frak_K1: np.ndarray
    frak_K2: np.ndarray
    kpar_at_K: float
    lattice: TriangularLattice

    @property
    def K1_index(self):
        """frak_K1 as a dual index pair."""
        return (self.b2, -self.a2)

    @property
    def K2_index(self):
        return (-self.b1, self.a1)

    def to_frame(self, m):
        """Coordinates (n1, n2) of the dual vector m in the (frak_K1, frak_K2) basis.

        n_l = (m k) . frak_v_l / 2 pi, which is an integer pair.
        """
        m1, m2 = int(m[0]), int(m[1])
        return (m1 * self.a1 + m2 * self.b1, m1 * self.a2 + m2 * self.b2)

    def from_frame(self, n):
        n1, n2 = int(n[0]), int(n[1])
        return (n1 * self.b2 - n2 * self.b1, -n1 * self.a2 + n2 * self.a1)


def edge_frame(a1: int, b1: int, lat: TriangularLattice | None = None) -> EdgeFrame:
    """Complete the edge vector a1 v1 + b1 v2 to a unimodular frame.

    Among all (a2, b2) with a1 b2 - a2 b1 = 1 the one with least |a2| + |b2| is
    taken; ties go to a2 >= 0, then to the smaller b2.
    """
    a1, b1 = int(a1), int(b1)
    if (a1, b1) == (0, 0):
        raise InvalidArgument("edge direction (0, 0) is not allowed")
    g, s, t = _ext_gcd(a1, b1)
    if g != 1:
        raise InvalidArgument(f"edge indices ({a1}, {b1}) are not coprime (gcd {g})")
    lat = lat or make_lattice(1.0)
    # s a1 + t b1 = 1  ->  b2 = s, a2 = -t is a particular solution
    a2_0, b2_0 = -t, s
    # general solution (a2_0 + n a1, b2_0 + n b1)
    centers = []
    if a1:
        centers.append(-a2_0 / a1)
    if b1:
        centers.append(-b2_0 / b1)
    cands = set()
    for c in centers:
        for n in range(math.floor(c) - 2, math.ceil(c) + 3):
            cands.add((a2_0 + n * a1, b2_0 + n * b1))

    def key(ab):
        a2, b2 = ab
        return (abs(a2) + abs(b2), 0 if a2 >= 0 else 1, b2)

    a2, b2 = min(cands, key=key)
    assert a1 * b2 - a2 * b1 == 1
    fv1 = a1 * lat.v1 + b1 * lat.v2
    fv2 = a2 * lat.v1 + b2 * lat.v2
    fK1 = b2 * lat.k1 - a2 * lat.k2
    fK2 = -b1 * lat.k1 + a1 * lat.k2
    kpar = float(np.mod(lat.K @ fv1, 2.0 * math.pi))
    if abs(kpar - 2.0 * math.pi) < 1e-12:
        kpar = 0.0
    return EdgeFrame(a1=a1, b1=b1, a2=a2, b2=b2, frak_v1=fv1, frak_v2=fv2,
                     frak_K1=fK1, frak_K2=fK2, kpar_at_K=kpar, lattice=lat)


ZIGZAG = (1, 0)
ARMCHAIR = (1, 1)


def parse_edge(spec) -> tuple[int, int]:
    """'zigzag', 'armchair' or 'a1,b1'."""
    if isinstance(spec, (tuple, list)):
        return int(spec[0]), int(spec[1])
    s = str(spec).strip().lower()
    if s == "zigzag":
        return ZIGZAG
    if s == "armchair":
        return ARMCHAIR
    try:
        a1, b1 = (int(p) for p in s.split(","))
    except ValueError as exc:
        raise InvalidArgument(f"cannot parse edge {spec!r}; expected zigzag, armchair or a1,b1") from exc
    return a1, b1
