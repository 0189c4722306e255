"""Plane-wave Floquet-Bloch fibers H(k) = -(grad + ik)^2 + V, rotation sectors at
the Brillouin-zone vertex K, Dirac points, cone slope and the W-coupling.

A Bloch function at quasi-momentum k is stored as coefficients c_m of the
orthonormal plane waves e_m = |cell|^{-1/2} exp(i (k + m1 k1 + m2 k2) . x).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (AmbiguousMultiplicity, InvalidArgument, NotADiracPoint,
                     NotConical, NumericFailure, SymmetryViolation)
from .geometry import TriangularLattice
from .potential import FourierPotential, validate_honeycomb, validate_W

TAU = complex(math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3))
SECTORS = {"1": 1.0 + 0j, "tau": TAU, "taubar": TAU.conjugate()}


# ---------------------------------------------------------------- bases

def square_indices(M: int, center=(0, 0)) -> np.ndarray:
    r = np.arange(-M, M + 1)
    A, B = np.meshgrid(r + center[0], r + center[1], indexing="ij")
    return np.column_stack([A.ravel(), B.ravel()])


def rho(m):
    """Index map of the rotation on K-pseudo-periodic plane waves.

    R (K + m k) = K + (rho m) k  with  rho(m1, m2) = (-m2, m1 - m2 + 1).
    """
    m = np.asarray(m)
    return np.stack([-m[..., 1], m[..., 0] - m[..., 1] + 1], axis=-1)


def k_indices(M: int) -> np.ndarray:
    """The square window closed under rho, so that sectors at K split exactly."""
    sq = square_indices(M)
    allm = np.concatenate([sq, rho(sq), rho(rho(sq))])
    allm = np.unique(allm, axis=0)
    return allm


def _position_map(idx: np.ndarray):
    return {(int(a), int(b)): i for i, (a, b) in enumerate(idx)}


def potential_matrix(P: FourierPotential, idx: np.ndarray) -> np.ndarray:
    """Matrix P_{m-n} over the index list idx (any shape of window)."""
    D = len(idx)
    out = np.zeros((D, D), dtype=complex)
    pidx, pval = P.arrays()
    if len(pval) == 0:
        return out
    lo = idx.min(axis=0)
    span = idx.max(axis=0) - lo + 1
    lut = -np.ones(tuple(span), dtype=np.int64)
    lut[idx[:, 0] - lo[0], idx[:, 1] - lo[1]] = np.arange(D)
    cols = np.arange(D)
    for d, v in zip(pidx, pval):
        tgt = idx + d                                   # m = n + d
        t0 = tgt[:, 0] - lo[0]
        t1 = tgt[:, 1] - lo[1]
        ok = (t0 >= 0) & (t0 < span[0]) & (t1 >= 0) & (t1 < span[1])
        rows = np.full(D, -1)
        rows[ok] = lut[t0[ok], t1[ok]]
        good = rows >= 0
        out[rows[good], cols[good]] += v
    return out


def momenta(lat: TriangularLattice, k, idx: np.ndarray) -> np.ndarray:
    return np.asarray(k, dtype=float)[None, :] + lat.dual(idx)


# ---------------------------------------------------------------- fibers

@dataclass
class BlochFiber:
    k: np.ndarray
    M: int
    indices: np.ndarray
    H: np.ndarray
    lattice: TriangularLattice


@dataclass
class BandSolution:
    energies: np.ndarray
    vectors: np.ndarray
    k: np.ndarray
    M: int
    indices: np.ndarray
    residual: float = 0.0


def assemble_fiber(V: FourierPotential, k, M: int, indices: np.ndarray | None = None,
                   recenter: bool = False) -> BlochFiber:
    if M < 1:
        raise InvalidArgument("truncation radius M must be >= 1")
    lat = V.lattice
    k = np.asarray(k, dtype=float)
    if indices is None:
        center = (0, 0)
        if recenter:
            f = np.rint(lat.frac(k)).astype(int)
            center = (-int(f[0]), -int(f[1]))
        indices = square_indices(M, center)
    p = momenta(lat, k, indices)
    H = potential_matrix(V, indices)
    H[np.diag_indices_from(H)] += np.einsum("ij,ij->i", p, p)
    return BlochFiber(k=k, M=M, indices=indices, H=H, lattice=lat)


def solve_fiber(f: BlochFiber, n_bands: int | None = None, vectors: bool = True) -> BandSolution:
    D = f.H.shape[0]
    n_bands = D if n_bands is None else int(n_bands)
    if not 1 <= n_bands <= D:
        raise InvalidArgument(f"n_bands={n_bands} outside 1..{D}")
    try:
        if vectors:
            E, U = sla.eigh(f.H, subset_by_index=[0, n_bands - 1], driver="evr")
        else:
            E = sla.eigh(f.H, subset_by_index=[0, n_bands - 1], eigvals_only=True, driver="evr")
            U = np.zeros((D, 0))
    except (sla.LinAlgError, ValueError) as exc:
        raise NumericFailure(f"fiber eigensolver failed at k={f.k}: {exc}") from exc
    res = 0.0
    if vectors:
        R = f.H @ U - U * E[None, :]
        res = float(np.max(np.linalg.norm(R, axis=0) / (1.0 + np.abs(E)), initial=0.0))
        if res > 1e-9:
            raise NumericFailure(f"eigen-residual {res:.3g} above 1e-9 at k={f.k}")
    return BandSolution(energies=E, vectors=U, k=f.k, M=f.M, indices=f.indices, residual=res)


def bands_at(V: FourierPotential, k, M: int, n_bands: int, recenter: bool = True) -> np.ndarray:
    return solve_fiber(assemble_fiber(V, k, M, recenter=recenter), n_bands, vectors=False).energies


def band_surface(V: FourierPotential, n_k: int = 24, M: int = 6, n_bands: int = 4,
                 threads: int = 1):
    """Rows (k1_frac, k2_frac, b, E) on an n_k x n_k grid of the cell spanned by k1, k2."""
    lat = V.lattice
    fr = [(i / n_k, j / n_k) for i in range(n_k) for j in range(n_k)]

    def one(f):
        k = f[0] * lat.k1 + f[1] * lat.k2
        return f, bands_at(V, k, M, n_bands)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            res = list(ex.map(one, fr))
    else:
        res = [one(f) for f in fr]
    rows = []
    for (a, b), E in res:
        for j, e in enumerate(E):
            rows.append((a, b, j + 1, float(e)))
    return rows


# ---------------------------------------------------------------- sectors at K

@dataclass
class Sector:
    sigma: complex
    U: np.ndarray          # columns: symmetrised orbit vectors in the plane-wave basis
    H: np.ndarray          # U^dagger H(K) U
    reps: np.ndarray       # orbit representatives


def orbits(idx: np.ndarray):
    """Partition of a rho-closed index list into orbits (m, rho m, rho^2 m)."""
    pos = _position_map(idx)
    seen = np.zeros(len(idx), dtype=bool)
    out = []
    # the orbit of (0,0) first, represented by (0,0)
    order = [pos[(0, 0)]] + [i for i in range(len(idx)) if i != pos[(0, 0)]]
    for i in order:
        if seen[i]:
            continue
        m0 = idx[i]
        m1 = rho(m0)
        m2 = rho(m1)
        trip = [i, pos[(int(m1[0]), int(m1[1]))], pos[(int(m2[0]), int(m2[1]))]]
        seen[trip] = True
        out.append(trip)
    return out


def sector_decompose(V: FourierPotential, M: int, fiber: BlochFiber | None = None):
    """Split H(K) on the rho-closed window into the sigma = 1, tau, taubar blocks."""
    lat = V.lattice
    idx = k_indices(M) if fiber is None else fiber.indices
    f = fiber or assemble_fiber(V, lat.K, M, indices=idx)
    orbs = orbits(idx)
    D, n = len(idx), len(orbs)
    out = {}
    for name, s in SECTORS.items():
        U = np.zeros((D, n), dtype=complex)
        w = np.array([1.0, s.conjugate(), s.conjugate() ** 2]) / math.sqrt(3.0)
        for j, trip in enumerate(orbs):
            U[trip, j] = w
        out[name] = Sector(sigma=s, U=U, H=U.conj().T @ f.H @ U,
                           reps=idx[[t[0] for t in orbs]])
    return out, f


# ---------------------------------------------------------------- Dirac points

@dataclass
class DiracPointData:
    K: np.ndarray
    E_star: float
    b_star: int
    phi1: np.ndarray
    phi2: np.ndarray
    indices: np.ndarray
    E_tilde: float
    gap_to_next: float
    spectrum_K: np.ndarray
    V: FourierPotential
    M: int
    lambda_sharp_abs: float | None = None
    lambda_sharp_sum: complex | None = None
    theta_sharp: float | None = None
    cone: dict = field(default_factory=dict)

    @property
    def lattice(self):
        return self.V.lattice

    def momenta(self):
        return momenta(self.lattice, self.K, self.indices)


def find_dirac_point(V: FourierPotential, M: int = 8, eps: float = 1.0, tol: float | None = None,
                     which: int = 0) -> DiracPointData:
    """Dirac point at the vertex K from the tau / taubar sector spectra.

    E_star is the which-th tau eigenvalue (0 = the pair born from the lowest free
    level).  Raises when the honeycomb symmetries fail or when the sigma = 1
    branch collides with it.
    """
    V = V.scaled(eps) if eps != 1.0 else V
    rep = validate_honeycomb(V)
    if not rep.ok:
        raise NotADiracPoint(f"potential is not a honeycomb potential: {rep.to_dict()['checks']}")
    sec, f = sector_decompose(V, M)
    ev = {k: np.linalg.eigvalsh(s.H) for k, s in sec.items()}
    E = float(ev["tau"][which])
    tol = 1e-8 * max(1.0, abs(E)) if tol is None else tol
    if abs(ev["tau"][which] - ev["taubar"][which]) > tol:
        raise NotADiracPoint(f"tau/taubar eigenvalues differ by {abs(ev['tau'][which] - ev['taubar'][which]):.3g}")
    d1 = np.abs(ev["1"] - E)
    if d1.min() <= tol:
        raise AmbiguousMultiplicity(f"sigma=1 eigenvalue within {d1.min():.3g} of E_star={E}: multiplicity >= 3")
    others = np.concatenate([np.delete(ev["tau"], which), np.delete(ev["taubar"], which)])
    if len(others) and np.abs(others - E).min() <= tol:
        raise AmbiguousMultiplicity("a second tau eigenvalue coincides with E_star")
    allE = np.sort(np.concatenate(list(ev.values())))
    b_star = int(np.sum(allE < E - tol)) + 1
    near = np.concatenate([ev["1"], others])
    gap = float(np.abs(near - E).min())
    E_tilde = float(ev["1"][np.argmin(d1)])
    # eigenvector in the tau sector, gauge: coefficient at m = (0,0) real positive
    w, Z = np.linalg.eigh(sec["tau"].H)
    v = Z[:, which]
    phi1 = sec["tau"].U @ v
    i0 = _position_map(f.indices)[(0, 0)]
    ph = phi1[i0]
    if abs(ph) < 1e-14:
        # fall back to the largest coefficient
        ph = phi1[np.argmax(np.abs(phi1))]
    phi1 = phi1 * (abs(ph) / ph)
    phi1 /= np.linalg.norm(phi1)
    phi2 = phi1.conj()
    return DiracPointData(K=V.lattice.K.copy(), E_star=E, b_star=b_star, phi1=phi1, phi2=phi2,
                          indices=f.indices, E_tilde=E_tilde, gap_to_next=gap, spectrum_K=allE,
                          V=V, M=M)


def in_sector(dp: DiracPointData, vec: np.ndarray, sigma: complex, tol: float = 1e-10) -> bool:
    """c_{rho m} = conj(sigma) c_m for all m."""
    pos = _position_map(dp.indices)
    r = rho(dp.indices)
    j = np.array([pos[(int(a), int(b))] for a, b in r])
    return bool(np.max(np.abs(vec[j] - sigma.conjugate() * vec)) < tol)


def fourier_lambda_sum(dp: DiracPointData) -> complex:
    p = dp.momenta()
    return complex(np.sum(dp.phi1 ** 2 * (p[:, 0] + 1j * p[:, 1])))


def cone_slopes(V: FourierPotential, K, b: int, M: int, directions=None, h0: float | None = None,
                indices=None, gap: float | None = None):
    """Richardson-extrapolated (E_{b+1} - E_b)(K + h u) / 2h for several directions u."""
    lat = V.lattice
    idx = k_indices(M) if indices is None else indices
    if directions is None:
        angles = np.arange(6) * math.pi / 6
        directions = np.column_stack([np.cos(angles), np.sin(angles)])
    if h0 is None:
        h0 = 1e-2 * lat.q
        if gap is not None:
            # stay well inside the conical region |k - K| |lambda| << gap
            h0 = min(h0, 0.02 * gap / np.linalg.norm(K))
    hs = h0 * np.array([1.0, 0.5, 0.25])
    out = []
    for u in np.asarray(directions, dtype=float):
        u = u / np.linalg.norm(u)
        s = []
        for h in hs:
            E = solve_fiber(assemble_fiber(V, K + h * u, M, indices=idx), b + 1, vectors=False).energies
            s.append((E[b] - E[b - 1]) / (2 * h))
        s1 = [2 * s[1] - s[0], 2 * s[2] - s[1]]          # kills O(h)
        out.append((4 * s1[1] - s1[0]) / 3.0)            # kills O(h^2)
    return np.array(out)


def lambda_sharp(dp: DiracPointData, directions=None, max_anisotropy: float = 0.02):
    """Cone slope |lambda_sharp| with the Fourier-sum value alongside.

    Returns (slope, fourier_sum, per-direction slopes).
    """
    sl = cone_slopes(dp.V, dp.K, dp.b_star, dp.M, directions, indices=dp.indices, gap=dp.gap_to_next)
    mean = float(np.mean(sl))
    aniso = float((sl.max() - sl.min()) / abs(mean)) if mean else float("inf")
    if aniso > max_anisotropy:
        raise NotConical(f"cone slopes vary by {aniso:.3g} across directions")
    lam = fourier_lambda_sum(dp)
    dp.lambda_sharp_abs = mean
    dp.lambda_sharp_sum = lam
    dp.cone = {"slopes": sl.tolist(), "anisotropy": aniso}
    return mean, lam, sl


def theta_sharp(dp: DiracPointData, W: FourierPotential, tol: float = 1e-10) -> float:
    rep = validate_W(W)
    if not rep.checks["odd"]["pass"] or not rep.checks["real"]["pass"]:
        raise InvalidArgument("W must be real and odd")
    Wm = potential_matrix(W, dp.indices)
    th = complex(dp.phi1.conj() @ Wm @ dp.phi1)
    if abs(th.imag) > tol * max(1.0, abs(th)):
        raise SymmetryViolation(f"<Phi1, W Phi1> has imaginary part {th.imag:.3g}")
    dp.theta_sharp = th.real
    return th.real


def grad_diag(dp: DiracPointData, direction) -> np.ndarray:
    """Diagonal of direction . grad on K-pseudo-periodic plane waves: i direction.(K + m k)."""
    return 1j * dp.momenta() @ np.asarray(direction, dtype=float)


def phi_pm(dp: DiracPointData, K2) -> tuple[np.ndarray, np.ndarray]:
    """Phi_+- = (e^{i theta} Phi1 +- Phi2)/sqrt2, e^{i theta} = conj(lam) z2 / |lam z2|."""
    lam = dp.lambda_sharp_sum if dp.lambda_sharp_sum is not None else fourier_lambda_sum(dp)
    z2 = complex(K2[0], K2[1])
    ph = lam.conjugate() * z2 / (abs(lam) * abs(z2))
    return (ph * dp.phi1 + dp.phi2) / math.sqrt(2), (ph * dp.phi1 - dp.phi2) / math.sqrt(2)


def free_dirac_slope(lat: TriangularLattice) -> float:
    """Weak-potential limit of the cone slope: |K| = q / sqrt3."""
    return float(np.linalg.norm(lat.K))


def perturbative_check(V: FourierPotential, eps_list, M: int = 6, W: FourierPotential | None = None):
    """Rows (eps, E_star, E_tilde, cone slope[, theta]) and straight-line fits in eps."""
    lat = V.lattice
    K2 = float(lat.K @ lat.K)
    rows = []
    for e in eps_list:
        dp = find_dirac_point(V, M, eps=e)
        sl, lam, _ = lambda_sharp(dp)
        th = theta_sharp(dp, W) if W is not None else float("nan")
        rows.append((float(e), dp.E_star, dp.E_tilde, sl, abs(lam), th))
    arr = np.array(rows)
    e = arr[:, 0]
    fit = lambda y: np.polyfit(e, y, 1)                 # slope, intercept
    c_star = fit((arr[:, 1] - K2) / e)[1]
    c_tilde = fit((arr[:, 2] - K2) / e)[1]
    slope0 = fit(arr[:, 3])[1]
    return {"rows": rows, "coef_E_star": float(c_star), "coef_E_tilde": float(c_tilde),
            "slope_at_0": float(slope0),
            "theta_at_0": float(fit(arr[:, 5])[1]) if W is not None else None}
