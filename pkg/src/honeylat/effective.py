"""One-dimensional effective models on the slow variable zeta.

* D = -i vF sigma3 d/dzeta + theta kappa(zeta) sigma1, its zero mode, spectrum and
  the inhomogeneous solve used for the second-order energy correction E2;
* the effective-mass Schroedinger operator -(1/2 m) d^2 + a kappa' + b (kinf^2 - kappa^2)
  that seeds the band-edge (unprotected) bifurcation, and the homotopy
  (1 - theta) kappa + theta kappa_natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bloch import (DiracPointData, assemble_fiber, grad_diag, lambda_sharp, phi_pm,
                    potential_matrix, solve_fiber, theta_sharp)
from .errors import DegenerateCoupling, FlatBand, InvalidArgument, NumericFailure, ProjectionError
from .potential import DomainWall, FourierPotential, blend_walls

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def cumulative_integral(fun, z: np.ndarray) -> np.ndarray:
    """int_0^z fun for every grid point, by Gauss-Legendre panels between neighbours."""
    z = np.asarray(z, dtype=float)
    order = np.argsort(z)
    zs = z[order]
    i0 = int(np.searchsorted(zs, 0.0))
    nodes = np.concatenate([zs[:i0], [0.0], zs[i0:]])
    a, b = nodes[:-1], nodes[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    seg = (fun(pts) * _GL_W[None, :]).sum(axis=1) * half
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    cum -= cum[i0]                               # node i0 is zeta = 0
    vals = np.delete(cum, i0)
    out = np.empty_like(z)
    out[order] = vals
    return out


# ---------------------------------------------------------------- Dirac operator

@dataclass
class DiracOperator1D:
    vF: float
    theta: float
    wall: DomainWall
    L: float = 40.0
    n: int = 512
    discretization: str = "fourier-spectral"

    def __post_init__(self):
        if self.vF <= 0:
            raise InvalidArgument("vF must be positive")
        if self.discretization not in ("fourier-spectral", "central-difference"):
            raise InvalidArgument(f"unknown discretization {self.discretization!r}")
        if self.discretization == "fourier-spectral" and self.n % 2 == 0:
            self.n += 1                          # odd n: no unpaired Nyquist mode, no spectral doubler

    @property
    def beta(self) -> float:
        return abs(self.theta) * self.wall.kappa_inf / self.vF

    @property
    def grid(self) -> np.ndarray:
        return -self.L + 2 * self.L * np.arange(self.n) / self.n

    @property
    def h(self) -> float:
        return 2 * self.L / self.n

    def kappa_periodic(self, z=None) -> np.ndarray:
        """kappa on [-L, L) closed smoothly by an anti-wall sitting at +-L."""
        z = self.grid if z is None else np.asarray(z, dtype=float)
        k = self.wall.profile(z)
        ki, w = self.wall.kappa_inf, self.wall.width
        right = z >= 0
        out = np.where(right,
                       k - ki - ki * np.tanh((z - self.L) / w),
                       k + ki - ki * np.tanh((z + self.L) / w))
        return out

    def derivative_matrix(self) -> np.ndarray:
        n, h = self.n, self.h
        if self.discretization == "fourier-spectral":
            xi = 2 * np.pi * np.fft.fftfreq(n, d=h)
            F = np.fft.fft(np.eye(n), axis=0)
            return np.fft.ifft(1j * xi[:, None] * F, axis=0)
        D = np.zeros((n, n))
        i = np.arange(n)
        D[i, (i + 1) % n] = 0.5 / h
        D[i, (i - 1) % n] = -0.5 / h
        return D

    def matrix(self) -> np.ndarray:
        n = self.n
        P = -1j * self.derivative_matrix()       # Hermitian momentum
        P = (P + P.conj().T) / 2
        K = np.diag(self.kappa_periodic())
        H = np.zeros((2 * n, 2 * n), dtype=complex)
        H[:n, :n] = self.vF * P
        H[n:, n:] = -self.vF * P
        H[:n, n:] = self.theta * K
        H[n:, :n] = self.theta * K
        return H

    def sparse_matrix(self):
        """Central-difference operator as a sparse matrix."""
        if self.discretization != "central-difference":
            raise InvalidArgument("sparse form only for central differences")
        n, h = self.n, self.h
        i = np.arange(n)
        D = sp.csr_matrix((np.r_[np.full(n, 0.5 / h), np.full(n, -0.5 / h)],
                           (np.r_[i, i], np.r_[(i + 1) % n, (i - 1) % n])), shape=(n, n))
        P = -1j * D
        K = sp.diags(self.kappa_periodic())
        return sp.bmat([[self.vF * P, self.theta * K], [self.theta * K, -self.vF * P]], format="csc")


@dataclass
class ZeroMode:
    zeta: np.ndarray
    alpha: np.ndarray          # shape (2, n)
    beta: float
    spinor: np.ndarray

    @property
    def plus(self):
        return self.alpha[0]

    @property
    def minus(self):
        return self.alpha[1]


def _orientation(wall: DomainWall) -> float:
    lo, hi = wall.asymptotes()
    if lo * hi >= 0 or abs(hi) < 1e-12:
        raise InvalidArgument("kappa has no sign change between -inf and +inf: zero mode not normalisable")
    return math.copysign(1.0, hi)


def zero_mode_exact(D: DiracOperator1D, zeta=None) -> ZeroMode:
    """gamma (1, -i sgn(theta kappa(+inf))) exp(-(|theta| / vF) sgn kappa(+inf) int_0^zeta kappa).

    gamma is real and positive; normalised in L^2 on the supplied grid (default: the
    operator grid, discrete sum times spacing).
    """
    if D.theta == 0:
        raise DegenerateCoupling("theta_sharp = 0: no zero mode")
    s_k = _orientation(D.wall)
    z = D.grid if zeta is None else np.asarray(zeta, dtype=float)
    rate = s_k * abs(D.theta) / D.vF
    f = np.exp(-rate * cumulative_integral(D.wall.profile, z))
    spinor = np.array([1.0, -1j * s_k * math.copysign(1.0, D.theta)])
    h = (z[1] - z[0]) if len(z) > 1 else 1.0
    alpha = spinor[:, None] * f[None, :]
    alpha /= math.sqrt(np.sum(np.abs(alpha) ** 2) * h)
    return ZeroMode(zeta=z, alpha=alpha, beta=abs(D.theta) * D.wall.kappa_inf / D.vF, spinor=spinor)


@dataclass
class DiracSpectrum:
    energies: np.ndarray
    vectors: np.ndarray        # columns, shape (2n, k)
    zero_index: int
    doubling_flags: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))

    @property
    def E0(self) -> float:
        return float(self.energies[self.zero_index])


def _doubler_fraction(vecs: np.ndarray, n: int) -> np.ndarray:
    """Share of each vector's spectral weight in the upper half of the frequency band."""
    out = []
    for v in vecs.T:
        w = np.abs(np.fft.fft(v[:n])) ** 2 + np.abs(np.fft.fft(v[n:])) ** 2
        f = np.abs(np.fft.fftfreq(n))
        out.append(w[f > 0.25].sum() / max(w.sum(), 1e-300))
    return np.array(out)


def dirac_spectrum(D: DiracOperator1D, n_eigs: int = 8) -> DiracSpectrum:
    """Eigenpairs nearest zero.  The wall mode is singled out within the near-zero
    space by its chirality (sigma2 eigenvalue), which separates it from the mode of
    the closing anti-wall."""
    n = D.n
    if D.discretization == "fourier-spectral":
        # the spectrum is symmetric about zero: the middle window holds the wanted pairs
        H = D.matrix()
        m = min(2 * n_eigs + 4, 2 * n)
        lo = max(0, n - m // 2)
        E, U = sla.eigh(H, subset_by_index=[lo, min(2 * n - 1, lo + m - 1)], driver="evr")
    else:
        # block shift-invert iteration + Rayleigh-Ritz; ARPACK mangles the exactly
        # degenerate checkerboard zero modes of the central-difference operator
        A = D.sparse_matrix()
        lu = spla.splu((A - 1e-7 * sp.identity(2 * n, format="csc")).tocsc())
        X = np.random.default_rng(0).standard_normal((2 * n, 2 * n_eigs + 8)).astype(complex)
        for it in range(60):
            X, _r = np.linalg.qr(lu.solve(X))
            if it % 5 == 4:
                E, Z = np.linalg.eigh(X.conj().T @ (A @ X))
                X = X @ Z
                order = np.argsort(np.abs(E))[:n_eigs]
                R = A @ X[:, order] - X[:, order] * E[order]
                if np.max(np.linalg.norm(R, axis=0)) < 1e-9 * max(1.0, float(np.max(np.abs(E[order])))):
                    break
        U = X
    order = np.argsort(np.abs(E))[:n_eigs]
    E, U = E[order], U[:, order]
    # near-zero space: everything within a small window of the smallest |E|
    scale = D.vF * math.pi / D.L
    near = np.abs(E) < max(1e-6, 1e-3 * scale)
    if near.sum() < 1:
        raise NumericFailure("no near-zero eigenvalue")
    s_k = _orientation(D.wall)
    chi_target = -s_k * math.copysign(1.0, D.theta)     # sigma2 eigenvalue of (1, -i s)
    B = U[:, near]
    # wall mode = top eigenvector of B^+ P_chi P_low B (the two projectors commute)
    S2 = np.kron(SIGMA2, np.eye(n))
    ch = (B + chi_target * (S2 @ B)) / 2
    f = np.abs(np.fft.fftfreq(n))
    low = lambda X: np.vstack([np.fft.ifft(np.where(f[:, None] <= 0.25, np.fft.fft(X[:n], axis=0), 0), axis=0),
                               np.fft.ifft(np.where(f[:, None] <= 0.25, np.fft.fft(X[n:], axis=0), 0), axis=0)])
    c = B.conj().T @ low(ch)
    w, Z = np.linalg.eigh((c + c.conj().T) / 2)
    v = B @ Z[:, -1]
    v /= np.linalg.norm(v)
    Ev = float(np.real(v.conj() @ _apply(D, v)))
    i0 = int(np.flatnonzero(near)[0])
    U = U.copy()
    E = E.copy()
    U[:, i0] = v
    E[i0] = Ev
    flags = _doubler_fraction(U, n) > 0.5
    return DiracSpectrum(energies=E, vectors=U, zero_index=i0, doubling_flags=flags)


def _apply(D: DiracOperator1D, v):
    if D.discretization == "fourier-spectral":
        return D.matrix() @ v
    return D.sparse_matrix() @ v


def mode_error(D: DiracOperator1D, spec: DiracSpectrum) -> float:
    """L^2 distance between the computed wall mode and the closed form (phase aligned)."""
    n, h = D.n, D.h
    v = spec.vectors[:, spec.zero_index]
    num = np.vstack([v[:n], v[n:]])
    num = num / math.sqrt(np.sum(np.abs(num) ** 2) * h)
    ex = zero_mode_exact(D).alpha
    ph = np.vdot(num.ravel(), ex.ravel())
    num = num * (ph / abs(ph))
    return float(math.sqrt(np.sum(np.abs(num - ex) ** 2) * h))


def bulk_gap(D: DiracOperator1D) -> float:
    return abs(D.theta) * D.wall.kappa_inf


# ---------------------------------------------------------------- inhomogeneous solve

def solve_inhomogeneous_dirac(D: DiracOperator1D, G: np.ndarray, tol: float = 1e-8):
    """Solve D a = G + E a_star with E = -<a_star, G>; a orthogonal to a_star.

    G has shape (2, n) on the operator grid.  Returns (E, a).
    """
    n, h = D.n, D.h
    H = D.matrix() if D.discretization == "fourier-spectral" else D.sparse_matrix().toarray()
    zm = zero_mode_exact(D).alpha.reshape(-1)
    g = np.asarray(G, dtype=complex).reshape(-1)
    E = -np.vdot(zm, g) * h
    rhs = g + E * zm
    # minimal-norm least squares on the orthogonal complement of the zero mode
    a, *_ = np.linalg.lstsq(H, rhs, rcond=1e-10)
    a = a - np.vdot(zm, a) * h * zm
    res = np.linalg.norm(H @ a - rhs) * math.sqrt(h)
    if res > tol * max(1.0, np.linalg.norm(rhs) * math.sqrt(h)):
        raise NumericFailure(f"inhomogeneous Dirac residual {res:.3g}")
    return complex(E), a.reshape(2, n)


# ---------------------------------------------------------------- E2

@dataclass
class E2Result:
    E2: complex
    vF: float
    theta: float
    lambda_abs: float
    kernel_leak: float
    terms: dict

    @property
    def value(self) -> float:
        return float(self.E2.real)


def e2_coefficient(dp: DiracPointData, W: FourierPotential, wall: DomainWall, K2,
                   L: float | None = None, n: int = 20001, tol: float = 1e-8) -> E2Result:
    """Second-order energy coefficient E2 of the edge-state branch E = E_star + E2 delta^2.

    The x-side algebra uses the plane-wave basis of dp; the zeta-side uses the exact
    zero mode and analytic derivatives of kappa on a fine grid.
    """
    K2 = np.asarray(K2, dtype=float)
    if dp.lambda_sharp_sum is None:
        lambda_sharp(dp)
    lam = abs(dp.lambda_sharp_sum)
    th = theta_sharp(dp, W)
    vF = lam * float(np.linalg.norm(K2))
    Pp, Pm = phi_pm(dp, K2)
    Dg = grad_diag(dp, K2)                           # K2 . grad
    Wm = potential_matrix(W, dp.indices)
    H = assemble_fiber(dp.V, dp.K, dp.M, indices=dp.indices).H
    E0 = dp.E_star
    ker = np.column_stack([dp.phi1, dp.phi2])
    Pk = ker @ ker.conj().T
    A = H - E0 * np.eye(len(H)) + Pk                 # invertible, acts as H - E0 off the kernel
    lu = sla.lu_factor(A)

    def R(v):
        v = v - Pk @ v
        x = sla.lu_solve(lu, v)
        return x - Pk @ x

    vecs = {"A+": Dg * Pp, "A-": Dg * Pm, "B+": Wm @ Pp, "B-": Wm @ Pm}
    r = {k: R(v) for k, v in vecs.items()}
    phis = {"+": Pp, "-": Pm}
    d = {(j, X): np.vdot(phis[j], Dg * r[X]) for j in phis for X in r}
    w = {(j, X): np.vdot(phis[j], Wm @ r[X]) for j in phis for X in r}

    beta_rate = abs(th) / vF
    Dop = DiracOperator1D(vF=vF, theta=th, wall=wall)
    s_k = _orientation(wall)
    if L is None:
        L = 40.0 / max(beta_rate * wall.kappa_inf, 1e-12) + 10 * wall.width
    z = np.linspace(-L, L, n)
    hz = z[1] - z[0]
    zm = zero_mode_exact(Dop, z)
    spin = zm.spinor
    f = zm.alpha[0] / spin[0]                        # real profile, alpha = spinor * f
    kap = wall.profile(z)
    kp = wall.derivative(z)
    rate = s_k * beta_rate
    f1 = -rate * kap * f
    f2 = (rate * rate * kap * kap - rate * kp) * f
    kf1 = (kp - rate * kap * kap) * f                # (kappa f)'
    # alpha_j^(k) = spin_j f^(k)
    a = {"+": spin[0], "-": spin[1]}
    # check the solvability of the first-order problem: <Phi_j, G1> = 0 pointwise
    leak = 0.0
    for j in phis:
        c_d = 2 * (a["+"] * np.vdot(phis[j], vecs["A+"]) + a["-"] * np.vdot(phis[j], vecs["A-"]))
        c_w = -(a["+"] * np.vdot(phis[j], vecs["B+"]) + a["-"] * np.vdot(phis[j], vecs["B-"]))
        leak = max(leak, float(np.max(np.abs(c_d * f1 + c_w * kap * f))))
    if leak > tol * max(1.0, vF) * float(np.max(np.abs(f))) * 10:
        raise ProjectionError(f"first-order forcing has a kernel component {leak:.3g}")

    G = {}
    for j in phis:
        Gj = (2 * (2 * a["+"] * d[(j, "A+")] * f2 + 2 * a["-"] * d[(j, "A-")] * f2
                   - a["+"] * d[(j, "B+")] * kf1 - a["-"] * d[(j, "B-")] * kf1)
              - kap * (2 * a["+"] * w[(j, "A+")] * f1 + 2 * a["-"] * w[(j, "A-")] * f1
                       - a["+"] * w[(j, "B+")] * kap * f - a["-"] * w[(j, "B-")] * kap * f)
              + float(K2 @ K2) * a[j] * f2)
        G[j] = Gj
    E2 = -(np.sum(np.conj(a["+"] * f) * G["+"]) + np.sum(np.conj(a["-"] * f) * G["-"])) * hz
    return E2Result(E2=complex(E2), vF=vF, theta=th, lambda_abs=lam, kernel_leak=leak,
                    terms={"d": {f"{k[0]}{k[1]}": complex(v) for k, v in d.items()},
                           "w": {f"{k[0]}{k[1]}": complex(v) for k, v in w.items()}})


# ---------------------------------------------------------------- effective Schroedinger

@dataclass
class EffectiveSchrodinger:
    m_eff: float
    a_coef: float
    b_coef: float
    wall: DomainWall

    def Q(self, z):
        k = self.wall.profile(z)
        return self.a_coef * self.wall.derivative(z) + self.b_coef * (self.wall.kappa_inf ** 2 - k * k)


def effective_mass(V: FourierPotential, K2, M: int = 8, band: int = 1, h: float = 1e-3,
                   k0=None) -> float:
    """1/m_eff = d^2/dlambda^2 E_band(K + lambda K2) at lambda = 0 (centred differences)."""
    K = V.lattice.K if k0 is None else np.asarray(k0, dtype=float)
    K2 = np.asarray(K2, dtype=float)
    E = [solve_fiber(assemble_fiber(V, K + s * h * K2, M), band, vectors=False).energies[band - 1]
         for s in (-2, -1, 0, 1, 2)]
    d2 = (-E[0] + 16 * E[1] - 30 * E[2] + 16 * E[3] - E[4]) / (12 * h * h)
    if abs(d2) < 1e-10:
        raise FlatBand("band curvature vanishes along K2")
    return float(1.0 / d2)


def effective_schrodinger(m_eff: float, wall: DomainWall, a_coef: float = 1.0,
                          b_coef: float = 1.0) -> EffectiveSchrodinger:
    if m_eff == 0 or not math.isfinite(m_eff):
        raise FlatBand("m_eff must be finite and non-zero")
    if b_coef <= 0:
        raise InvalidArgument("b_coef must be positive")
    return EffectiveSchrodinger(m_eff, a_coef, b_coef, wall)


def bound_states(Heff: EffectiveSchrodinger, L: float = 400.0, n: int = 16000,
                 margin: float = 1e-4, core: float = 0.5):
    """Eigenvalues on the gap side of the band edge (E > margin for m < 0, E < -margin
    for m > 0) whose eigenvectors keep 90% of their mass in |zeta| < core * L.
    Dirichlet ends, second-order differences.  States whose decay length exceeds
    about core * L / 2.3 are not resolved and count as absent."""
    z = np.linspace(-L, L, n + 2)[1:-1]
    h = z[1] - z[0]
    c = -1.0 / (2 * Heff.m_eff)                   # coefficient of d^2
    diag = -2 * c / h ** 2 + Heff.Q(z)
    off = np.full(n - 1, c / h ** 2)
    side = -math.copysign(1.0, Heff.m_eff)        # +1: bound states above the edge
    # flip so that the gap side is always the low end of the spectrum
    E, U = sla.eigh_tridiagonal(-side * diag, -side * off, select="v",
                                select_range=(-np.inf, -margin))
    E = -side * E
    out = []
    inner = np.abs(z) < core * L
    for e, u in zip(E, U.T):
        if np.sum(u[inner] ** 2) > 0.9:
            out.append(float(e))
    return sorted(out, key=lambda e: -side * e)


def natural_amplitude(Heff_base: EffectiveSchrodinger, kappa_inf: float = 1.0, width: float = 1.0,
                      support: float = 3.0, amplitudes=None, **bs_kw):
    """Smallest |A| (A < 0) for which the kappa_natural wall has no bound state."""
    from .potential import make_wall_flat
    amps = -np.linspace(0.25, 8.0, 32) if amplitudes is None else amplitudes
    for A in amps:
        w = make_wall_flat(A, kappa_inf, width, support)
        H = EffectiveSchrodinger(Heff_base.m_eff, Heff_base.a_coef, Heff_base.b_coef, w)
        if not bound_states(H, **bs_kw):
            return float(A), w
    raise NumericFailure("no kappa_natural amplitude in the scanned range removes the bound state")


@dataclass
class HomotopyTrace:
    thetas: np.ndarray
    dirac_E0: np.ndarray
    schrodinger: list
    theta_star: float | None


def protection_homotopy(wall: DomainWall, wall_nat: DomainWall, thetas, m_eff: float,
                        vF: float = 1.0, theta_sharp_val: float = 1.0, a_coef: float = 1.0,
                        b_coef: float = 1.0, dirac_L: float = 40.0, dirac_n: int = 512,
                        **bs_kw) -> HomotopyTrace:
    E0s, bs = [], []
    for t in thetas:
        w = blend_walls(wall, wall_nat, t)
        D = DiracOperator1D(vF=vF, theta=theta_sharp_val, wall=w, L=dirac_L, n=dirac_n)
        E0s.append(dirac_spectrum(D, 4).E0)
        bs.append(bound_states(EffectiveSchrodinger(m_eff, a_coef, b_coef, w), **bs_kw))
    theta_star = None
    for t, b in zip(thetas, bs):
        if not b:
            theta_star = float(t)
            break
    return HomotopyTrace(np.asarray(thetas, dtype=float), np.array(E0s), bs, theta_star)
