"""Dual slices lambda -> E_b(K + lambda K2), the no-fold checker, and the small-eps
3x3 reduced matrix (M_approx, its determinant against pi, the fold crossing)."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .bloch import DiracPointData, assemble_fiber, solve_fiber
from .errors import InvalidArgument, RootNotFound
from .geometry import SQRT3, EdgeFrame, make_lattice
from .potential import FourierPotential, validate_W

TAU = complex(-0.5, SQRT3 / 2)


@dataclass
class SliceCurve:
    edge: EdgeFrame
    b: int
    lambdas: np.ndarray
    energies: np.ndarray


def slice_energies(V: FourierPotential, K2, lambdas, n_bands: int, M: int, threads: int = 1,
                   k0=None) -> np.ndarray:
    """E_b(K + lambda K2) for every lambda, shape (len(lambdas), n_bands)."""
    K = V.lattice.K if k0 is None else np.asarray(k0, dtype=float)
    K2 = np.asarray(K2, dtype=float)
    lam = np.asarray(lambdas, dtype=float)

    def one(l):
        return solve_fiber(assemble_fiber(V, K + l * K2, M, recenter=True), n_bands, vectors=False).energies

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(one, lam))
    else:
        rows = [one(l) for l in lam]
    return np.array(rows)


def dispersion_slice(V: FourierPotential, edge: EdgeFrame, lambdas=None, n_bands: int = 3,
                     M: int = 6, threads: int = 1) -> list[SliceCurve]:
    lam = np.linspace(-0.5, 0.5, 513) if lambdas is None else np.asarray(lambdas, dtype=float)
    if np.any(np.abs(lam) > 0.5 + 1e-12):
        raise InvalidArgument("slice lambdas must lie in [-1/2, 1/2]")
    E = slice_energies(V, edge.frak_K2, lam, n_bands, M, threads)
    return [SliceCurve(edge, b + 1, lam, E[:, b]) for b in range(n_bands)]


def free_slice_zigzag(lam, q: float) -> np.ndarray:
    """mu_j(lambda) + |K|^2 for V = 0 along the zigzag slice, sorted."""
    lam = np.asarray(lam, dtype=float)
    s = np.abs(lam)
    mu = np.stack([q * q * s * (s - 1), q * q * s * s, q * q * s * (s + 1)], axis=-1)
    return mu + q * q / 3.0


# ---------------------------------------------------------------- no-fold

@dataclass
class NoFoldReport:
    passed: bool
    a_param: float
    nu: float
    c1: float
    c2: float
    min_pm: float
    min_other: float
    witness_lambda: float | None
    modulus: str = "a^2"
    c1_window: float = 0.5
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"pass": self.passed, "a_param": self.a_param, "nu": self.nu, "c1": self.c1,
                "c2": self.c2, "min_pm": self.min_pm, "min_other": self.min_other,
                "witness_lambda": self.witness_lambda, "modulus": self.modulus,
                "c1_window": self.c1_window, **self.details}


def _refine_min(fun, lam, vals, lo, hi, k: int = 3):
    """Golden-section (bounded Brent) refinement around the k smallest grid values."""
    best_l, best_v = None, np.inf
    h = lam[1] - lam[0]
    for i in np.argsort(vals)[:k]:
        a, b = max(lo, lam[i] - h), min(hi, lam[i] + h)
        if b <= a:
            l, v = lam[i], vals[i]
        else:
            r = minimize_scalar(fun, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
            l, v = (r.x, r.fun) if r.fun < vals[i] else (lam[i], vals[i])
        if v < best_v:
            best_l, best_v = float(l), float(v)
    return best_l, best_v


def no_fold_check(V: FourierPotential, edge: EdgeFrame, dp: DiracPointData, a_param: float = 0.01,
                  nu: float = 1.0, M: int = 6, n_grid: int = 513, c1_window: float | None = None,
                  zero_tol: float = 1e-6, threads: int = 1) -> NoFoldReport:
    """Certify the no-fold inequalities numerically with modulus omega(a) = a^2.

    min_pm    = min over a^nu <= |lambda| <= 1/2 of |E_pm - E_star|
    min_other = min over b not in {b*, b*+1}, |lambda| <= 1/2 of |E_b - E_star| / (1 + b)
    c1        = min over a^nu <= |lambda| <= c1_window of |E_pm - E_star| / lambda^2
    The check fails (with a witness lambda) when min_pm or min_other drops below
    zero_tol, or when c1 <= 0.
    """
    if not (0 < a_param < 1) or not (0 < nu <= 1):
        raise InvalidArgument("need 0 < a < 1 and 0 < nu <= 1")
    K2 = edge.frak_K2
    b = dp.b_star
    n_bands = b + 2
    lam = np.linspace(-0.5, 0.5, n_grid)
    E = slice_energies(V, K2, lam, n_bands, M, threads)
    Es = dp.E_star
    lo = a_param ** nu
    c1_window = 0.5 if c1_window is None else c1_window
    out = np.abs(lam) >= lo

    def dist_pm(l):
        e = solve_fiber(assemble_fiber(V, dp.K + l * K2, M, recenter=True), n_bands, vectors=False).energies
        return float(min(abs(e[b - 1] - Es), abs(e[b] - Es)))

    dpm = np.minimum(np.abs(E[:, b - 1] - Es), np.abs(E[:, b] - Es))
    # refine every interval that can hide a zero: with a local Lipschitz bound L a
    # zero inside [l_i, l_i+1] needs dpm_i + dpm_i+1 <= L h; the grid minimum is kept too
    h = lam[1] - lam[0]
    slope = np.abs(np.diff(dpm)) / h
    Lloc = np.maximum.reduce([slope, np.r_[slope[:1], slope[:-1]], np.r_[slope[1:], slope[-1:]]])
    found = []
    cand = [i for i in range(len(lam) - 1)
            if out[i] and out[i + 1] and dpm[i] + dpm[i + 1] <= 1.5 * Lloc[i] * h]
    io = np.flatnonzero(out)
    cand.append(int(io[np.argmin(dpm[io])]) - (1 if np.argmin(dpm[io]) == len(io) - 1 else 0))
    for i in sorted(set(cand)):
        a, bnd = lam[i], lam[i + 1]
        if not (out[i] and out[i + 1]):
            continue
        r = minimize_scalar(dist_pm, bounds=(a, bnd), method="bounded", options={"xatol": 1e-13})
        l, v = min((float(r.fun), float(r.x)), (float(dpm[i]), float(lam[i])), (float(dpm[i + 1]), float(lam[i + 1])))[::-1]
        if not any(abs(l - l2) < 1e-9 for _, l2 in found):
            found.append((v, l))
    found.sort()
    min_pm = found[0][0] if found else float(np.min(dpm[out]))
    wit = found[0][1] if found else None
    witnesses = sorted(l for v, l in found if v <= zero_tol)
    others = [j for j in range(n_bands) if j not in (b - 1, b)]
    min_other = float(min(np.min(np.abs(E[:, j] - Es)) / (1 + j + 1) for j in others)) if others else np.inf
    win = out & (np.abs(lam) <= c1_window)
    c1 = float(np.min(dpm[win] / lam[win] ** 2)) if win.any() else float("nan")
    passed = bool(min_pm > zero_tol and min_other > zero_tol and c1 > 0)
    return NoFoldReport(passed=passed, a_param=a_param, nu=nu, c1=c1, c2=min_other,
                        min_pm=float(min_pm), min_other=min_other,
                        witness_lambda=None if passed else wit, c1_window=c1_window,
                        details={"E_star": Es, "b_star": b, "n_grid": n_grid, "M": M,
                                 "witnesses": witnesses})


# ---------------------------------------------------------------- 3x3 reduction

def alpha_J(q: float) -> complex:
    return q * q / SQRT3 * 1j * TAU


def J_matrix(q: float) -> np.ndarray:
    a = alpha_J(q)
    ac = a.conjugate()
    return np.array([[0, a, ac], [ac, 0, a], [a, ac, 0]], dtype=complex)


def _w(W: FourierPotential):
    vals = {}
    for key in ((0, 1), (1, 0), (1, 1)):
        w = -1j * W[key] / SQRT3
        if abs(w.imag) > 1e-12:
            raise InvalidArgument(f"w_{key} = {w} is not real: W must be real and odd")
        vals[key] = w.real
    return vals


@dataclass
class ReducedMatrix:
    eps: float
    delta: float
    lam: float
    M0approx: np.ndarray
    MV: np.ndarray
    MW: np.ndarray
    J: np.ndarray
    q: float

    @property
    def total(self) -> np.ndarray:
        return self.M0approx + self.MV + self.MW

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.total).real)


def m_approx(eps: float, delta: float, lam: float, V: FourierPotential, W: FourierPotential) -> ReducedMatrix:
    """M0approx + eps calV + delta calW in the free K-triplet basis (sigma = 1, tau, taubar)."""
    q = V.lattice.q
    V00, V11 = V[(0, 0)].real, V[(1, 1)].real
    w = _w(W)
    t, tb = TAU, TAU.conjugate()
    J = J_matrix(q)
    M0 = (-eps * (V00 - V11) + lam * lam * q * q) * np.eye(3) + lam * J
    MV = eps * np.diag([V00 + 2 * V11, V00 - V11, V00 - V11]).astype(complex)
    calW = (w[(0, 1)] * np.array([[0, t, -tb], [tb, -1, 0], [-t, 0, 1]])
            + w[(1, 0)] * np.array([[0, tb, -t], [t, -1, 0], [-tb, 0, 1]])
            + w[(1, 1)] * np.array([[0, -1, 1], [-1, 1, 0], [1, 0, -1]]))
    return ReducedMatrix(eps, delta, lam, M0, MV, delta * calW, J, q)


def pi_poly(eps: float, delta: float, lam: float, V: FourierPotential, W: FourierPotential) -> float:
    q = V.lattice.q
    V11 = V[(1, 1)].real
    prox = abs(W[(0, 1)] + W[(1, 0)] - W[(1, 1)]) ** 2
    return (q * q * lam * lam + eps * V11) * (q ** 4 * lam * lam + delta * delta * prox)


def regime_constants(V: FourierPotential, eps: float):
    """zeta0, theta0 (scaled by sqrt|eps|), C_flat = 4 theta0, c_flat = 1."""
    q = V.lattice.q
    V11 = abs(V[(1, 1)].real)
    z0 = math.sqrt(V11 / (2 * q * q))
    t0 = math.sqrt(2 * V11 / (q * q))
    return {"zeta0": z0, "theta0": t0, "C_flat": 4 * t0, "c_flat": 1.0,
            "lam_lo": z0 * math.sqrt(abs(eps)), "lam_hi": t0 * math.sqrt(abs(eps))}


def det_vs_pi(eps: float, delta: float, lam: float, V: FourierPotential, W: FourierPotential):
    """(det M_approx, pi, |det + pi| / ((lam^2 + |eps|)(lam^2 + delta^2)))."""
    rc = regime_constants(V, eps)
    if abs(lam) > rc["C_flat"] * math.sqrt(abs(eps)) + 1e-15 or abs(delta) > rc["c_flat"] * eps * eps + 1e-15:
        warnings.warn("det_vs_pi: (lambda, delta) outside the small-eps regime", RuntimeWarning, stacklevel=2)
    d = m_approx(eps, delta, lam, V, W).det
    p = pi_poly(eps, delta, lam, V, W)
    den = (lam * lam + abs(eps)) * (lam * lam + delta * delta)
    if den == 0:
        # lam = delta = 0: both determinants vanish there, the ratio is 0 if they agree
        return d, p, 0.0 if abs(d + p) <= 1e-14 * max(1.0, abs(d), abs(p)) else math.inf
    return d, p, abs(d + p) / den


def find_fold_crossing(eps: float, delta: float, V: FourierPotential, W: FourierPotential,
                       tol: float = 1e-10) -> float:
    """Root of det M_approx(eps, delta, ., 0) in (zeta0 sqrt|eps|, theta0 sqrt|eps|)."""
    if eps * V[(1, 1)].real >= 0:
        raise InvalidArgument("fold crossing needs eps V11 < 0")
    rc = regime_constants(V, eps)
    f = lambda l: m_approx(eps, delta, l, V, W).det
    a, b = rc["lam_lo"], rc["lam_hi"]
    fa, fb = f(a), f(b)
    if fa * fb > 0:
        raise RootNotFound(f"det M_approx has no sign change on ({a:.6g}, {b:.6g})")
    return float(brentq(f, a, b, xtol=tol, rtol=1e-15))


def slice_crossing(V: FourierPotential, dp: DiracPointData, K2, lo: float, hi: float, M: int = 6,
                   n: int = 201) -> float:
    """lambda in (lo, hi) where a slice band other than the Dirac pair at K meets E_star:
    minimum of min_b |E_b(K + lambda K2) - E_star| refined by golden section."""
    K2 = np.asarray(K2, dtype=float)
    nb = dp.b_star + 2

    def g(l):
        e = solve_fiber(assemble_fiber(V, dp.K + l * K2, M, recenter=True), nb, vectors=False).energies
        return float(np.min(np.abs(e - dp.E_star)))

    lam = np.linspace(lo, hi, n)
    vals = np.array([g(l) for l in lam])
    l, v = _refine_min(g, lam, vals, lo, hi, k=1)
    return l
