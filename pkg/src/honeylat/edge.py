"""Cylinder edge problem  -Lap + eps V + delta kappa(delta K2.x) W  on a transverse supercell.

Coordinates: s = K1.x, t = K2.x.  A state with quasi-momentum k_par along v1 is
written  Psi = sum_m1 exp(i theta_m1 s) exp(i c2 t) g_m1(t),  theta_m1 = k_par/2pi + m1,
with g periodic over N cells (t in [0, 2 pi N)).  c2 is a transverse Bloch offset
that puts the Dirac point on the grid.

Two discretisations of g share everything else:
  planewave  g_m1(t) = sum_j c_{m1 j} exp(i j t / N),  dense, shift-invert by LU
  fd         g_m1 sampled on points_per_cell points per cell, central differences
             of order fd_order, sparse banded, shift-invert by splu
The double wall kappa(N delta sin(t/N)) has the wall at t = 0 and the
reversed wall at t = pi N.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bloch import DiracPointData, assemble_fiber, phi_pm, lambda_sharp, theta_sharp
from .effective import DiracOperator1D, zero_mode_exact
from .errors import ConfigError, InvalidArgument, NumericFailure
from .geometry import EdgeFrame
from .potential import DomainWall, FourierPotential, make_wall

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------- configuration

@dataclass
class SupercellConfig:
    edge: EdgeFrame
    N: int = 64
    M1: int = 6
    M2: int = 4
    k_par: float | None = None          # None: the K value of the edge
    eps: float = 1.0
    delta: float = 0.1
    wall: DomainWall | None = None      # None: tanh, kappa_inf = width = 1
    wall_periodization: str = "double-wall"
    offset: float | None = None         # c2; None aligns with the nearest Dirac point
    method: str = "planewave"
    points_per_cell: int = 16
    fd_order: int = 12
    check_separation: bool = True

    def __post_init__(self):
        if self.wall is None:
            self.wall = make_wall("tanh")
        if self.k_par is None:
            self.k_par = self.edge.kpar_at_K
        if self.N < 1 or self.M1 < 0 or self.M2 < 1:
            raise InvalidArgument(f"bad supercell sizes N={self.N} M1={self.M1} M2={self.M2}")
        if self.wall_periodization != "double-wall":
            raise InvalidArgument(f"unknown wall periodization {self.wall_periodization!r}")
        if self.method not in ("planewave", "fd"):
            raise InvalidArgument(f"unknown method {self.method!r}")
        if self.method == "fd" and (self.fd_order % 2 or self.fd_order < 2
                                    or self.points_per_cell < self.fd_order // 2 + 1):
            raise InvalidArgument("fd_order must be even and below the points per cell")

    def dirac_frame(self):
        """Frame coordinates (a, b) of the Dirac point (K or -K) nearest k_par, and a tie flag."""
        e = self.edge
        lat = e.lattice
        K = lat.K
        aK = float(K @ e.frak_v1) / TWO_PI
        bK = float(K @ e.frak_v2) / TWO_PI
        x = self.k_par / TWO_PI

        def cd(u):
            u = (u - x) % 1.0
            return min(u, 1.0 - u)

        dK, dKp = cd(aK), cd(-aK)
        if abs(dK - dKp) < 1e-12:
            return aK, bK, True
        return (aK, bK, False) if dK < dKp else (-aK, -bK, False)

    def layout(self):
        """(channels m1, c2, j0): theta = k_par/2pi + m1, omega = c2 + j/N."""
        a, b, tie = self.dirac_frame()
        x = self.k_par / TWO_PI
        if self.offset is not None:
            c2 = float(self.offset)
        elif tie:
            c2 = 0.0
        else:
            c2 = (b * self.N - round(b * self.N)) / self.N
        m1c = int(round(a - x)) if not tie else 0
        j0 = int(round((b - c2) * self.N)) if not tie else 0
        ms = m1c + np.arange(-self.M1, self.M1 + 1)
        return ms, c2, j0


def _kappa_N(cfg: SupercellConfig, t):
    return cfg.wall.profile(cfg.N * cfg.delta * np.sin(np.asarray(t, dtype=float) / cfg.N))


def wall_fourier(cfg: SupercellConfig, rel: float = 1e-10):
    """Coefficients c_p of kappa_N(t) = sum_p c_p exp(i p t/N), and the content p_max."""
    n = 256
    while True:
        s = TWO_PI * np.arange(n) / n
        c = np.fft.fft(cfg.wall.profile(cfg.N * cfg.delta * np.sin(s))) / n
        top = np.abs(c[n // 2 - n // 8: n // 2 + n // 8]).max()
        if top < 1e-15 * cfg.wall.kappa_inf or n >= 1 << 20:
            break
        n *= 2
    p = np.fft.fftfreq(n, 1.0 / n).astype(int)
    big = np.abs(c) > rel * cfg.wall.kappa_inf
    pmax = int(np.abs(p[big]).max()) if big.any() else 0
    keep = np.abs(c) > 1e-16 * cfg.wall.kappa_inf
    return p[keep], c[keep], pmax


def _check_config(cfg: SupercellConfig):
    if cfg.delta != 0 and cfg.check_separation:
        if TWO_PI * cfg.N * abs(cfg.delta) < 20.0 * cfg.wall.width:
            raise ConfigError(f"walls too close: 2 pi N delta = {TWO_PI * cfg.N * abs(cfg.delta):.4g}"
                              f" < 20 x width {cfg.wall.width}; raise N or delta")


# ---------------------------------------------------------------- operator

@dataclass
class EdgeOperator:
    cfg: SupercellConfig
    H: object                       # dense ndarray (planewave) or csr (fd)
    channels: np.ndarray
    c2: float
    j: np.ndarray | None = None     # planewave transverse indices
    t: np.ndarray | None = None     # fd grid
    info: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def dense(self) -> bool:
        return isinstance(self.H, np.ndarray)

    def hermiticity(self) -> float:
        if self.dense:
            return float(np.abs(self.H - self.H.conj().T).max())
        d = self.H - self.H.conj().T
        return float(np.abs(d.data).max()) if d.nnz else 0.0


def _kinetic_coeffs(cfg: SupercellConfig, ms, c2):
    e = cfg.edge
    th = cfg.k_par / TWO_PI + ms
    K11 = float(e.frak_K1 @ e.frak_K1)
    K12 = float(e.frak_K1 @ e.frak_K2)
    K22 = float(e.frak_K2 @ e.frak_K2)
    return th, K11, K12, K22


def _terms(V: FourierPotential, W: FourierPotential | None, edge: EdgeFrame):
    """Potential terms in frame coordinates: list of (n1, n2, v, w)."""
    out = {}
    for P, slot in ((V, 0), (W, 1)):
        if P is None:
            continue
        for m, val in P.items():
            n = edge.to_frame(m)
            out.setdefault(n, [0j, 0j])[slot] += val
    return [(n[0], n[1], vw[0], vw[1]) for n, vw in sorted(out.items())]


def assemble_edge(V: FourierPotential, W: FourierPotential | None, cfg: SupercellConfig) -> EdgeOperator:
    """H = -Lap + eps V + delta kappa_N W on the supercell of cfg (V and W unscaled)."""
    _check_config(cfg)
    if cfg.method == "fd":
        return _assemble_fd(V, W, cfg)
    return _assemble_pw(V, W, cfg)


def _assemble_pw(V, W, cfg):
    ms, c2, j0 = cfg.layout()
    N = cfg.N
    js = j0 + np.arange(-N * cfg.M2, N * cfg.M2 + 1)
    n1, nj = len(ms), len(js)
    th, K11, K12, K22 = _kinetic_coeffs(cfg, ms, c2)
    om = c2 + js / N
    kin = (th[:, None] ** 2 * K11 + 2 * th[:, None] * om[None, :] * K12 + om[None, :] ** 2 * K22)
    D = n1 * nj
    H = np.zeros((D, D), dtype=complex)
    H[np.diag_indices(D)] = kin.ravel()
    info = {"dim": D}
    if cfg.delta != 0 and W is not None:
        p, cp, pmax = wall_fourier(cfg)
        info["wall_content"] = pmax
        if pmax > 2 * N * cfg.M2:
            raise ConfigError(f"wall Fourier content {pmax} exceeds the transverse window 2 N M2 = {2 * N * cfg.M2}")
    else:
        p, cp = np.zeros(0, dtype=int), np.zeros(0, dtype=complex)
    span = 2 * nj - 1
    byshift = {}
    for a, b, v, w in _terms(V, W if cfg.delta != 0 else None, cfg.edge):
        g = byshift.setdefault(a, np.zeros(span, dtype=complex))   # g[d + nj - 1], d = jt - js
        d0 = N * b
        if v != 0 and abs(d0) < nj:
            g[d0 + nj - 1] += cfg.eps * v
        if w != 0 and len(p):
            d = d0 + p
            ok = np.abs(d) < nj
            np.add.at(g, d[ok] + nj - 1, cfg.delta * w * cp[ok])
    H4 = H.reshape(n1, nj, n1, nj)
    for a, g in byshift.items():
        if not np.any(g):
            continue
        T = sla.toeplitz(g[nj - 1:], g[nj - 1::-1])                  # T[jt, js] = g(jt - js)
        for i in range(n1):
            if 0 <= i + a < n1:
                H4[i + a, :, i, :] += T
    return EdgeOperator(cfg=cfg, H=H, channels=ms, c2=c2, j=js, info=info)


def fd_weights(order: int):
    """Central weights for the first and second derivative on offsets 1..order/2."""
    r = order // 2
    k = np.arange(1, r + 1)
    # first derivative: sum_k w_k (f_k - f_-k) = f';  odd moments
    A = np.array([2 * k ** (2 * i + 1) for i in range(r)], dtype=float)
    rhs = np.zeros(r)
    rhs[0] = 1.0
    w1 = np.linalg.solve(A, rhs)
    # second derivative: w0 f0 + sum_k w_k (f_k + f_-k) = f'';  even moments
    B = np.array([2 * k ** (2 * i + 2) / math.factorial(2 * i + 2) for i in range(r)], dtype=float)
    rhs = np.zeros(r)
    rhs[0] = 1.0
    w2 = np.linalg.solve(B, rhs)
    return w1, -2.0 * w2.sum(), w2


def _assemble_fd(V, W, cfg):
    ms, c2, _ = cfg.layout()
    nc = cfg.points_per_cell
    nt = cfg.N * nc
    h = TWO_PI / nc
    t = h * np.arange(nt)
    nch = len(ms)
    th, K11, K12, K22 = _kinetic_coeffs(cfg, ms, c2)
    A = th ** 2 * K11 + 2 * th * c2 * K12 + c2 * c2 * K22
    Bc = 2 * th * K12 + 2 * c2 * K22                     # multiplies -i d/dt
    w1, w20, w2 = fd_weights(cfg.fd_order)
    L = np.arange(nt)
    rows, cols, vals = [], [], []

    def put(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    for i in range(nch):
        put(L * nch + i, L * nch + i, np.full(nt, A[i] - K22 * w20 / h ** 2, dtype=complex))
        for k, (a1, a2) in enumerate(zip(w1, w2), start=1):
            for sgn in (1, -1):
                src = ((L + sgn * k) % nt) * nch + i
                v = -1j * Bc[i] * sgn * a1 / h - K22 * a2 / h ** 2
                put(L * nch + i, src, np.full(nt, v, dtype=complex))
    kap = _kappa_N(cfg, t) if cfg.delta != 0 else None
    for a, b, v, w in _terms(V, W if cfg.delta != 0 else None, cfg.edge):
        mult = cfg.eps * v * np.exp(1j * b * t)
        if kap is not None and w != 0:
            mult = mult + cfg.delta * w * kap * np.exp(1j * b * t)
        for i in range(nch):
            if 0 <= i + a < nch:
                put(L * nch + i + a, L * nch + i, mult)
    D = nt * nch
    H = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(D, D))
    H.sum_duplicates()
    return EdgeOperator(cfg=cfg, H=H, channels=ms, c2=c2, t=t, info={"dim": D, "fd_order": cfg.fd_order})


# ---------------------------------------------------------------- states

@dataclass
class EdgeState:
    E: float
    coeffs: np.ndarray
    transverse_center: float     # in t = K2.x units, in [-pi N, pi N)
    decay_rate: float            # amplitude decay per unit physical length
    ipr: float
    is_localized: bool
    r2: float = 0.0
    residual: float = 0.0
    side: str = "bulk"           # wall / antiwall / bulk

    def row(self):
        return [self.E, int(self.is_localized), self.ipr, self.decay_rate]


def state_profile(op: EdgeOperator, vec: np.ndarray):
    """(t samples, g (channels, samples)) with the exp(i c2 t) factor removed.

    The sample sum of |g|^2 equals the squared norm of vec.
    """
    nch = len(op.channels)
    if op.t is not None:
        g = vec.reshape(len(op.t), nch).T
        return op.t, g
    N = op.cfg.N
    c = vec.reshape(nch, len(op.j))
    nt = N * (2 * op.cfg.M2 + 2)
    buf = np.zeros((nch, nt), dtype=complex)
    np.add.at(buf, (slice(None), op.j % nt), c)
    g = np.fft.ifft(buf, axis=1) * math.sqrt(nt)       # unitary: sample sum |g|^2 = sum |c|^2
    t = TWO_PI * N * np.arange(nt) / nt
    return t, g


def cell_masses(op: EdgeOperator, vec: np.ndarray):
    t, g = state_profile(op, vec)
    rho = np.sum(np.abs(g) ** 2, axis=0)
    cell = np.floor(t / TWO_PI + 1e-9).astype(int) % op.cfg.N
    m = np.bincount(cell, weights=rho, minlength=op.cfg.N)
    return m / m.sum(), t, rho


def localization(op: EdgeOperator, vec: np.ndarray):
    """ipr, transverse center, fitted amplitude decay rate (per physical length) and R^2."""
    cfg = op.cfg
    N = cfg.N
    p, t, rho = cell_masses(op, vec)
    ipr = float(np.sum(p * p))
    z = np.sum(rho * np.exp(1j * t / N))
    tc = float(np.angle(z) * N) if abs(z) > 1e-12 * rho.sum() else 0.0
    tcell = TWO_PI * (np.arange(N) + 0.5)
    d = np.abs((tcell - tc + math.pi * N) % (TWO_PI * N) - math.pi * N)
    lo = max(TWO_PI, 3.0 * cfg.wall.width / abs(cfg.delta)) if cfg.delta else TWO_PI
    hi = math.pi * N / 2
    sel = (d >= lo) & (d <= hi) & (p > 1e-13 * p.max())
    rate, r2 = 0.0, 0.0
    if sel.sum() >= 4:
        x, y = d[sel], np.log(p[sel])
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        fit = A @ coef
        ss = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum((y - fit) ** 2)) / ss if ss > 0 else 0.0
        K2n = float(np.linalg.norm(cfg.edge.frak_K2))
        rate = -0.5 * coef[1] * K2n                     # |Psi| ~ exp(-rate * physical distance)
    loc = bool(ipr >= 4.0 / N and r2 > 0.95 and rate > 0)
    return ipr, tc, rate, r2, loc


def _side(tc: float, N: int, loc: bool) -> str:
    if not loc:
        return "bulk"
    return "wall" if abs(tc) < math.pi * N / 2 else "antiwall"


def solve_near(op: EdgeOperator, E_target: float, n_eigs: int = 8, tol: float = 0.0) -> list[EdgeState]:
    """Eigenpairs nearest E_target by shift-invert; sorted by energy."""
    D = op.dim
    k = min(n_eigs, D - 2)
    sigma = float(E_target)
    last = None
    for attempt in range(4):
        try:
            if op.dense:
                A = op.H - sigma * np.eye(D)
                lu = sla.lu_factor(A, overwrite_a=True, check_finite=False)
                if np.min(np.abs(np.diag(lu[0]))) < 1e-14 * max(1.0, abs(sigma)):
                    raise np.linalg.LinAlgError("singular shift")
                Op = spla.LinearOperator((D, D), matvec=lambda x: sla.lu_solve(lu, x), dtype=complex)
            else:
                lu = spla.splu((op.H - sigma * sp.identity(D, format="csr")).tocsc())
                Op = spla.LinearOperator((D, D), matvec=lu.solve, dtype=complex)
            theta, U = spla.eigsh(Op, k=k, which="LM", tol=tol)
            E = sigma + 1.0 / theta
            break
        except (np.linalg.LinAlgError, RuntimeError, spla.ArpackError) as exc:
            last = exc
            sigma += 1e-7 * max(1.0, abs(sigma)) * (attempt + 1)
    else:
        raise NumericFailure(f"shift-invert failed near {E_target}: {last}")
    order = np.argsort(E)
    out = []
    for i in order:
        v = U[:, i] / np.linalg.norm(U[:, i])
        e = float(E[i])
        Hv = op.H @ v
        e = float(np.real(np.vdot(v, Hv)))
        res = float(np.linalg.norm(Hv - e * v))
        if res > 1e-8 * (1 + abs(e)):
            raise NumericFailure(f"edge eigen-residual {res:.3g} at E={e}")
        ipr, tc, rate, r2, loc = localization(op, v)
        out.append(EdgeState(E=e, coeffs=v, transverse_center=tc, decay_rate=rate, ipr=ipr,
                             is_localized=loc, r2=r2, residual=res, side=_side(tc, op.cfg.N, loc)))
    return out


def reference_energy(V: FourierPotential, cfg: SupercellConfig, E_guess: float) -> float:
    """Dirac energy of the discretised bulk (one cell, delta = 0), nearest E_guess.

    The pair is degenerate for planewave; for fd the two values are averaged.
    """
    c1 = replace(cfg, N=1, delta=0.0, offset=None, check_separation=False)
    op = assemble_edge(V, None, c1)
    H = op.H if op.dense else op.H.toarray()
    ev = np.linalg.eigvalsh(H)
    i = np.argsort(np.abs(ev - E_guess))[:2]
    return float(np.mean(ev[i]))


def doublet(states: list[EdgeState]):
    """The lowest-|E - ref| localized wall and antiwall states (either may be None)."""
    w = [s for s in states if s.side == "wall"]
    a = [s for s in states if s.side == "antiwall"]
    return (w[0] if w else None), (a[0] if a else None)


# ---------------------------------------------------------------- sweeps

@dataclass
class SpectrumSweep:
    axis: str
    values: list
    spectra: list
    E_ref: float
    meta: dict = field(default_factory=dict)

    def rows(self):
        """axis_value,E,is_localized,ipr,decay_rate."""
        out = []
        for x, sts in zip(self.values, self.spectra):
            for s in sts:
                out.append([x] + s.row())
        return out

    def branch(self, side: str = "wall"):
        """Per axis value: energy of the localized state on `side` nearest E_ref, or nan."""
        out = []
        for sts in self.spectra:
            c = [s.E for s in sts if s.side == side]
            out.append(min(c, key=lambda e: abs(e - self.E_ref)) if c else float("nan"))
        return np.array(out)


def _run(points, fn, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, points))
    return [fn(p) for p in points]


def sweep_delta(V, W, edge: EdgeFrame, eps: float, deltas, cfg: SupercellConfig | None = None,
                E_target: float | None = None, n_eigs: int = 8, threads: int = 1) -> SpectrumSweep:
    deltas = [float(d) for d in deltas]
    if not deltas or min(deltas) <= 0:
        raise InvalidArgument("delta grid must be non-empty and positive")
    cfg = cfg or SupercellConfig(edge=edge)
    cfg = replace(cfg, edge=edge, eps=eps)
    if E_target is None:
        from .bloch import find_dirac_point
        E_target = reference_energy(V, cfg, find_dirac_point(V, M=cfg.M1, eps=eps).E_star)

    def one(d):
        return solve_near(assemble_edge(V, W, replace(cfg, delta=d)), E_target, n_eigs)

    spectra = _run(deltas, one, threads)
    return SpectrumSweep("delta", deltas, spectra, E_target, {"eps": eps, "N": cfg.N, "method": cfg.method})


def sweep_kpar(V, W, edge: EdgeFrame, eps: float, delta: float, k_grid, cfg: SupercellConfig | None = None,
               E_target: float | None = None, n_eigs: int = 8, threads: int = 1) -> SpectrumSweep:
    ks = [float(k) % TWO_PI for k in k_grid]
    cfg = cfg or SupercellConfig(edge=edge)
    cfg = replace(cfg, edge=edge, eps=eps, delta=delta, offset=None)
    if E_target is None:
        from .bloch import find_dirac_point
        E_target = reference_energy(V, cfg, find_dirac_point(V, M=cfg.M1, eps=eps).E_star)

    def one(k):
        return solve_near(assemble_edge(V, W, replace(cfg, k_par=k)), E_target, n_eigs)

    spectra = _run(ks, one, threads)
    return SpectrumSweep("k_par", ks, spectra, E_target, {"eps": eps, "delta": delta, "N": cfg.N})


def power_fit(x, y):
    """y = C x^p by least squares in log-log; returns (p, C)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.any(x <= 0) or np.any(y == 0):
        raise InvalidArgument("power fit needs positive abscissae and nonzero ordinates")
    p, lc = np.polyfit(np.log(x), np.log(np.abs(y)), 1)
    return float(p), float(math.copysign(math.exp(lc), y[0]))


# ---------------------------------------------------------------- multiscale comparison

def reversed_wall(wall: DomainWall) -> DomainWall:
    p, d = wall.profile, wall.derivative
    return DomainWall(lambda z: p(-np.asarray(z, dtype=float)), lambda z: -d(-np.asarray(z, dtype=float)),
                      wall.kappa_inf, wall.width, wall.label + "(reversed)")


def multiscale_profile(op: EdgeOperator, dp: DiracPointData, W: FourierPotential, side: str = "wall"):
    """Samples of alpha_+ Phi_+ + alpha_- Phi_- in the layout of state_profile.

    The envelope is the zero mode of the 1D Dirac operator with the periodised wall
    kappa_N, so near the chosen wall it is alpha_star(delta (t - t_wall)) and it stays
    smooth across the whole supercell (no cut at the half-cell boundary).
    """
    cfg = op.cfg
    e = cfg.edge
    aK = float(dp.K @ e.frak_v1) / TWO_PI
    bK = float(dp.K @ e.frak_v2) / TWO_PI
    x = cfg.k_par / TWO_PI
    if abs(((aK - x) + 0.5) % 1.0 - 0.5) > 1e-9:
        raise InvalidArgument("k_par is not the K value of this edge")
    if dp.lambda_sharp_sum is None:
        lambda_sharp(dp)
    th = theta_sharp(dp, W)
    K2 = e.frak_K2
    vF = abs(dp.lambda_sharp_sum) * float(np.linalg.norm(K2))
    wall = cfg.wall if side == "wall" else reversed_wall(cfg.wall)
    N = cfg.N
    t, _ = state_profile(op, np.zeros(op.dim, dtype=complex))
    spinor = zero_mode_exact(DiracOperator1D(vF=vF, theta=th, wall=wall), np.linspace(-1.0, 1.0, 3)).spinor
    s_loc = 1.0 if side == "wall" else -1.0
    s_loc *= math.copysign(1.0, float(cfg.wall.profile(np.array(200.0))))
    # int_{t_wall}^{t} kappa_N, on a periodic grid (mean of kappa_N is zero)
    kap = _kappa_N(cfg, t)
    h = t[1] - t[0]
    I = np.concatenate([[0.0], np.cumsum(0.5 * (kap[1:] + kap[:-1]) * h)])
    t0 = 0.0 if side == "wall" else math.pi * N
    i0 = int(np.argmin(np.abs(t - t0)))
    I = I - I[i0]
    env = np.exp(-s_loc * abs(th) / vF * cfg.delta * I)
    Pp, Pm = phi_pm(dp, K2)
    g = np.zeros((len(op.channels), len(t)), dtype=complex)
    chan = {int(m): i for i, m in enumerate(op.channels)}
    kept = 0.0
    for idx, cp_, cm_ in zip(dp.indices, Pp, Pm):
        n1, n2 = e.to_frame(idx)
        m1 = int(round(aK + n1 - x))
        if m1 not in chan:
            continue
        if op.j is not None:
            jj = round((bK + n2 - op.c2) * N)
            if not (op.j[0] <= jj <= op.j[-1]):
                continue
        kept += abs(cp_) ** 2 + abs(cm_) ** 2
        ph = np.exp(1j * (bK + n2 - op.c2) * t)
        g[chan[m1]] += (cp_ * spinor[0] + cm_ * spinor[1]) * env * ph
    return t, g, kept / 2.0


@dataclass
class MultiscaleReport:
    defect: float
    decay_rate: float
    predicted_rate: float
    rate_error: float
    captured: float
    E: float

    def to_dict(self):
        return dict(self.__dict__)


def compare_multiscale(op: EdgeOperator, state: EdgeState, dp: DiracPointData, W: FourierPotential) -> MultiscaleReport:
    if not state.is_localized:
        raise InvalidArgument("state is not localized")
    t, g0, kept = multiscale_profile(op, dp, W, state.side)
    _, g = state_profile(op, state.coeffs)
    ov = abs(np.vdot(g0.ravel(), g.ravel())) / (np.linalg.norm(g0) * np.linalg.norm(g))
    th = theta_sharp(dp, W)
    pred = abs(op.cfg.delta * th * op.cfg.wall.kappa_inf / abs(dp.lambda_sharp_sum))
    return MultiscaleReport(defect=float(1.0 - ov), decay_rate=state.decay_rate, predicted_rate=pred,
                            rate_error=abs(state.decay_rate - pred) / pred, captured=float(kept), E=state.E)


# ---------------------------------------------------------------- cylinder Floquet-Bloch transform

@dataclass
class CylinderBasis:
    op: EdgeOperator
    lambdas: np.ndarray          # omega_r - b_D, one per block
    blocks: list                 # index arrays into the supercell basis
    energies: np.ndarray         # (N, n_bands)
    vectors: list                # per block (block_dim, n_bands)
    n_bands: int


def _blocks(op: EdgeOperator):
    N = op.cfg.N
    nj = len(op.j)
    full = np.arange(op.dim).reshape(len(op.channels), nj)
    out = []
    for r in range(N):
        cols = np.nonzero((op.j % N) == ((op.j[0] + r) % N))[0]
        out.append(full[:, cols].ravel())
    return out


def cylinder_basis(V: FourierPotential, edge: EdgeFrame, N: int = 16, M1: int = 4, M2: int = 3,
                   k_par: float | None = None, eps: float = 1.0, n_bands: int = 6,
                   offset: float | None = None) -> CylinderBasis:
    """Bulk Bloch modes on the N transverse quasi-momenta of a supercell at delta = 0."""
    cfg = SupercellConfig(edge=edge, N=N, M1=M1, M2=M2, k_par=k_par, eps=eps, delta=0.0,
                          offset=offset, check_separation=False)
    op = assemble_edge(V, None, cfg)
    blocks = _blocks(op)
    a, b, _ = cfg.dirac_frame()
    ens, vecs, lams = [], [], []
    for r, ix in enumerate(blocks):
        Hb = op.H[np.ix_(ix, ix)]
        if np.abs(op.H[np.ix_(ix, np.setdiff1d(np.arange(op.dim), ix))]).max(initial=0.0) > 0:
            raise NumericFailure("delta = 0 supercell operator is not block diagonal")
        w, U = np.linalg.eigh(Hb)
        ens.append(w[:n_bands])
        vecs.append(U[:, :n_bands])
        lams.append(op.c2 + op.j[0] / N + r / N - b)
    return CylinderBasis(op=op, lambdas=np.array(lams), blocks=blocks, energies=np.array(ens),
                         vectors=vecs, n_bands=n_bands)


def cylinder_bloch_transform(f: np.ndarray, basis: CylinderBasis):
    """f (supercell coefficients) -> (ftilde (n_bands, N), truncation residual)."""
    f = np.asarray(f, dtype=complex)
    ft = np.zeros((basis.n_bands, len(basis.blocks)), dtype=complex)
    for r, (ix, U) in enumerate(zip(basis.blocks, basis.vectors)):
        ft[:, r] = U.conj().T @ f[ix]
    resid = float(np.linalg.norm(f - inverse_cylinder_bloch_transform(ft, basis)))
    return ft, resid


def inverse_cylinder_bloch_transform(ft: np.ndarray, basis: CylinderBasis) -> np.ndarray:
    f = np.zeros(basis.op.dim, dtype=complex)
    for r, (ix, U) in enumerate(zip(basis.blocks, basis.vectors)):
        f[ix] = U @ ft[:, r]
    return f


def decoupling_check(V: FourierPotential, cfg: SupercellConfig):
    """Max over blocks of |block spectrum - bulk fiber spectrum| for the same plane waves."""
    cfg = replace(cfg, delta=0.0, method="planewave", check_separation=False)
    op = assemble_edge(V, None, cfg)
    e = cfg.edge
    N = cfg.N
    worst = 0.0
    for ix in _blocks(op):
        i1, ij = np.divmod(ix, len(op.j))
        jr = op.j[ij[0]] % N
        om = op.c2 + jr / N
        k = (cfg.k_par / TWO_PI) * e.frak_K1 + om * e.frak_K2
        n2 = (op.j[ij] - jr) // N
        idx = np.array([e.from_frame((m, n)) for m, n in zip(op.channels[i1], n2)])
        fib = assemble_fiber(V.scaled(cfg.eps), k, 1, indices=idx)
        a = np.linalg.eigvalsh(op.H[np.ix_(ix, ix)])
        b = np.linalg.eigvalsh(fib.H)
        worst = max(worst, float(np.abs(a - b).max() / max(1.0, np.abs(b).max())))
    return worst
