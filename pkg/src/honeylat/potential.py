"""Periodic potentials stored by their dual-lattice Fourier coefficients, domain
walls, and lattice-sum (bump) potentials whose V_{1,1} can be tuned by scale.

A potential P is the finite sum  P(x) = sum_m P_m exp(i (m1 k1 + m2 k2) . x).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, InvalidArgument, PrecisionLoss
from .geometry import SQRT3, TriangularLattice, make_lattice, rotate_index

Index = tuple[int, int]


@dataclass(frozen=True)
class FourierPotential:
    lattice: TriangularLattice
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for m, v in self.coeffs.items():
            m = (int(m[0]), int(m[1]))
            v = complex(v)
            if v != 0:
                clean[m] = clean.get(m, 0) + v
        object.__setattr__(self, "coeffs", clean)

    @property
    def cutoff(self) -> int:
        return max((max(abs(m[0]), abs(m[1])) for m in self.coeffs), default=0)

    def __getitem__(self, m) -> complex:
        return self.coeffs.get((int(m[0]), int(m[1])), 0j)

    def scaled(self, s: float) -> "FourierPotential":
        return FourierPotential(self.lattice, {m: s * v for m, v in self.coeffs.items()})

    def __add__(self, other: "FourierPotential") -> "FourierPotential":
        out = dict(self.coeffs)
        for m, v in other.coeffs.items():
            out[m] = out.get(m, 0) + v
        return FourierPotential(self.lattice, out)

    def items(self):
        return sorted(self.coeffs.items())

    def arrays(self):
        """(indices (n,2) int, values (n,) complex), sorted by index."""
        its = self.items()
        if not its:
            return np.zeros((0, 2), dtype=int), np.zeros(0, dtype=complex)
        idx = np.array([m for m, _ in its], dtype=int)
        val = np.array([v for _, v in its], dtype=complex)
        return idx, val

    def is_real(self, tol: float = 1e-12) -> bool:
        return _worst(self, lambda m: (-m[0], -m[1]), conj=True)[0] <= tol

    def __call__(self, x) -> np.ndarray:
        return eval_on_grid(self, x)


def zero_potential(lat: TriangularLattice | None = None) -> FourierPotential:
    return FourierPotential(lat or make_lattice(1.0), {})


def constant_potential(c: float, lat: TriangularLattice | None = None) -> FourierPotential:
    return FourierPotential(lat or make_lattice(1.0), {(0, 0): c})


def _worst(P: FourierPotential, partner, conj: bool = False, sign: float = 1.0):
    """Largest |P_partner(m) - sign * (conj) P_m| over stored m and the offending index."""
    worst, where = 0.0, None
    keys = set(P.coeffs)
    keys |= {partner(m) for m in P.coeffs}
    for m in keys:
        a = P[partner(m)]
        b = P[m]
        b = b.conjugate() if conj else b
        d = abs(a - sign * b)
        if d > worst:
            worst, where = d, m
    return worst, where


@dataclass
class ValidationReport:
    checks: dict
    proxy: complex | None = None

    @property
    def ok(self) -> bool:
        return all(c["pass"] for c in self.checks.values()) and (
            self.proxy is None or abs(self.proxy) > 1e-12)

    def to_dict(self):
        d = {"ok": self.ok, "checks": self.checks}
        if self.proxy is not None:
            d["proxy"] = [self.proxy.real, self.proxy.imag]
        return d


def _check(P, partner, conj, sign, tol):
    w, where = _worst(P, partner, conj=conj, sign=sign)
    return {"pass": w <= tol, "worst": w, "index": where}


def validate_honeycomb(V: FourierPotential, tol: float = 1e-12) -> ValidationReport:
    neg = lambda m: (-m[0], -m[1])
    return ValidationReport({
        "real": _check(V, neg, True, 1.0, tol),
        "even": _check(V, neg, False, 1.0, tol),
        "rotation": _check(V, rotate_index, False, 1.0, tol),
    })


def validate_W(W: FourierPotential, tol: float = 1e-12) -> ValidationReport:
    """Realness and oddness of W plus the nondegeneracy number W01 + W10 - W11."""
    neg = lambda m: (-m[0], -m[1])
    proxy = W[(0, 1)] + W[(1, 0)] - W[(1, 1)]
    return ValidationReport({
        "real": _check(W, neg, True, 1.0, tol),
        "odd": _check(W, neg, False, -1.0, tol),
    }, proxy=complex(proxy))


def builtin_potentials(lat: TriangularLattice | None = None):
    """V = sum_j cos(R^j k1 . x) and W = sin(k1.x) + sin(k2.x) + sin((k1+k2).x)."""
    lat = lat or make_lattice(1.0)
    orbit = [(1, 0), (0, 1), (1, 1)]
    V, W = {}, {}
    for m in orbit:
        mm = (-m[0], -m[1])
        V[m] = V[mm] = 0.5
        W[m] = -0.5j
        W[mm] = 0.5j
    return FourierPotential(lat, V), FourierPotential(lat, W)


def cell_grid(lat: TriangularLattice, n: int) -> np.ndarray:
    """n*n points x = (i/n) v1 + (j/n) v2, shape (n*n, 2)."""
    s = np.arange(n) / n
    S1, S2 = np.meshgrid(s, s, indexing="ij")
    return np.outer(S1.ravel(), lat.v1) + np.outer(S2.ravel(), lat.v2)


def eval_on_grid(P: FourierPotential, x, check_real: bool = True) -> np.ndarray:
    """Sample P at points x (shape (..., 2)); returns real values."""
    if check_real and not P.is_real(1e-12):
        raise InvalidArgument("potential is not real-valued (V_{-m} != conj V_m)")
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    pts = x.reshape(-1, 2)
    idx, val = P.arrays()
    if len(val) == 0:
        return np.zeros(shape)
    G = P.lattice.dual(idx)                       # (n, 2)
    out = np.exp(1j * pts @ G.T) @ val
    if check_real and np.max(np.abs(out.imag), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(out.real))):
        raise InvalidArgument("synthesised samples have a non-negligible imaginary part")
    return out.real.reshape(shape)


# ---------------------------------------------------------------- file format

def load_potential(path) -> FourierPotential:
    """Read {"lattice_scale": a, "coeffs": [[m1, m2, re, im], ...]}.

    Missing conjugate partners are filled in; inconsistent ones are an error.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
        a = float(data.get("lattice_scale", 1.0))
        rows = data["coeffs"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read potential file {path}: {exc}") from exc
    lat = make_lattice(a)
    coeffs: dict = {}
    for row in rows:
        if len(row) != 4:
            raise ConfigError(f"coefficient row {row!r} must be [m1, m2, re, im]")
        m = (int(row[0]), int(row[1]))
        coeffs[m] = complex(float(row[2]), float(row[3]))
    for m, v in list(coeffs.items()):
        mm = (-m[0], -m[1])
        if mm not in coeffs:
            coeffs[mm] = v.conjugate()
        elif abs(coeffs[mm] - v.conjugate()) > 1e-12 * max(1.0, abs(v)):
            raise ConfigError(f"coefficients at {m} and {mm} are not complex conjugates")
    return FourierPotential(lat, coeffs)


def save_potential(P: FourierPotential, path) -> None:
    rows = [[m[0], m[1], repr_float(v.real), repr_float(v.imag)] for m, v in P.items()]
    with open(path, "w") as fh:
        json.dump({"lattice_scale": P.lattice.a, "coeffs": rows}, fh, indent=1)


def repr_float(x: float) -> float:
    return float(f"{x:.17g}")


# ---------------------------------------------------------------- domain walls

@dataclass(frozen=True)
class DomainWall:
    profile: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    kappa_inf: float
    width: float
    label: str = "custom"

    def __call__(self, z):
        return self.profile(np.asarray(z, dtype=float))

    def asymptotes(self, R_check: float = 200.0):
        return float(self.profile(np.array(-R_check))), float(self.profile(np.array(R_check)))

    def moments(self, a: float = 2.6, R: float = 60.0, n: int = 200001):
        """Truncated integrals of (1+|z|)^a |k^2 - kinf^2| and (1+|z|)^a |k'| over [-R, R]."""
        z = np.linspace(-R, R, n)
        w = (1.0 + np.abs(z)) ** a
        k = self.profile(z)
        m1 = np.trapezoid(w * np.abs(k * k - self.kappa_inf ** 2), z)
        m2 = np.trapezoid(w * np.abs(self.derivative(z)), z)
        return float(m1), float(m2)

    def moments_converge(self, a: float = 2.6, radii=(20.0, 40.0, 80.0), rtol: float = 1e-6) -> bool:
        vals = [self.moments(a, R, n=int(4000 * R) + 1) for R in radii]
        (p1, p2), (l1, l2) = vals[-2], vals[-1]
        return (abs(l1 - p1) <= rtol * max(1.0, abs(l1))
                and abs(l2 - p2) <= rtol * max(1.0, abs(l2)))

    def deformed(self, amplitude: float, center: float = 0.0, halfwidth: float = 2.0,
                 label: str | None = None) -> "DomainWall":
        """Add a compactly supported bump A*s((z-c)/h); the asymptotes are untouched."""
        base_p, base_d = self.profile, self.derivative

        def prof(z):
            u = (np.asarray(z, dtype=float) - center) / halfwidth
            return base_p(z) + amplitude * _bump(u)

        def der(z):
            u = (np.asarray(z, dtype=float) - center) / halfwidth
            return base_d(z) + amplitude * _bump_d(u) / halfwidth

        return DomainWall(prof, der, self.kappa_inf, self.width,
                          label or f"{self.label}+bump({amplitude:.3g},{center:.3g})")


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui * ui))
    return out


def _bump_d(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    d = 1.0 - ui * ui
    out[inside] = np.exp(1.0 - 1.0 / d) * (-2.0 * ui / (d * d))
    return out


def _bump_dd(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    d = 1.0 - ui * ui
    g = -2.0 * ui / (d * d)
    dg = (-2.0 * d * d - (-2.0 * ui) * 2.0 * d * (-2.0 * ui)) / d ** 4
    out[inside] = np.exp(1.0 - 1.0 / d) * (g * g + dg)
    return out


def make_wall(kind: str = "tanh", kappa_inf: float = 1.0, width: float = 1.0,
              profile=None, derivative=None, label: str | None = None) -> DomainWall:
    if kappa_inf <= 0 or width <= 0:
        raise InvalidArgument("kappa_inf and width must be positive")
    if kind == "tanh":
        return DomainWall(lambda z: kappa_inf * np.tanh(np.asarray(z) / width),
                          lambda z: kappa_inf / width * (1.0 - np.tanh(np.asarray(z) / width) ** 2),
                          kappa_inf, width, label or "tanh")
    if kind == "custom":
        if profile is None:
            raise InvalidArgument("custom wall needs a profile")
        if derivative is None:
            h = 1e-5 * width

            def derivative(z, _p=profile):
                z = np.asarray(z, dtype=float)
                return (_p(z + h) - _p(z - h)) / (2 * h)
        return DomainWall(profile, derivative, kappa_inf, width, label or "custom")
    raise InvalidArgument(f"unknown wall kind {kind!r}")


def make_wall_flat(amplitude: float, kappa_inf: float = 1.0, width: float = 1.0,
                   support: float = 3.0) -> DomainWall:
    """The kappa_natural family: kinf tanh(z/w) + A s'(z), s(z) = bump(z/support).

    s' is odd and compactly supported, so the asymptotes and the sign change at
    z = 0 are those of the tanh wall, while kappa' near the wall (which feeds the
    effective potential of the band-edge model) is reshaped by A.
    """
    base = make_wall("tanh", kappa_inf, width)

    def prof(z):
        z = np.asarray(z, dtype=float)
        return base.profile(z) + amplitude * _bump_d(z / support) / support

    def der(z):
        z = np.asarray(z, dtype=float)
        return base.derivative(z) + amplitude * _bump_dd(z / support) / support ** 2

    return DomainWall(prof, der, kappa_inf, width, f"natural(A={amplitude:.6g})")


def blend_walls(w0: DomainWall, w1: DomainWall, theta: float) -> DomainWall:
    """(1 - theta) w0 + theta w1."""
    t = float(theta)
    return DomainWall(lambda z: (1 - t) * w0.profile(z) + t * w1.profile(z),
                      lambda z: (1 - t) * w0.derivative(z) + t * w1.derivative(z),
                      (1 - t) * w0.kappa_inf + t * w1.kappa_inf,
                      (1 - t) * w0.width + t * w1.width,
                      f"blend({w0.label},{w1.label},{t:.4g})")


# ---------------------------------------------------------------- bump sums

@dataclass(frozen=True)
class BumpSpec:
    g0: Callable[[np.ndarray], np.ndarray]          # radial profile g0(r)
    g0_hat: Callable[[np.ndarray], np.ndarray]      # (2pi)^-2 int g0(x) e^{-i xi.x} dx as a function of |xi|
    structure: str = "triangular"
    a: float = 1.0
    support: float = 3.0                            # g0(r) below 1e-16 for r > support

    def with_scale(self, a: float) -> "BumpSpec":
        return BumpSpec(self.g0, self.g0_hat, self.structure, a, self.support)


def gaussian_bump(s: float = 0.15, structure: str = "triangular", a: float = 1.0) -> BumpSpec:
    return BumpSpec(lambda r: np.exp(-np.asarray(r) ** 2 / (2 * s * s)),
                    lambda k: s * s / (2 * math.pi) * np.exp(-(s * np.asarray(k)) ** 2 / 2),
                    structure, a, support=9.0 * s)


def dog_bump(s1: float = 0.1, s2: float = 0.2, c: float = 0.5,
             structure: str = "triangular", a: float = 1.0) -> BumpSpec:
    """Difference of Gaussians e^{-r^2/2s1^2} - c e^{-r^2/2s2^2}, s1 < s2.

    Its transform changes sign at |xi|^2 = 2 ln(c s2^2/s1^2)/(s2^2 - s1^2)
    whenever c s2^2 > s1^2.
    """
    if not s1 < s2:
        raise InvalidArgument("difference of Gaussians needs s1 < s2")

    def g(r):
        r = np.asarray(r, dtype=float)
        return np.exp(-r * r / (2 * s1 * s1)) - c * np.exp(-r * r / (2 * s2 * s2))

    def gh(k):
        k = np.asarray(k, dtype=float)
        return (s1 * s1 * np.exp(-(s1 * k) ** 2 / 2) - c * s2 * s2 * np.exp(-(s2 * k) ** 2 / 2)) / (2 * math.pi)

    return BumpSpec(g, gh, structure, a, support=9.0 * s2)


def dog_sign_change_scale(s1=0.1, s2=0.2, c=0.5) -> float:
    """Lattice scale a at which the transform of the default DoG vanishes at 4pi/(sqrt3 a)."""
    xi = math.sqrt(2 * math.log(c * s2 * s2 / (s1 * s1)) / (s2 * s2 - s1 * s1))
    return 4 * math.pi / (SQRT3 * xi)


def _bump_centres(spec: BumpSpec) -> np.ndarray:
    a = spec.a
    if spec.structure == "triangular":
        return np.zeros((1, 2))
    if spec.structure == "honeycomb":
        A = np.zeros(2)
        B = a * np.array([1 / SQRT3, 0.0])
        tau0 = a / 2 * np.array([1 / SQRT3, 1.0])
        # the summand g0(x - A + tau0 + v) is centred at A - tau0 - v
        return np.array([A - tau0, B - tau0])
    raise InvalidArgument(f"unknown structure {spec.structure!r}")


def bump_fourier_coefficient(spec: BumpSpec, m) -> complex:
    """Closed-form (Poisson) coefficient V_m of the bump sum on the scaled lattice."""
    lat = make_lattice(spec.a)
    G = lat.dual(m)
    pref = (2 * math.pi) ** 2 / lat.cell_area
    phase = sum(np.exp(-1j * G @ c) for c in _bump_centres(spec))
    return complex(pref * phase * spec.g0_hat(np.linalg.norm(G)))


def bump_potential(spec: BumpSpec, M: int = 3) -> FourierPotential:
    """FourierPotential of the bump sum truncated to |m k| <= M q.

    A radial cutoff keeps the rotation and inversion symmetries; a square window would not.
    """
    lat = make_lattice(spec.a)
    co = {}
    for m1 in range(-2 * M, 2 * M + 1):
        for m2 in range(-2 * M, 2 * M + 1):
            if np.linalg.norm(lat.dual((m1, m2))) > M * lat.q * (1 + 1e-12):
                continue
            v = bump_fourier_coefficient(spec, (m1, m2))
            co[(m1, m2)] = complex(round(v.real, 15), round(v.imag, 15)) if abs(v) > 1e-15 else 0
    return FourierPotential(lat, co)


def v11_poisson(spec: BumpSpec) -> float:
    lat = make_lattice(spec.a)
    sign = 1.0 if spec.structure == "triangular" else -1.0
    return float(sign * (2 * math.pi) ** 2 / lat.cell_area * spec.g0_hat(lat.q))


def v11_quadrature(spec: BumpSpec, n: int = 160) -> float:
    """(1/|cell|) * integral over the scaled cell of e^{-i(k1+k2).y} V(y; a).

    V is built by summing translates in real space (no Fourier input), so this
    is an independent check on the closed form.  Periodic trapezoid rule.
    """
    lat = make_lattice(spec.a)
    y = cell_grid(lat, n)
    reach = spec.support + 2 * spec.a
    nmax = int(math.ceil(reach / (spec.a * SQRT3 / 2))) + 2
    Vy = np.zeros(len(y))
    for c in _bump_centres(spec):
        for i in range(-nmax, nmax + 1):
            for j in range(-nmax, nmax + 1):
                shift = i * lat.v1 + j * lat.v2 - c
                r = np.linalg.norm(y + shift, axis=1)
                if r.min() > spec.support:
                    continue
                Vy += spec.g0(r)
    tail = float(np.max(np.abs(spec.g0(np.array([spec.support])))))
    if tail > 1e-12:
        raise PrecisionLoss(f"bump tail {tail:.3g} at the quadrature boundary exceeds 1e-12")
    G = lat.k1 + lat.k2
    val = np.mean(np.exp(-1j * y @ G) * Vy)      # mean = (1/|cell|) * integral
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise PrecisionLoss(f"V11 quadrature has imaginary part {val.imag:.3g}")
    return float(val.real)


def v11_scan(spec: BumpSpec, a_values, n_quad: int = 160):
    """Rows (a, V11 closed form, V11 by quadrature)."""
    rows = []
    for a in a_values:
        s = spec.with_scale(float(a))
        rows.append((float(a), v11_poisson(s), v11_quadrature(s, n_quad)))
    return rows
