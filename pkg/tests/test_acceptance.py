"""Acceptance criteria 1-11.  Each test records one PASS/FAIL line (printed in the
pytest terminal summary, or directly when this file is run as a script).

Criteria whose literal target is out of reach keep the literal check; the
analysis lives in the decisions ledger, and the derived checks that do hold are
reported on the same line.
"""
import math
import time

import numpy as np
import pytest

from honeylat import bloch, edge, effective, potential
from honeylat import slice as sl
from honeylat.geometry import edge_frame, make_lattice
from honeylat.potential import builtin_potentials, make_wall

RESULTS = {}


def record(n, checks, t0, budget):
    """checks: list of (name, ok, detail).  The runtime budget is one more check."""
    dt = time.perf_counter() - t0
    checks = list(checks) + [("runtime", dt < budget, f"{dt:.1f}s < {budget}s")]
    ok = all(c[1] for c in checks)
    parts = "; ".join(f"{name}={'ok' if good else 'FAIL'} ({det})" for name, good, det in checks)
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} | {parts}"
    RESULTS[n] = line
    print(line)
    failed = [c[0] for c in checks if not c[1]]
    assert ok, f"criterion {n} failed: {failed}"


LAT = make_lattice(1.0)
V, W = builtin_potentials(LAT)
ZZ = edge_frame(1, 0, LAT)
AC = edge_frame(1, 1, LAT)


def test_criterion_1_free_fiber():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    V0 = potential.zero_potential(LAT)
    worst = 0.0
    for _ in range(100):
        k = rng.uniform(-1, 1, 2) * LAT.q
        f = bloch.assemble_fiber(V0, k, 4)
        E = bloch.solve_fiber(f, 20, vectors=False).energies
        p = bloch.momenta(LAT, k, f.indices)
        ref = np.sort(np.einsum("ij,ij->i", p, p))[:20]
        worst = max(worst, float(np.max(np.abs(E - ref) / np.maximum(ref, 1e-300))))
    record(1, [("free eigenvalues", worst < 1e-12, f"max rel err {worst:.2e}")], t0, 5)


def test_criterion_2_dirac_point():
    t0 = time.perf_counter()
    dp = bloch.find_dirac_point(V, 10, eps=10.0)
    E = bloch.solve_fiber(bloch.assemble_fiber(dp.V, dp.K, 10, indices=dp.indices), dp.b_star + 1,
                          vectors=False).energies
    split = abs(E[dp.b_star - 1] - E[dp.b_star])
    bloch.lambda_sharp(dp)
    aniso = dp.cone["anisotropy"]
    dm = bloch.find_dirac_point(V, 10, eps=-10.0)
    record(2, [("degeneracy", split < 1e-8, f"|E1-E2|={split:.1e}"),
               ("isotropy", aniso < 0.01, f"{aniso:.1e}"),
               ("b_star flip", dp.b_star == 1 and dm.b_star == 2, f"{dp.b_star}->{dm.b_star}")],
           t0, 30)


def test_criterion_3_perturbative():
    t0 = time.perf_counter()
    r = bloch.perturbative_check(V, [0.01, 0.02, 0.04], M=6, W=W)
    V00, V11 = V[(0, 0)].real, V[(1, 1)].real
    e1 = abs(r["coef_E_star"] - (V00 - V11)) / abs(V00 - V11)
    e2 = abs(r["coef_E_tilde"] - (V00 + 2 * V11)) / abs(V00 + 2 * V11)
    q = LAT.q
    Kabs = float(np.linalg.norm(LAT.K))
    slope = r["slope_at_0"]
    lit = abs(slope - q) / q
    der = abs(slope - Kabs) / Kabs
    record(3, [("E_star coef", e1 < 1e-3, f"{r['coef_E_star']:.7f} vs {V00 - V11} rel {e1:.1e}"),
               ("E_tilde coef", e2 < 1e-3, f"{r['coef_E_tilde']:.7f} vs {V00 + 2 * V11} rel {e2:.1e}"),
               ("slope->q literal", lit < 1e-3, f"{slope:.7f} vs q={q:.7f} rel {lit:.2e}"),
               ("slope->|K| derived", der < 1e-3, f"vs |K|={Kabs:.7f} rel {der:.1e}")], t0, 60)


def test_criterion_4_reduced_matrix():
    t0 = time.perf_counter()
    q = LAT.q
    worst = 0.0
    for lam in np.linspace(-0.5, 0.5, 101):
        ev = np.sort(np.linalg.eigvalsh(sl.m_approx(0.0, 0.0, lam, V, W).total))
        ref = np.sort([q * q * lam * (lam - 1), q * q * lam * lam, q * q * lam * (lam + 1)])
        worst = max(worst, float(np.max(np.abs(ev - ref))))
    # det vs -pi under eps halving, inside the regime
    epss = [0.02 / 2 ** i for i in range(6)]
    gaps = []
    for e in epss:
        rc = sl.regime_constants(V, e)
        lams = np.linspace(-rc["C_flat"], rc["C_flat"], 41) * math.sqrt(e)
        g = 0.0
        for lam in lams:
            for d in (0.0, 0.5 * e * e, e * e):
                g = max(g, sl.det_vs_pi(e, d, lam, V, W)[2])
        gaps.append(g)
    p = float(np.polyfit(np.log(epss), np.log(gaps), 1)[0])
    sym = max(abs(sl.m_approx(0.01, d, lam, V, W).det - sl.m_approx(0.01, -d, lam, V, W).det)
              for d in (1e-4, 3e-4) for lam in np.linspace(-0.2, 0.2, 21))
    record(4, [("mu_j closed forms", worst < 1e-10, f"max {worst:.1e}"),
               ("det vs -pi", p > 0, f"exponent {p:.3f}"),
               ("delta symmetry", sym < 1e-12, f"{sym:.1e}")], t0, 10)


def test_criterion_5_no_fold():
    t0 = time.perf_counter()
    q = LAT.q
    V11 = V[(1, 1)].real
    dp = bloch.find_dirac_point(V, 6, eps=0.2)
    rp = sl.no_fold_check(V.scaled(0.2), ZZ, dp, M=6)
    target = q ** 4 / 2 * abs(V11 * 0.2)
    c1_ok = rp.passed and target / 2 <= rp.c1 <= 2 * target
    dm = bloch.find_dirac_point(V, 6, eps=-0.2)
    rm = sl.no_fold_check(V.scaled(-0.2), ZZ, dm, M=6)
    rc = sl.regime_constants(V, -0.2)
    wit = abs(rm.witness_lambda) if rm.witness_lambda is not None else float("nan")
    inside = rc["lam_lo"] < wit < rc["lam_hi"]
    root = sl.find_fold_crossing(-0.2, 0.0, V, W)
    cross = sl.slice_crossing(V.scaled(-0.2), dm, ZZ.frak_K2, rc["lam_lo"], rc["lam_hi"], M=6)
    ra = sl.no_fold_check(V.scaled(0.2), AC, dp, M=6)
    wits = ra.details.get("witnesses", [])
    has = any(abs(w + 1 / 3) < 1e-6 for w in wits)
    E = bloch.bands_at(V.scaled(0.2), dp.K - AC.frak_K2 / 3, 6, dp.b_star + 1)
    gapE = abs(E[dp.b_star - 1] - dp.E_star)
    record(5, [("eps=+0.2 zigzag passes", rp.passed, f"min_pm={rp.min_pm:.4g}"),
               ("c1 within x2 of (q^4/2)|V11 eps|", c1_ok, f"c1={rp.c1:.4g} vs {target:.4g}"),
               ("eps=-0.2 fails", not rm.passed, f"witness {wit:.8f}"),
               ("witness in (z0,t0)sqrt|eps|", inside, f"({rc['lam_lo']:.5f},{rc['lam_hi']:.5f})"),
               ("bisection vs slice", abs(root - cross) < 1e-3, f"{root:.8f} vs {cross:.8f}"),
               ("armchair witness -1/3", (not ra.passed) and has, f"witnesses {np.round(wits, 8).tolist()}"),
               ("|E_b*-E*| at -1/3", gapE < 1e-6, f"{gapE:.1e}")], t0, 120)


def test_criterion_6_zero_mode():
    t0 = time.perf_counter()
    w = make_wall("tanh")
    D = effective.DiracOperator1D(vF=1.0, theta=1.0, wall=w)
    s = effective.dirac_spectrum(D)
    err = effective.mode_error(D, s)
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(10):
        wd = w.deformed(rng.uniform(-1, 1) * w.kappa_inf, rng.uniform(-4, 4), rng.uniform(0.5, 3))
        worst = max(worst, abs(effective.dirac_spectrum(effective.DiracOperator1D(1.0, 1.0, wd)).E0))
    record(6, [("|E0|", abs(s.E0) < 1e-8, f"{abs(s.E0):.1e}"), ("mode L2 error", err < 1e-6, f"{err:.1e}"),
               ("perturbed walls", worst < 1e-8, f"max |E0| {worst:.1e}")], t0, 10)


def _e10_series():
    dp = bloch.find_dirac_point(V, 8, eps=10.0)
    out = {}
    for d in (0.05, 0.1, 0.2, 0.3):
        cfg = edge.SupercellConfig(edge=ZZ, N=64, M1=6, M2=4, eps=10.0, delta=d)
        Er = edge.reference_energy(V, cfg, dp.E_star)
        st = edge.solve_near(edge.assemble_edge(V, W, cfg), Er, 6)
        pair = sorted(st, key=lambda s: abs(s.E - Er))[:2]
        out[d] = (Er, pair)
    return out


def _splitting(N, dp, delta=0.3):
    cfg = edge.SupercellConfig(edge=ZZ, N=N, M1=6, M2=4, eps=10.0, delta=delta)
    Er = edge.reference_energy(V, cfg, dp.E_star)
    st = sorted(edge.solve_near(edge.assemble_edge(V, W, cfg), Er, 4), key=lambda s: abs(s.E - Er))
    return abs(st[0].E - st[1].E)


def _small_eps_series(eps=0.5, deltas=(0.0625, 0.0625 / 2 ** 0.5, 0.03125, 0.03125 / 2 ** 0.5), Nd=140.0):
    dp = bloch.find_dirac_point(V, 8, eps=eps)
    rows = []
    for d in deltas:
        cfg = edge.SupercellConfig(edge=ZZ, N=int(math.ceil(Nd / d)), M1=2, eps=eps, delta=d, method="fd")
        Er = edge.reference_energy(V, cfg, dp.E_star)
        st = edge.solve_near(edge.assemble_edge(V, W, cfg), Er, 4)
        wall, anti = edge.doublet(st)
        rows.append((d, Er, wall, anti))
    return dp, rows


def test_criterion_7_edge_bifurcation():
    t0 = time.perf_counter()
    checks = []
    # large eps, N = 64: doublet and localization flags
    ser = _e10_series()
    loc = all(all(s.is_localized for s in pair) for _, pair in ser.values())
    ipr = min(s.ipr for _, pair in ser.values() for s in pair)
    sides = all({abs(s.transverse_center) < 1 for s in pair} == {True, False} for _, pair in ser.values())
    checks.append(("eps=10 N=64 localized doublet", loc,
                   f"min ipr {ipr:.4f} vs 4/N={4 / 64:.4f}; one state per wall: {sides}"))
    # E - E_star exponent at eps = 0.5 (wall branch)
    dp, rows = _small_eps_series()
    ok_rows = [r for r in rows if r[2] is not None]
    ds = np.array([r[0] for r in ok_rows])
    dE = np.array([r[2].E - r[1] for r in ok_rows])
    p, C = edge.power_fit(ds, dE) if len(ok_rows) >= 3 else (float("nan"), float("nan"))
    checks.append(("exponent 2+-0.15", abs(p - 2) <= 0.15, f"p={p:.4f} over delta {ds.min():.4f}..{ds.max():.4f}"))
    e2 = effective.e2_coefficient(dp, W, make_wall("tanh"), ZZ.frak_K2).value
    fitC = dE[-1] / ds[-1] ** 2 if len(dE) else float("nan")
    checks.append(("E2 within 20%", abs(fitC - e2) <= 0.2 * abs(e2),
                   f"fit {fitC:.5f} (power fit C={C:.5f}) vs E2 {e2:.5f}"))
    d0, _, s0, _ = ok_rows[-1]
    pred = d0 * abs(bloch.theta_sharp(dp, W)) * 1.0 / abs(dp.lambda_sharp_sum)
    checks.append(("decay rate within 15%", abs(s0.decay_rate - pred) <= 0.15 * pred,
                   f"{s0.decay_rate:.6g} vs {pred:.6g} at delta={d0:.4f}"))
    # splitting N = 32 -> 96 (literal, eps = 10, delta = 0.3)
    dp10 = bloch.find_dirac_point(V, 8, eps=10.0)
    s32, s96 = _splitting(32, dp10), _splitting(96, dp10)
    checks.append(("splitting drops 10x N 32->96", s32 >= 10 * s96, f"{s32:.3e} -> {s96:.3e}"))
    record(7, checks, t0, 1800)


def test_criterion_8_kpar_symmetry():
    t0 = time.perf_counter()
    cfg = edge.SupercellConfig(edge=ZZ, N=400, M1=5, eps=10.0, delta=0.4, method="fd")
    k0 = 2 * math.pi / 3
    ks = [k0 + x for x in (-0.06, -0.03, 0.0, 0.03, 0.06)]
    ks = ks + [2 * math.pi - k for k in ks]
    sw = edge.sweep_kpar(V, W, ZZ, 10.0, 0.4, ks, cfg, n_eigs=6)
    n = len(ks) // 2
    asym = max(float(np.max(np.abs(np.array([s.E for s in a]) - np.array([s.E for s in b]))))
               for a, b in zip(sw.spectra[:n], sw.spectra[n:]))
    near = lambda spec: any(s.is_localized for s in spec)
    both = near(sw.spectra[n // 2]) and near(sw.spectra[n + n // 2])
    record(8, [("k -> 2pi-k symmetry", asym < 1e-8, f"max |dE| {asym:.1e}"),
               ("branches at 2pi/3 and 4pi/3", both, "localized states present at both")], t0, 1200)


def test_criterion_9_non_protected():
    t0 = time.perf_counter()
    m = effective.effective_mass(V.scaled(-10.0), ZZ.frak_K2, M=10, band=1)
    w = make_wall("tanh")
    H = effective.effective_schrodinger(m, w)
    b = effective.bound_states(H)
    A, wn = effective.natural_amplitude(H)
    tr = effective.protection_homotopy(w, wn, np.linspace(0, 1, 11), m)
    E0 = float(np.max(np.abs(tr.dirac_E0)))
    ts = tr.theta_star
    record(9, [("m_eff < 0", m < 0, f"{m:.6g}"),
               ("tanh bound state on gap side", len(b) > 0 and b[0] > 0, f"{b}"),
               ("theta* in (0,1)", ts is not None and 0 < ts < 1, f"theta*={ts}, A={A}"),
               ("Dirac |E0| < 1e-8", E0 < 1e-8, f"{E0:.1e}")], t0, 30)


def test_criterion_10_cylinder_parseval():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    basis = edge.cylinder_basis(V, ZZ, N=16, M1=3, M2=2, eps=10.0, n_bands=6)
    rt, pv = 0.0, 0.0
    for _ in range(20):
        ft = rng.normal(size=(6, 16)) + 1j * rng.normal(size=(6, 16))
        f = edge.inverse_cylinder_bloch_transform(ft, basis)
        g, res = edge.cylinder_bloch_transform(f, basis)
        rt = max(rt, float(np.linalg.norm(g - ft) / np.linalg.norm(ft)), res / np.linalg.norm(f))
        pv = max(pv, abs(np.linalg.norm(g) ** 2 - np.linalg.norm(f) ** 2) / np.linalg.norm(f) ** 2)
    record(10, [("round trip", rt < 1e-8, f"{rt:.1e}"), ("Parseval", pv < 1e-8, f"{pv:.1e}")], t0, 60)


def test_criterion_11_v11_scan():
    t0 = time.perf_counter()
    worst = 0.0
    for st in ("triangular", "honeycomb"):
        for a in (0.7, 1.0, 1.5):
            s = potential.gaussian_bump(0.15, st, a)
            p, qd = potential.v11_poisson(s), potential.v11_quadrature(s)
            worst = max(worst, abs(p - qd) / abs(p))
    tri = potential.v11_poisson(potential.gaussian_bump(0.15, "triangular", 1.0))
    hon = potential.v11_poisson(potential.gaussian_bump(0.15, "honeycomb", 1.0))
    a_c = potential.dog_sign_change_scale()
    rows = potential.v11_scan(potential.dog_bump(structure="honeycomb"), np.linspace(0.5 * a_c, 1.5 * a_c, 11))
    sg = np.sign([r[1] for r in rows])
    flip = bool(np.any(sg[1:] != sg[:-1]))
    record(11, [("Poisson vs quadrature", worst < 1e-6, f"max rel {worst:.1e}"),
                ("opposite signs", tri * hon < 0, f"tri {tri:.4g} hon {hon:.4g}"),
                ("DoG sign flip in a", flip, f"near a={a_c:.4f}")], t0, 60)


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
