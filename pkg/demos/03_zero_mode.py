#! /usr/bin/env python3

# The 1D Dirac operator with a tanh mass wall has one zero mode.
# Deform the wall: the zero mode survives.  A Schrodinger band-edge model
# instead loses its bound state along a homotopy of walls.

import numpy as np

from honeylat import effective as ef
from honeylat.geometry import edge_frame, make_lattice
from honeylat.potential import builtin_potentials, make_wall

wall = make_wall("tanh")
D = ef.DiracOperator1D(vF=1.0, theta=1.0, wall=wall)
s = ef.dirac_spectrum(D, 6)
print("energies nearest 0:", np.round(np.sort(s.energies), 6))
print("|E0| =", abs(s.E0), "  L2 error vs closed form =", ef.mode_error(D, s))

rng = np.random.default_rng(0)
for _ in range(3):
    w = wall.deformed(rng.uniform(-1, 1), rng.uniform(-4, 4), rng.uniform(0.5, 3))
    print(w.label, " |E0| =", abs(ef.dirac_spectrum(ef.DiracOperator1D(1.0, 1.0, w)).E0))

# central differences: the zero mode gets a high-frequency twin
Dc = ef.DiracOperator1D(1.0, 1.0, wall, n=1024, discretization="central-difference")
sc = ef.dirac_spectrum(Dc, 8)
print("\ncentral differences, doubler flags:", sc.doubling_flags)

# band-edge model along the zigzag direction for eps = -10
lat = make_lattice(1.0)
V, _ = builtin_potentials(lat)
m = ef.effective_mass(V.scaled(-10.0), edge_frame(1, 0, lat).frak_K2, M=10)
H = ef.effective_schrodinger(m, wall)
print("\nm_eff =", m, " bound states of the tanh wall:", ef.bound_states(H))
A, wn = ef.natural_amplitude(H)
tr = ef.protection_homotopy(wall, wn, np.linspace(0, 1, 11), m)
for t, e0, b in zip(tr.thetas, tr.dirac_E0, tr.schrodinger):
    print(f"theta={t:4.1f}  Dirac |E0|={abs(e0):.1e}  Schrodinger bound states={np.round(b, 5)}")
print("bound state gone at theta* =", tr.theta_star)
