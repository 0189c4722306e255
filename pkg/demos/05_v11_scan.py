#! /usr/bin/env python3

# Sign of V11 for potentials built from radial bumps.
# Triangular and honeycomb placements give opposite signs.
# A difference of Gaussians flips the sign as the lattice scale changes.

import numpy as np

from honeylat import potential as pt

for st in ("triangular", "honeycomb"):
    s = pt.gaussian_bump(0.15, st, 1.0)
    print(f"{st:10s}  Poisson {pt.v11_poisson(s): .10e}   quadrature {pt.v11_quadrature(s): .10e}")

a_c = pt.dog_sign_change_scale()
print("\ndifference of Gaussians, sign change near a =", a_c)
for a, p, q in pt.v11_scan(pt.dog_bump(structure="honeycomb"), np.linspace(0.8, 1.3, 6)):
    print(f"a={a:.3f}  V11 {p: .6e}  (quadrature {q: .6e})")
