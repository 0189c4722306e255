#! /usr/bin/env python3

# Dual slices E_b(K + lambda K2) and the spectral no-fold test.
# Zigzag passes for eps > 0 and fails for eps < 0 (V11 > 0 here).
# Armchair always fails: K - K2/3 is the other Dirac point.

import numpy as np

from honeylat import bloch
from honeylat import slice as sl
from honeylat.geometry import edge_frame, make_lattice
from honeylat.potential import builtin_potentials

lat = make_lattice(1.0)
V, W = builtin_potentials(lat)
zz, ac = edge_frame(1, 0, lat), edge_frame(1, 1, lat)

lam = np.linspace(-0.5, 0.5, 11)
curves = sl.dispersion_slice(V.scaled(0.2), zz, lam, n_bands=3, M=6)
print("lambda     E1        E2        E3")
for i, l in enumerate(lam):
    print(f"{l:6.2f}  " + "  ".join(f"{c.energies[i]:8.4f}" for c in curves))

for eps in (0.2, -0.2):
    dp = bloch.find_dirac_point(V, 6, eps=eps)
    r = sl.no_fold_check(V.scaled(eps), zz, dp, M=6)
    print(f"\nzigzag eps={eps:+.1f}: passed={r.passed}  witness={r.witness_lambda}  c1={r.c1:.4g}")

# where does the fold cross E_star for eps < 0?  reduced 3x3 model vs full slice
rc = sl.regime_constants(V, -0.2)
root = sl.find_fold_crossing(-0.2, 0.0, V, W)
dm = bloch.find_dirac_point(V, 6, eps=-0.2)
full = sl.slice_crossing(V.scaled(-0.2), dm, zz.frak_K2, rc["lam_lo"], rc["lam_hi"], M=6)
print(f"fold crossing: reduced model {root:.8f}, full slice {full:.8f}")

dp = bloch.find_dirac_point(V, 6, eps=0.2)
ra = sl.no_fold_check(V.scaled(0.2), ac, dp, M=6)
print("\narmchair eps=+0.2: passed =", ra.passed, " witnesses", np.round(ra.details["witnesses"], 6))
