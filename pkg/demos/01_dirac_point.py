#! /usr/bin/env python3

# Bands of the builtin honeycomb potential and its Dirac point.
# Run from anywhere once honeylat is installed:
# $ python3 demos/01_dirac_point.py

import numpy as np

from honeylat import bloch
from honeylat.geometry import make_lattice
from honeylat.potential import builtin_potentials

lat = make_lattice(1.0)
V, W = builtin_potentials(lat)
eps = 10.0

# Lowest bands along Gamma -> K -> M -> Gamma
G, K, Mp = np.zeros(2), lat.K, lat.k1 / 2
path = [G + s * (K - G) for s in np.linspace(0, 1, 8)]
path += [K + s * (Mp - K) for s in np.linspace(0, 1, 5)[1:]]
path += [Mp + s * (G - Mp) for s in np.linspace(0, 1, 7)[1:]]
print("|k|        E1        E2        E3")
for k in path:
    E = bloch.bands_at(V.scaled(eps), k, 6, 3)
    print(f"{np.linalg.norm(k):7.4f}  " + "  ".join(f"{e:8.4f}" for e in E))

# Dirac point from the tau / taubar sector split at K
dp = bloch.find_dirac_point(V, M=10, eps=eps)
print("\nE_star =", dp.E_star, " b_star =", dp.b_star, " E_tilde =", dp.E_tilde)

# cone slope from finite differences, and the Fourier-sum formula
slope, lam, per_dir = bloch.lambda_sharp(dp)
print("cone slope", slope, " |Fourier sum|", abs(lam), " anisotropy", dp.cone["anisotropy"])

# W opens the gap at rate theta_sharp
print("theta_sharp =", bloch.theta_sharp(dp, W))

# Flip the sign of the potential: the Dirac pair moves up to bands 2,3
dm = bloch.find_dirac_point(V, M=10, eps=-eps)
print("eps = -10: E_star =", dm.E_star, " b_star =", dm.b_star)

# weak potential: the slope approaches |K|
for e in (0.04, 0.02, 0.01):
    d = bloch.find_dirac_point(V, M=6, eps=e)
    print(f"eps={e:5.2f}  slope={bloch.lambda_sharp(d)[0]:.7f}   |K|={np.linalg.norm(lat.K):.7f}")
