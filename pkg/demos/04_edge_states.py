#! /usr/bin/env python3

# Edge states along a zigzag domain wall.
# Takes a few minutes and about 1.5 GB.
#
# At eps = 0.5 the states are long (decay length ~ 1/(0.0047 delta) units), so the
# supercell runs to thousands of cells and the finite-difference back end is used.

import math

from honeylat import bloch, edge, effective
from honeylat.geometry import edge_frame, make_lattice
from honeylat.potential import builtin_potentials, make_wall

lat = make_lattice(1.0)
V, W = builtin_potentials(lat)
zz = edge_frame(1, 0, lat)
eps = 0.5

dp = bloch.find_dirac_point(V, 8, eps=eps)
bloch.lambda_sharp(dp)
e2w = effective.e2_coefficient(dp, W, make_wall("tanh"), zz.frak_K2).value
e2a = effective.e2_coefficient(dp, W.scaled(-1), make_wall("tanh"), zz.frak_K2).value
print(f"E2 wall {e2w:.5f}   E2 antiwall {e2a:.5f}")

# delta = 0 first: the supercell must reproduce the bulk bands block by block
print("decoupling error:", edge.decoupling_check(V, edge.SupercellConfig(edge=zz, N=8, M1=3, eps=eps)))

print("\ndelta     N     (E-E*)/d^2 wall  antiwall   decay rate  predicted  defect")
for d in (0.0625, 0.0442):
    cfg = edge.SupercellConfig(edge=zz, N=math.ceil(140 / d), M1=2, eps=eps, delta=d, method="fd")
    Er = edge.reference_energy(V, cfg, dp.E_star)
    op = edge.assemble_edge(V, W, cfg)
    wall, anti = edge.doublet(edge.solve_near(op, Er, 4))
    rep = edge.compare_multiscale(op, wall, dp, W)
    print(f"{d:.4f}  {cfg.N:5d}   {(wall.E - Er) / d**2:9.5f}   {(anti.E - Er) / d**2:9.5f}"
          f"   {wall.decay_rate:.6f}   {rep.predicted_rate:.6f}  {rep.defect:.2e}")

# k_par sweep at eps = 10: the picture is mirror symmetric about pi
cfg = edge.SupercellConfig(edge=zz, N=400, M1=5, eps=10.0, delta=0.4, method="fd")
ks = [2 * math.pi / 3 + x for x in (-0.05, 0.0, 0.05)]
sw = edge.sweep_kpar(V, W, zz, 10.0, 0.4, ks + [2 * math.pi - k for k in ks], cfg, n_eigs=4)
print("\nk_par     wall branch E")
for k, e in zip(sw.values, sw.branch("wall")):
    print(f"{k:.4f}   {e:.8f}")
