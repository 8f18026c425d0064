# # Convergence of the scattering matrix
#
# For each eps the exact S-matrix of the scaled operator comes from a 2n x 2n
# amplitude system.  Here we compare it with the limit.

import math

import numpy as np

from stargraph import (PotentialSpec, ScalingLaw, StarGraph, coupling_data, eps_smatrix,
                       limit_smatrix, resonant_basis)
from stargraph.scattering import det_ratio, rho_constant

star = StarGraph.uniform(3)
well = -(math.pi / 2) ** 2
tuned = PotentialSpec.diagonal_wells([well, well, 0.0], star.support_lengths)
untuned = PotentialSpec.diagonal_wells([-1.0, 1.5, -0.5], star.support_lengths)
law = ScalingLaw()
eps_grid = [2.0 ** -p for p in range(1, 11)]

# ## Resonant potential: a nontrivial limit

for k in (0.5, 1.0, 2.0):
    S_lim = limit_smatrix(coupling_data(resonant_basis(star, tuned), tuned, law), k).entries
    gaps = [np.linalg.norm(eps_smatrix(star, tuned, law, e, k).entries - S_lim, 2) for e in eps_grid]
    print(f"k={k}: gap/eps =", np.round(np.array(gaps) / eps_grid, 3))

# The gap over eps levels off, so convergence is first order in eps.  For
# lambda = 1 the gap depends on k and eps only through k * eps, so larger
# momenta need proportionally smaller eps.

# ## Generic potential: the vertex becomes opaque

gaps = [np.linalg.norm(eps_smatrix(star, untuned, law, e, 1.0).entries + np.eye(3), 2)
        for e in eps_grid]
print("untuned |S + I|:", np.array(gaps))

# ## Determinant asymptotics
#
# det A_eps / (eps^m det A) tends to a constant computed from the eps = 0
# normalised fundamental system.

for name, spec in (("tuned", tuned), ("untuned", untuned)):
    data = resonant_basis(star, spec)
    rho = rho_constant(star, spec, data)
    ratios = [det_ratio(star, spec, law, e, 1.0, data) for e in (2.0 ** -4, 2.0 ** -8, 2.0 ** -12)]
    print(name, "rho =", round(rho, 6), "ratios:", np.round(ratios, 6))
