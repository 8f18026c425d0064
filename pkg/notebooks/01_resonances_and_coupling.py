# # Zero-energy resonances and the limit vertex coupling
#
# A potential squeezed into the vertex of a star graph either decouples the
# edges or leaves a nontrivial point interaction behind.  Which one happens
# is decided by the zero-energy resonances of the unscaled potential.

import math

import numpy as np

from stargraph import (PotentialSpec, ScalingLaw, StarGraph, asymptotic_smatrix, coupling_data,
                       discrete_spectrum, kirchhoff_defect_matrix, limit_smatrix, resonance_order,
                       resonant_basis)

np.set_printoptions(precision=6, suppress=True)

# ## Three edges, two tuned wells
#
# A square well of depth -(pi/2)^2 on a unit edge has the half-problem
# solution sin(pi x / 2): zero at the vertex, flat at the outer end.  Two
# such wells give one resonance.

star = StarGraph.uniform(3)
well = -(math.pi / 2) ** 2
spec = PotentialSpec.diagonal_wells([well, well, 0.0], star.support_lengths)

K = kirchhoff_defect_matrix(star, spec)
print("singular values of the defect matrix:", np.linalg.svd(K, compute_uv=False))
print("resonance order:", resonance_order(K))

# ## Coupling data
#
# The resonant function is normalised to 1 at the end of the first edge.  It
# equals -1 at the end of the second edge and 0 on the free one, and
# q = int Q psi^2 = -pi^2/4.

data = resonant_basis(star, spec)
law = ScalingLaw((1.0, 1.0))
coupling = coupling_data(data, spec, law)
print("edges (resonant first):", coupling.edges)
print("theta:", coupling.theta, " q:", coupling.q, " -pi^2/4 =", -math.pi ** 2 / 4)

# ## Energy dependence of the limit S-matrix
#
# The q term mixes values with derivatives, so S(k) depends on k.  It tends
# to -I at small k and to the scale-invariant matrix at large k.

for k in (1e-4, 0.1, 1.0, 10.0, 1e3):
    S = limit_smatrix(coupling, k).entries
    print(f"k={k:8.0e}  |S+I|={np.linalg.norm(S + np.eye(3), 2):.2e}"
          f"  |S-S_inf|={np.linalg.norm(S - asymptotic_smatrix(coupling).entries, 2):.2e}")

print("scale-invariant S:\n", asymptotic_smatrix(coupling).entries.real)

# ## Bound state
#
# With lambda' = 1 the limit operator has one negative eigenvalue at -pi^4/64.

print("spectrum:", discrete_spectrum(coupling), " -pi^4/64 =", -math.pi ** 4 / 64)
