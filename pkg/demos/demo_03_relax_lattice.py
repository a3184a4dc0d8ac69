r"""
Relaxing the atomistic dislocation
==================================

Sample the PN profile on the lattice ``x = eps * i``, then relax the
atomistic energy from there.  The relaxed state stays within O(eps^2) of
the sample in the X_eps norm.
"""

# %%
import math

import numpy as np

from dislocore import lattice as la
from dislocore.gamma import GammaSurface
from dislocore.pn import pn_energy, solve_pn
from dislocore.potentials import calibrated_lj, elastic_alpha, matched_gaussian

V = calibrated_lj()
alpha = elastic_alpha(V).alpha
U = matched_gaussian(alpha)
g = GammaSurface.from_potential(U, alpha)
model = la.LatticeModel(V, U)

eps = 0.05
N = math.ceil(24 / (g.tail_rate * eps))
sol = solve_pn(g, L=max(20 / g.tail_rate, eps * N))
v = la.sample_pn(sol, eps, N, model)
print(f"window N = {N}, consistency residual of the sample: {la.consistency_residual(v):.3e}")

# %%
# Newton-CG in the symmetric subspace
# -----------------------------------
rel, info = la.relax(v, mode="newton_cg", tol=1e-10)
print(f"Newton: {info.iterations} steps, |grad| history {[f'{h:.1e}' for h in info.history]}")
fp, info_fp = la.relax(v, mode="fixed_point", tol=1e-10)
print(f"fixed point: {info_fp.iterations} steps, max difference {np.max(np.abs(fp.vector() - rel.vector())):.1e}")

# %%
# Comparison with the continuum
# -----------------------------
err = la.x_eps_norm(rel.vector() - v.vector(), eps)
gap = abs(pn_energy(sol) - la.energy_a(rel))
print(f"||u - v||_X = {err:.3e}, |E_PN - E_a| = {gap:.3e}")
print(f"u_perp monotone: {bool(np.all(np.diff(rel.u_perp) >= -1e-8))}, "
      f"mirror defect {la.symmetry_defect(rel)[0]:.1e}")
