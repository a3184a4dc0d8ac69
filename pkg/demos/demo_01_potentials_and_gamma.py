r"""
Potentials and the misfit energy
================================

A bilayer is described by an intra-layer pair potential ``V`` and an
inter-layer potential ``U``.  This script calibrates a Lennard-Jones chain
so that unit spacing is its equilibrium, computes the elastic constant
alpha, builds the misfit density gamma from ``U`` and evaluates the small
parameter for a fitted graphene bilayer surface.
"""

# %%
# Calibrated Lennard-Jones chain
# ------------------------------
# ``calibrated_lj`` picks r0 so that sum_k k V'(k) = 0, using zeta values.
import numpy as np

from dislocore.gamma import GammaSurface, graphene_epsilon, validate_gamma
from dislocore.potentials import calibrated_lj, elastic_alpha, matched_gaussian, verify_decay

V = calibrated_lj(6, 12)
print(f"r0 = {V.r0:.16f}")
res = elastic_alpha(V)
print(f"alpha = {res.alpha:.12f}  (truncation bound {res.tail:.1e}, extrapolated {res.extrapolated:.12f})")
print("decay assumptions hold:", verify_decay(V, "intra").passed)

# %%
# Misfit density from a Gaussian inter-layer potential
# ----------------------------------------------------
# ``matched_gaussian`` scales the amplitude so that gamma''(0) = alpha,
# i.e. the rescaled model has a^2 gamma''(0) / alpha = 1.
U = matched_gaussian(res.alpha, width=0.5)
g = GammaSurface.from_potential(U, res.alpha)
print(f"gamma''(0) = {g.gamma2_at_0:.10f}, tail rate mu = {g.tail_rate:.10f}")
for phi in (0.1, 0.25, 0.5):
    print(f"gamma({phi}) = {g(phi):.10f}")

rep = validate_gamma(g)
print(f"periodicity {rep.periodicity:.1e}, symmetry {rep.symmetry:.1e}, convex radius c0 = {rep.c0:.3f}")

# %%
# Fitted graphene bilayer
# -----------------------
# The hexagonal six-coefficient fit gives eps = sqrt(a^2 gamma_phiphi(0,0) / C11).
print(f"eps from the fitted bilayer surface: {graphene_epsilon():.6f}")
