r"""
The continuum dislocation profile
=================================

The PN profile solves ``alpha phi'' / 2 = gamma'(phi)`` with phi(0) = 1/2.
Its first integral ``alpha phi'^2 / 4 = gamma(phi)`` turns it into a
quadrature, which :func:`solve_pn` evaluates with an endpoint-regularising
substitution.  For the sinusoid the answer is known in closed form.
"""

# %%
# Closed form check
# -----------------
import math

import numpy as np

from dislocore.gamma import GammaSurface
from dislocore.pn import el_residual, pn_energy, pn_stability_kappa, solve_pn, zero_mode
from dislocore.potentials import calibrated_lj, elastic_alpha, matched_gaussian

g = GammaSurface.sinusoidal(1.0, 1.0)
sol = solve_pn(g)
x = np.linspace(-5, 5, 2001)
exact = 2 / math.pi * np.arctan(np.exp(math.pi * math.sqrt(8) * x))
print(f"sup |phi - closed form| = {np.max(np.abs(sol(x) - exact)):.2e}")
print(f"energy {pn_energy(sol):.15f} vs 2 sqrt(2) / pi = {2 * math.sqrt(2) / math.pi:.15f}")
print(f"Euler-Lagrange residual on 2048 points: {el_residual(sol):.2e}")

# %%
# Translation mode and stability
# ------------------------------
# phi' spans the kernel of the second variation; pinning x = 0 removes it
# and leaves a positive coercivity constant kappa.
gz = GammaSurface.sinusoidal(1 / (8 * math.pi**2), 1.0)
solz = solve_pn(gz)
for h in (1e-2, 5e-3):
    print(f"zero-mode residual at h = {h:g}: {zero_mode(solz, h).residual:.2e}")
for N in (512, 1024):
    print(f"kappa(N = {N}) = {pn_stability_kappa(sol, N):.10f}")

# %%
# Lennard-Jones / Gaussian bilayer
# --------------------------------
V = calibrated_lj()
alpha = elastic_alpha(V).alpha
gl = GammaSurface.from_potential(matched_gaussian(alpha), alpha)
sl = solve_pn(gl)
print(f"E_PN = {pn_energy(sl):.12f}, mu = {sl.tail_rate:.6f}, kappa = {pn_stability_kappa(sl):.6f}")
