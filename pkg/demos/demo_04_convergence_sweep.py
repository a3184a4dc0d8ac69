r"""
Convergence rates
=================

Repeat the relaxation for a decreasing sequence of eps and fit a log-log
slope to every error column of the table.  Each one decays like eps^2.
"""

# %%
from dislocore.analysis import StudyConfig, convergence_sweep
from dislocore.potentials import calibrated_lj, elastic_alpha, matched_gaussian

V = calibrated_lj()
U = matched_gaussian(elastic_alpha(V).alpha)
cfg = StudyConfig(V, U)
table = convergence_sweep([0.1, 0.05, 0.025, 0.0125], cfg)

print(f"{'eps':>8} {'x_err':>11} {'e_gap':>11} {'consist':>11} {'lambda':>8}")
for r in table.rows:
    print(f"{r.eps:8g} {r.x_err:11.3e} {r.e_gap:11.3e} {r.consist:11.3e} {r.lambda_atom:8.4f}")

# %%
for name, fit in table.slopes.items():
    print(f"{name:8s} slope {fit.slope:.3f}  95% CI ({fit.ci95[0]:.3f}, {fit.ci95[1]:.3f})  R^2 {fit.r2:.6f}")
print(f"PN coercivity kappa = {table.kappa:.5f}")
