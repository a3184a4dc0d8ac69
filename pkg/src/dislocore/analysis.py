"""
Stability gap, stability spectra and atomistic-to-continuum convergence studies.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg, optimize, stats
from scipy.sparse import linalg as spla

from . import lattice as la
from .errors import ConvergenceError, DislocoreError
from .gamma import GammaSurface
from .pn import pn_energy, pn_stability_kappa, solve_pn
from .potentials import elastic_alpha

# --- stability gap ---------------------------------------------------------------


@dataclass
class GapReport:
    delta: float
    raw: float
    k_star: float
    method: str
    s_max: int
    circulant: float | None = None
    ring: int | None = None

    def to_dict(self):
        return asdict(self)


def _block_symbol(s, k):
    """|sum_{j<s} e^{ijk}|^2 = sin^2(sk/2) / sin^2(k/2)."""
    return (np.sin(0.5 * s * k) / np.sin(0.5 * k)) ** 2


def gap_symbol(V, k, s_max=None):
    """Symbol of (PN elastic form - atomistic elastic form) per unit ||Df||_eps^2.

    sigma(k) = sum_{s>=2} V''(s) [s^2 - sin^2(sk/2) / sin^2(k/2)].
    """
    S = V.s_max if s_max is None else int(s_max)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    out = np.zeros_like(k)
    for s in range(S, 1, -1):
        out += float(V.deriv(2, float(s))) * (s * s - _block_symbol(s, k))
    return out


def circulant_gap_matrix(V, n=512, s_max=None):
    """sum_s V''(s) (s^2 I - B_s^T B_s) on a ring, with B_s = sum_{j<s} shift^j."""
    S = V.s_max if s_max is None else int(s_max)
    A = np.zeros((n, n))
    eye = np.eye(n)
    for s in range(2, S + 1):
        B = np.zeros((n, n))
        for j in range(s):
            B += np.roll(eye, j, axis=1)
        A += float(V.deriv(2, float(s))) * (s * s * eye - B.T @ B)
    return A


def delta_gap(V, n_k=4096, s_max=None, ring=512, cross_check=True):
    """Stability gap Delta = max(0, sup_k sigma(k)) for the intra-layer potential ``V``."""
    S = V.s_max if s_max is None else int(s_max)
    k = 2 * np.pi * np.arange(1, n_k) / n_k
    sig = gap_symbol(V, k, S)
    j = int(np.argmax(sig))
    k_star, raw = float(k[j]), float(sig[j])
    if S >= 2:
        lo, hi = k[max(j - 1, 0)], k[min(j + 1, len(k) - 1)]
        res = optimize.minimize_scalar(lambda t: -gap_symbol(V, t, S)[0], bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-12})
        if -res.fun > raw:
            k_star, raw = float(res.x), float(-res.fun)
    rep = GapReport(delta=max(0.0, raw), raw=raw, k_star=k_star, method="fourier", s_max=S)
    if cross_check:
        w = linalg.eigvalsh(circulant_gap_matrix(V, ring, S))
        rep.circulant = max(0.0, float(w[-1]))
        rep.ring = ring
    return rep


# --- stability spectra ---------------------------------------------------------


@dataclass
class StabilityReport:
    lambda_min_atom: float
    residual: float
    eps: float
    N: int
    pinned: bool
    lambda_min_pn: float | None = None
    grid_size: int | None = None

    def to_dict(self):
        return asdict(self)


def atom_stability(st, pin=True, sigma=None):
    """Smallest generalised eigenvalue of (Hessian, X_eps Gram) by shift-invert Lanczos.

    With ``pin`` the centre atom of both layers is removed from the unknowns;
    otherwise every window atom is free.
    """
    n = 2 * st.N + 1
    H = la.hessian_a(st, pin=False)
    G = la.gram_matrix(st.N, st.eps, pin=False)
    if pin:
        keep = np.setdiff1d(np.arange(2 * n), [st.N, n + st.N])
        H = H[keep][:, keep]
        G = G[keep][:, keep]
    sigma = -0.1 * st.model.alpha if sigma is None else sigma
    try:
        w, v = spla.eigsh(H.tocsc(), k=1, M=G.tocsc(), sigma=sigma, which="LM",
                          maxiter=200, tol=1e-12)
    except (spla.ArpackNoConvergence, RuntimeError) as exc:
        raise ConvergenceError(f"Lanczos failed: {exc}") from exc
    lam, f = float(w[0]), v[:, 0]
    r = H @ f - lam * (G @ f)
    res = float(np.linalg.norm(r) / max(np.linalg.norm(f), 1e-300))
    return StabilityReport(lam, res, st.eps, st.N, pin)


# --- convergence study -----------------------------------------------------------


@dataclass
class StudyConfig:
    """Everything a sweep needs besides the list of eps values."""

    V: object
    U: object
    grid_size: int = 1024
    pn_tol: float = 1e-10
    pn_L: float | None = None
    mode: str = "newton_cg"
    tol: float = 1e-8
    max_iter: int = 100
    window_factor: float = 24.0
    N: int | None = None
    symmetric: bool = True
    stability: bool = True
    kappa_grid: int = 512
    seed: int = 0
    jobs: int = 1

    @property
    def model(self):
        return la.LatticeModel(self.V, self.U)

    def gamma_surface(self):
        alpha = elastic_alpha(self.V).alpha
        return GammaSurface.from_potential(self.U, alpha, grid_size=self.grid_size)

    def window(self, eps, mu):
        if self.N is not None:
            return int(self.N)
        return max(int(math.ceil(self.window_factor / (mu * eps))), self.model.s_max)


@dataclass
class SweepRow:
    eps: float
    N: int
    x_err: float = float("nan")
    e_gap: float = float("nan")
    consist: float = float("nan")
    iterations: int = 0
    grad_norm: float = float("nan")
    lambda_atom: float = float("nan")
    lambda_atom_unpinned: float = float("nan")
    ok: bool = True
    message: str = ""


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    ci95: tuple
    r2: float
    n: int


def loglog_slope(x, y):
    """Least-squares slope of log y against log x with a 95% interval and R^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    good = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    lx, ly = np.log(x[good]), np.log(y[good])
    n = int(good.sum())
    if n < 2:
        return SlopeFit(float("nan"), float("nan"), (float("nan"), float("nan")), float("nan"), n)
    fit = stats.linregress(lx, ly)
    if n > 2:
        half = float(stats.t.ppf(0.975, n - 2) * fit.stderr)
    else:
        half = float("inf")
    return SlopeFit(float(fit.slope), float(fit.intercept),
                    (float(fit.slope) - half, float(fit.slope) + half), float(fit.rvalue**2), n)


@dataclass
class ConvergenceTable:
    rows: list
    slopes: dict = field(default_factory=dict)
    kappa: float | None = None

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def fit(self):
        e = self.column("eps")
        self.slopes = {c: loglog_slope(e, self.column(c)) for c in ("x_err", "e_gap", "consist")}
        return self


def _pn_for(cfg, g, eps, N):
    mu = g.tail_rate
    L = cfg.pn_L if cfg.pn_L is not None else 20.0 / mu
    return solve_pn(g, L=max(L, eps * N), tol=cfg.pn_tol)


def sweep_row(eps, cfg, g=None, model=None):
    """One row of the convergence table; solver failures are recorded, not raised."""
    g = cfg.gamma_surface() if g is None else g
    model = cfg.model if model is None else model
    N = cfg.window(eps, g.tail_rate)
    row = SweepRow(eps=float(eps), N=N)
    try:
        sol = _pn_for(cfg, g, eps, N)
        v = la.sample_pn(sol, eps, N, model)
        row.consist = la.consistency_residual(v, symmetric=cfg.symmetric)
        rel, info = la.relax(v, mode=cfg.mode, tol=cfg.tol, max_iter=cfg.max_iter,
                             symmetric=cfg.symmetric)
        row.iterations, row.grad_norm = info.iterations, info.grad_norm
        row.x_err = la.x_eps_norm(rel.vector() - v.vector(), eps)
        row.e_gap = abs(pn_energy(sol) - la.energy_a(rel))
        if cfg.stability:
            row.lambda_atom = atom_stability(rel, pin=True).lambda_min_atom
            row.lambda_atom_unpinned = atom_stability(rel, pin=False).lambda_min_atom
    except DislocoreError as exc:
        row.ok = False
        row.message = f"{type(exc).__name__}: {exc}"
    return row


def _jobs(cfg_jobs):
    env = os.environ.get("DISLOCORE_THREADS")
    if cfg_jobs and cfg_jobs > 1:
        return int(cfg_jobs)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return 1


def convergence_sweep(eps_list, cfg):
    """Relax the sampled PN dislocation for every eps and tabulate the errors.

    Rows are computed independently (optionally in a thread pool) and
    returned in the order of ``eps_list``.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    g = cfg.gamma_surface()
    model = cfg.model
    jobs = _jobs(cfg.jobs)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(lambda e: sweep_row(e, cfg, g, model), eps_list))
    else:
        rows = [sweep_row(e, cfg, g, model) for e in eps_list]
    table = ConvergenceTable(rows)
    if cfg.stability:
        sol = solve_pn(g, tol=cfg.pn_tol)
        table.kappa = pn_stability_kappa(sol, cfg.kappa_grid)
    return table.fit()


# --- stability gap drift -----------------------------------------------------------

_GQ_NODES, _GQ_WEIGHTS = np.polynomial.legendre.leggauss(4)


def random_fields(eps, N, n_fields, mu, seed=0, center=0.0, degree=3):
    """Smooth random X_eps fields, zero at i = 0, normalised to unit X_eps norm.

    Each layer is a bump ``(x - c)/w exp(-((x - c)/w)^2)`` times a random
    trigonometric polynomial of the given degree, with ``w = 2 / mu``.
    """
    rng = np.random.default_rng(seed)
    x = eps * np.arange(-N, N + 1)
    w = 2.0 / mu
    z = (x - center) / w
    bump = z * np.exp(-z * z)
    kk = np.arange(degree + 1)
    out = []
    for _ in range(n_fields):
        f = []
        for _layer in range(2):
            a = rng.standard_normal(degree + 1)
            b = rng.standard_normal(degree + 1)
            poly = np.cos(np.outer(z, kk)) @ a + np.sin(np.outer(z, kk)) @ b
            f.append(bump * poly)
        f = np.concatenate(f)
        f[N] = 0.0
        f[2 * N + 1 + N] = 0.0
        out.append(f / la.x_eps_norm(f, eps))
    return out


def _pn_jump_difference(sol, g, eps, N, f):
    """int (gamma''(phi) - gamma''(0)) fbar_perp^2 over the linear interpolant of f."""
    n = 2 * N + 1
    perp = f[:n] - f[n:]
    x = eps * np.arange(-N, N + 1)
    a, b = x[:-1], x[1:]
    t = 0.5 * (_GQ_NODES + 1.0)
    xq = a[:, None] + eps * t[None, :]
    fq = perp[:-1, None] * (1 - t) + perp[1:, None] * t
    dg = g.deriv(2, sol.minor(xq.ravel())).reshape(xq.shape) - g.gamma2_at_0
    return float(np.sum(0.5 * eps * (dg * fq * fq) @ _GQ_WEIGHTS))


def stability_gap_drift(eps_list, cfg, n_fields=20, center=0.0):
    """[<H_a(v) f, f> - <H_PN(v) f, f>] - [<H_a(0) f, f> - <H_PN(0) f, f>] for random f.

    The elastic parts of the two PN forms cancel, leaving the atomistic
    difference minus int (gamma''(phi) - gamma''(0)) fbar_perp^2.
    Returns a list of dicts with the max and mean |drift| per eps and the
    fitted slope.
    """
    g = cfg.gamma_surface()
    model = cfg.model
    out = []
    for eps in eps_list:
        N = cfg.window(eps, g.tail_rate)
        sol = _pn_for(cfg, g, eps, N)
        v = la.sample_pn(sol, eps, N, model)
        zero = la.perfect_state(model, eps, N)
        Hv = la.hessian_a(v, pin=False)
        H0 = la.hessian_a(zero, pin=False)
        drifts = []
        for f in random_fields(eps, N, n_fields, g.tail_rate, cfg.seed, center):
            atom = float(f @ (Hv @ f) - f @ (H0 @ f))
            drifts.append(atom - _pn_jump_difference(sol, g, eps, N, f))
        d = np.abs(drifts)
        out.append({"eps": float(eps), "max": float(d.max()), "mean": float(d.mean()),
                    "drifts": [float(x) for x in drifts]})
    fit = loglog_slope([r["eps"] for r in out], [r["max"] for r in out])
    return out, fit
