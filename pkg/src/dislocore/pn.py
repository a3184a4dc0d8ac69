"""
Peierls-Nabarro continuum model of the bilayer dislocation.

The reduced energy

    E[phi] = int 1/4 alpha phi'^2 + gamma(phi) dx,    phi(-inf) = 0, phi(inf) = 1,

is minimised by the monotone profile obeying the first integral
``phi' = sqrt(4 gamma(phi) / alpha)``.  The profile is obtained by computing
x as a function of phi and inverting, which avoids integrating a stiff
initial value problem out of the degenerate endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg

from .errors import ConvergenceError, SingularGammaError, ToleranceError

DELTA_TAIL = 1e-4
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _psi_of_t(t):
    # left-half disregistry 1/2 + 1/2 tanh t, written to keep relative accuracy as t -> -inf
    return 1.0 / (1.0 + np.exp(-2.0 * t))


class _HalfProfile:
    """x(t) on the left half of the core, tabulated on Gauss-Legendre panels."""

    def __init__(self, g, alpha, t_tail, width=0.05):
        self.g = g
        self.sqrt_alpha = math.sqrt(alpha)
        n = max(int(math.ceil(-t_tail / width)), 1)
        self.edges = np.linspace(t_tail, 0.0, n + 1)
        a, b = self.edges[:-1], self.edges[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        tn = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        panel = half * (self.h(tn) @ _GL_WEIGHTS)
        # x(0) = 0; x(edge_k) = -sum of panels k..n-1
        self.x_edges = -np.concatenate([np.cumsum(panel[::-1])[::-1], [0.0]])

    def h(self, t):
        """dx/dt = psi (1 - psi) sqrt(alpha / gamma(psi))."""
        psi = _psi_of_t(t)
        one_minus = _psi_of_t(-t)
        gam = self.g(psi)
        return psi * one_minus * self.sqrt_alpha / np.sqrt(gam)

    def x_of_t(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.edges) - 2)
        a = self.edges[k]
        half = 0.5 * (t - a)
        tn = (a + half)[..., None] + half[..., None] * _GL_NODES
        return self.x_edges[k] + half * (self.h(tn) @ _GL_WEIGHTS)

    def t_of_x(self, x, tol=1e-14, max_iter=50):
        x = np.asarray(x, dtype=float)
        t = np.interp(x, self.x_edges, self.edges)
        for _ in range(max_iter):
            r = self.x_of_t(t) - x
            step = r / self.h(t)
            t = np.clip(t - step, self.edges[0], 0.0)
            if np.all(np.abs(step) <= tol * (1.0 + np.abs(t))):
                return t
        raise ToleranceError("Newton inversion of x(phi) did not converge")


@dataclass(frozen=True, eq=False)
class PNSolution:
    """Monotone PN profile with phi(0) = 1/2.

    Evaluate with ``sol(x)`` or ``sol.deriv(k, x)``; the stored ``grid``
    arrays are a convenient sampling graded towards the core.
    """

    gamma: object
    alpha: float
    L: float
    tol: float
    tail_rate: float
    x_tail: float
    grid: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    phi_derivs: tuple = field(repr=False)
    _half: _HalfProfile = field(repr=False)
    delta_tail: float = DELTA_TAIL

    def _minor(self, x):
        """q = min(phi, 1 - phi) at x, computed on the left half."""
        xl = -np.abs(np.asarray(x, dtype=float))
        q = np.empty_like(xl)
        tail = xl < self.x_tail
        q[tail] = self.delta_tail * np.exp(self.tail_rate * (xl[tail] - self.x_tail))
        if np.any(~tail):
            q[~tail] = _psi_of_t(self._half.t_of_x(xl[~tail]))
        return q

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        q = self._minor(np.atleast_1d(x))
        out = np.where(np.atleast_1d(x) > 0, 1.0 - q, q)
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def minor(self, x):
        return self._minor(np.atleast_1d(x)).reshape(np.shape(x))

    def deriv(self, k, x):
        """phi^(k)(x) for k = 0..3 from the first integral and its derivatives."""
        if k == 0:
            return self(x)
        x = np.asarray(x, dtype=float)
        x1 = np.atleast_1d(x)
        q = self._minor(x1)
        tail = -np.abs(x1) < self.x_tail
        mu, a = self.tail_rate, self.alpha
        sgn = np.where(x1 > 0, -1.0, 1.0)
        d1 = np.where(tail, mu * q, np.sqrt(np.maximum(4.0 * self.gamma(q) / a, 0.0)))
        if k == 1:
            out = d1
        elif k == 2:
            out = sgn * np.where(tail, mu * mu * q, 2.0 / a * self.gamma.deriv(1, q))
        elif k == 3:
            out = np.where(tail, mu**3 * q, 2.0 / a * self.gamma.deriv(2, q) * d1)
        else:
            raise ValueError("derivatives of order <= 3 only")
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def displacement(self, x):
        return displacement(self, x)


def _graded_grid(L, n):
    s = np.linspace(-1.0, 1.0, n)
    c = 3.0
    return L * np.sinh(c * s) / math.sinh(c)


def _check_separable(g, n=4096):
    psi = (np.arange(1, n) / n)
    vals = g(psi)
    if np.min(vals) <= 1e-12 * np.max(np.abs(vals)):
        bad = float(psi[np.argmin(vals)])
        raise SingularGammaError(f"gamma vanishes inside (0, 1) near phi = {bad:.4g}")


def solve_pn(g, alpha=None, L=None, tol=1e-10, n_grid=2001, delta_tail=DELTA_TAIL):
    """Solve the PN model for the misfit density ``g``.

    Parameters
    ----------
    g : GammaSurface
    alpha : float, optional
        Elastic constant; defaults to ``g.alpha``.
    L : float, optional
        Half-width of the reporting domain; defaults to ``20 / mu``.
    tol : float
        Bound on the first-integral residual ``|alpha phi'^2 / 4 - gamma(phi)|``.

    Returns
    -------
    PNSolution
    """
    alpha = g.alpha if alpha is None else float(alpha)
    if alpha <= 0 or g.gamma2_at_0 <= 0:
        raise SingularGammaError("need alpha > 0 and gamma''(0) > 0")
    if tol <= 0:
        raise ValueError("tol must be positive")
    _check_separable(g)
    mu = math.sqrt(2.0 * g.gamma2_at_0 / alpha)
    L = 20.0 / mu if L is None else float(L)
    t_tail = math.atanh(2.0 * delta_tail - 1.0)
    half = _HalfProfile(g, alpha, t_tail)
    x_tail = float(half.x_edges[0])

    grid = _graded_grid(L, n_grid)
    sol = PNSolution(g, alpha, L, tol, mu, x_tail, grid, np.empty(0), (), half, delta_tail)
    phi = sol(grid)
    derivs = tuple(sol.deriv(k, grid) for k in (1, 2, 3))
    object.__setattr__(sol, "phi", phi)
    object.__setattr__(sol, "phi_derivs", derivs)

    res = first_integral_residual(sol)
    if not np.isfinite(res) or res > tol:
        raise ToleranceError(f"first-integral residual {res:.3g} exceeds tol {tol:.3g}")
    if np.min(derivs[0]) <= 0.0:
        raise ToleranceError("profile is not strictly increasing on the grid")
    return sol


def displacement(sol, x):
    """Layer displacements (phi/2, -phi/2)."""
    p = np.asarray(sol(x))
    return 0.5 * p, -0.5 * p


def first_integral_residual(sol, x=None):
    """max |alpha phi'^2 / 4 - gamma(phi)| on ``x`` (default: the solution grid)."""
    x = sol.grid if x is None else np.asarray(x, dtype=float)
    q = sol.minor(x)
    d1 = sol.deriv(1, x)
    return float(np.max(np.abs(0.25 * sol.alpha * d1**2 - sol.gamma(q))))


def pn_energy(sol, check=True):
    """E = int 1/4 alpha phi'^2 + gamma(phi) dx.

    The core is integrated in x by Gauss-Legendre panels; the exponential
    tails contribute gamma''(0) delta^2 / (2 mu) each.  When ``check`` is set
    the result is compared with ``int_0^1 sqrt(alpha gamma) dphi``.
    """
    half, g, a = sol._half, sol.gamma, sol.alpha
    e = half.edges
    lo, hi = e[:-1], e[1:]
    mid, hw = 0.5 * (lo + hi), 0.5 * (hi - lo)
    tn = mid[:, None] + hw[:, None] * _GL_NODES
    psi = _psi_of_t(tn)
    gam = g(psi)
    # 1/4 alpha phi'^2 = gamma on the exact profile; keep both terms explicit
    d1sq = 4.0 * gam / a
    integrand = (0.25 * a * d1sq + gam) * half.h(tn)
    core = math.fsum((hw[:, None] * integrand * _GL_WEIGHTS).ravel())
    tail = g.gamma2_at_0 * sol.delta_tail**2 / (2.0 * sol.tail_rate)
    energy = 2.0 * (core + tail)
    if check:
        ref = equipartition_energy(g, a)
        if abs(energy - ref) > 10 * sol.tol * max(1.0, abs(ref)):
            raise ToleranceError(f"energy {energy:.15g} disagrees with {ref:.15g}")
    return energy


def equipartition_energy(g, alpha):
    """int_0^1 sqrt(alpha gamma(phi)) dphi."""
    f = lambda p: math.sqrt(max(alpha * float(g(p)), 0.0))
    val, _ = integrate.quad(f, 0.0, 0.5, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2.0 * val


# --- Euler-Lagrange residual --------------------------------------------------

_FD2 = {
    2: (np.array([1.0, -2.0, 1.0]), 1),
    4: (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0, 2),
    6: (np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0, 3),
}


def second_difference(y, h, order=4):
    """Centered second derivative on the interior points of a uniform grid."""
    w, r = _FD2[order]
    n = len(y)
    out = np.zeros(n - 2 * r)
    for j, c in enumerate(w):
        out += c * y[j : n - 2 * r + j]
    return out / (h * h)


def el_residual_profile(phi, x, g, alpha, order=6):
    """sup |-alpha phi''/2 + gamma'(phi)| on the interior of a uniform grid ``x``."""
    phi = np.asarray(phi, dtype=float)
    h = float(x[1] - x[0])
    r = _FD2[order][1]
    d2 = second_difference(phi, h, order)
    res = -0.5 * alpha * d2 + g.deriv(1, phi[r:-r])
    return float(np.max(np.abs(res)))


def el_residual(sol, n=2048, order=6, L=None):
    """Euler-Lagrange residual of the computed profile on ``n`` uniform points."""
    L = sol.L if L is None else L
    x = np.linspace(-L, L, n)
    return el_residual_profile(sol(x), x, sol.gamma, sol.alpha, order)


def ramp_profile(x):
    """The affine comparison profile min(max(x + 1/2, 0), 1)."""
    return np.clip(np.asarray(x, dtype=float) + 0.5, 0.0, 1.0)


# --- second variation ----------------------------------------------------------

def apply_second_variation(sol, x, f_plus, f_minus):
    """(-alpha f+'' + gamma''(phi) f_perp, -alpha f-'' - gamma''(phi) f_perp).

    Second-order differences on the interior of the uniform grid ``x``.
    """
    h = float(x[1] - x[0])
    g2 = sol.gamma.deriv(2, sol.minor(x[1:-1]))
    fp = f_plus[1:-1] - f_minus[1:-1]
    lap_p = second_difference(f_plus, h, 2)
    lap_m = second_difference(f_minus, h, 2)
    return -sol.alpha * lap_p + g2 * fp, -sol.alpha * lap_m - g2 * fp


@dataclass
class ZeroModeResult:
    x: np.ndarray
    f_plus: np.ndarray
    f_minus: np.ndarray
    residual: float
    h: float


def zero_mode(sol, h=1e-2, L=None):
    """Translation mode f = (phi'/2, -phi'/2) and its discrete second-variation residual.

    ``residual`` is ``||delta^2 E f|| / ||alpha f''||`` on the interior nodes,
    which is O(h^2) for the centered stencil.
    """
    L = sol.L if L is None else L
    n = int(round(2 * L / h))
    x = np.linspace(-L, L, n + 1)
    d1 = sol.deriv(1, x)
    fp, fm = 0.5 * d1, -0.5 * d1
    rp, rm = apply_second_variation(sol, x, fp, fm)
    h_ = float(x[1] - x[0])
    scale = sol.alpha * math.hypot(np.linalg.norm(second_difference(fp, h_, 2)),
                                   np.linalg.norm(second_difference(fm, h_, 2)))
    res = float(np.hypot(np.linalg.norm(rp), np.linalg.norm(rm)) / scale)
    return ZeroModeResult(x, fp, fm, res, float(x[1] - x[0]))


def _p1_matrices(x):
    """P1 stiffness and lumped mass on a 1D grid with natural ends."""
    h = np.diff(x)
    n = len(x)
    K = np.zeros((n, n))
    idx = np.arange(n - 1)
    K[idx, idx] += 1.0 / h
    K[idx + 1, idx + 1] += 1.0 / h
    K[idx, idx + 1] -= 1.0 / h
    K[idx + 1, idx] -= 1.0 / h
    m = np.zeros(n)
    m[:-1] += 0.5 * h
    m[1:] += 0.5 * h
    return K, m


def second_variation_matrices(sol, N=512, L=None, pin="center"):
    """Form and X_0 Gram matrices of the PN second variation.

    Unknowns are nodal (f+, f-) on ``N`` uniform intervals of [-L, L].
    ``pin='center'`` removes the x = 0 node of both layers; ``pin='left'``
    removes x = -L instead, which excludes constants but keeps the
    translation mode.
    """
    if N % 2:
        raise ValueError("N must be even so that x = 0 is a node")
    L = sol.L if L is None else L
    x = np.linspace(-L, L, N + 1)
    K, m = _p1_matrices(x)
    g2 = sol.gamma.deriv(2, sol.minor(x))
    n = N + 1
    Mp = np.diag(m)
    Mg = np.diag(m * g2)
    A = np.block([[sol.alpha * K + Mg, -Mg], [-Mg, sol.alpha * K + Mg]])
    G = np.block([[K + Mp, -Mp], [-Mp, K + Mp]])
    drop = N // 2 if pin == "center" else 0
    if pin not in ("center", "left"):
        raise ValueError("pin must be 'center' or 'left'")
    keep = np.ones(2 * n, dtype=bool)
    keep[[drop, n + drop]] = False
    return A[np.ix_(keep, keep)], G[np.ix_(keep, keep)], x


def pn_stability_kappa(sol, N=512, L=None, pin="center", return_vector=False):
    """Smallest generalised eigenvalue of (second variation, X_0 Gram)."""
    A, G, x = second_variation_matrices(sol, N, L, pin)
    try:
        w, v = linalg.eigh(A, G, subset_by_index=[0, 0])
    except (linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"PN eigensolve failed: {exc}") from exc
    if return_vector:
        return float(w[0]), v[:, 0], x
    return float(w[0])
