"""
Rescaled atomistic model of the bilayer on a finite window.

Atoms ``i`` in ``[-N, N]`` are free (except the pinned centre ``i = 0``);
atoms outside are frozen at the far-field values ``(0, 0)`` on the left and
``(1/2, -1/2)`` on the right.  With ``x = eps * i`` the energy is

    E_a = 1/eps sum_i sum_{s>=1} [V(s + u+_{i+s} - u+_i) + V(s + u-_{i+s} - u-_i) - 2 V(s)]
        + eps   sum_i sum_{|s|<=S} [U(s - 1/2 + u+_{i+s} - u-_i) - U(s - 1/2)].

Terms are summed over every ``i`` that touches an active atom; a row ``i``
lying entirely in a frozen region contributes zero (the inter-layer row
telescopes).  In the slipped far field the inter-layer double sum is only
conditionally convergent, so its value depends on how bonds are grouped.
:func:`energy_a` groups bonds by midpoint by default and can also sum row
by row; the two differ by the constant :func:`ordering_offset`.

Vectors passed to and returned from :func:`grad_a` and :func:`hess_vec_a`
have length ``2 (2N + 1)``: the + layer followed by the - layer, window
indices ``-N..N``.  Entries belonging to the pinned atom are zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import ConvergenceError, DomainError, NonPositiveCurvatureError, WindowError
from .potentials import elastic_alpha, lattice_sum


@dataclass(frozen=True, eq=False)
class LatticeModel:
    """Intra-layer potential ``V``, inter-layer potential ``U`` and their cutoffs."""

    V: object
    U: object
    s_intra: int | None = None
    s_inter: int | None = None

    def __post_init__(self):
        if self.s_intra is None:
            object.__setattr__(self, "s_intra", int(self.V.s_max))
        if self.s_inter is None:
            object.__setattr__(self, "s_inter", int(self.U.s_max))

    @property
    def s_max(self):
        return max(self.s_intra, self.s_inter)

    @property
    def alpha(self):
        return elastic_alpha(self.V, self.s_intra).alpha

    def inter_offsets(self):
        s = np.arange(-self.s_inter, self.s_inter + 1, dtype=float)
        return s - 0.5


@dataclass(frozen=True, eq=False)
class LatticeState:
    """Displacements on the window ``[-N, N]`` with frozen far field."""

    model: LatticeModel
    eps: float
    N: int
    u_plus: np.ndarray
    u_minus: np.ndarray
    clamp_left: tuple = (0.0, 0.0)
    clamp_right: tuple = (0.5, -0.5)

    def __post_init__(self):
        if not 0.0 < self.eps:
            raise DomainError("eps must be positive")
        if self.model.s_max > self.N:
            raise WindowError(f"cutoff {self.model.s_max} exceeds window half-width {self.N}")
        n = 2 * self.N + 1
        up = np.array(self.u_plus, dtype=float)
        um = np.array(self.u_minus, dtype=float)
        if up.shape != (n,) or um.shape != (n,):
            raise ValueError(f"displacement arrays must have length {n}")
        object.__setattr__(self, "u_plus", up)
        object.__setattr__(self, "u_minus", um)

    @property
    def index(self):
        return np.arange(-self.N, self.N + 1)

    @property
    def x(self):
        return self.eps * self.index

    @property
    def u_perp(self):
        return self.u_plus - self.u_minus

    @property
    def pad(self):
        return 2 * self.model.s_max

    def padded(self):
        """(u+, u-) on indices ``-N-P .. N+P`` with ``P = 2 s_max``."""
        P = self.pad
        lp, lm = self.clamp_left
        rp, rm = self.clamp_right
        up = np.concatenate([np.full(P, lp), self.u_plus, np.full(P, rp)])
        um = np.concatenate([np.full(P, lm), self.u_minus, np.full(P, rm)])
        return up, um

    def with_displacements(self, u_plus, u_minus):
        return replace(self, u_plus=np.asarray(u_plus, float), u_minus=np.asarray(u_minus, float))

    def vector(self):
        return np.concatenate([self.u_plus, self.u_minus])

    def with_vector(self, u):
        n = 2 * self.N + 1
        return self.with_displacements(u[:n], u[n:])


def perfect_state(model, eps, N, shift=0.0):
    """Defect-free lattice: both layers displaced by ``shift`` everywhere."""
    n = 2 * N + 1
    c = (shift, shift)
    return LatticeState(model, eps, N, np.full(n, shift), np.full(n, shift), c, c)


def sample_pn(sol, eps, N, model):
    """Lattice state u_i = v(eps i) sampled from a PN profile."""
    if eps * N > sol.L * (1 + 1e-12):
        raise DomainError(f"eps*N = {eps * N:g} exceeds the PN domain half-width {sol.L:g}")
    x = eps * np.arange(-N, N + 1)
    phi = np.asarray(sol(x), dtype=float)
    phi[N] = 0.5
    return LatticeState(model, eps, N, 0.5 * phi, -0.5 * phi)


# --- energy and variations ----------------------------------------------------

def _intra_diffs(w, s, lo, hi):
    # u_{i+s} - u_i for padded positions lo..hi-1
    return w[lo + s : hi + s] - w[lo:hi]


def _ranges(st):
    """Padded positions of the summation range i in [-N-S, N+S]."""
    S = st.model.s_max
    P = st.pad
    lo = P - st.N - S + st.N  # = P - S
    hi = P + 2 * st.N + 1 + S
    return lo, hi


def ordering_offset(st):
    """Energy difference between bond-midpoint and lower-layer-row summation.

    In a slipped far field the inter-layer terms ``(i, s)`` do not decay in
    ``i`` individually, so the double sum depends on how bonds are grouped.
    Grouping by bond midpoint instead of by lower-layer atom adds
    ``-eps/2 sum_s s a_s`` per far field, with ``a_s`` the far-field bond term.
    The offset is the same for every admissible state.
    """
    m = st.model
    off = m.inter_offsets()
    s = off + 0.5
    total = 0.0
    for sign, (cp, cm) in ((1.0, st.clamp_right), (-1.0, st.clamp_left)):
        a = m.U.deriv(0, off + (cp - cm)) - m.U.deriv(0, off)
        total += sign * lattice_sum(-0.5 * s * a)
    return st.eps * total


def energy_a(st, ordering="midpoint"):
    """Total rescaled atomistic energy (see module docstring).

    Parameters
    ----------
    ordering : {'midpoint', 'row'}
        How the conditionally convergent inter-layer double sum is grouped.
        ``'row'`` sums over lower-layer atoms ``i`` first, as the formula is
        written; ``'midpoint'`` assigns each bond to its centre, which is
        invariant under exchanging the layers.  The two differ by the
        constant :func:`ordering_offset`.
    """
    if ordering not in ("midpoint", "row"):
        raise ValueError(f"unknown ordering {ordering!r}")
    m = st.model
    up, um = st.padded()
    lo, hi = _ranges(st)
    parts = []
    for s in range(m.s_intra, 0, -1):
        d = np.concatenate([_intra_diffs(up, s, lo, hi), _intra_diffs(um, s, lo, hi)])
        parts.append(np.sum(m.V.deriv(0, s + d) - m.V.deriv(0, float(s))) / st.eps)
    off = m.inter_offsets()
    Uref = m.U.deriv(0, off)
    order = np.argsort(-np.abs(off))
    for j in order:
        s = int(round(off[j] + 0.5))
        d = up[lo + s : hi + s] - um[lo:hi]
        parts.append(st.eps * np.sum(m.U.deriv(0, off[j] + d) - Uref[j]))
    if ordering == "midpoint":
        parts.append(ordering_offset(st))
    return math.fsum(parts)


def _grad_full(st):
    """Gradient w.r.t. every padded coordinate (before window restriction)."""
    m = st.model
    up, um = st.padded()
    lo, hi = _ranges(st)
    gp = np.zeros_like(up)
    gm = np.zeros_like(um)
    for s in range(m.s_intra, 0, -1):
        for w, g in ((up, gp), (um, gm)):
            t = m.V.deriv(1, s + _intra_diffs(w, s, lo, hi)) / st.eps
            g[lo + s : hi + s] += t
            g[lo:hi] -= t
    for off in m.inter_offsets()[np.argsort(-np.abs(m.inter_offsets()))]:
        s = int(round(off + 0.5))
        t = st.eps * m.U.deriv(1, off + up[lo + s : hi + s] - um[lo:hi])
        gp[lo + s : hi + s] += t
        gm[lo:hi] -= t
    return gp, gm


def _window(st, gp, gm, pin=True):
    P = st.pad
    n = 2 * st.N + 1
    out = np.concatenate([gp[P : P + n], gm[P : P + n]])
    if pin:
        out[st.N] = 0.0
        out[n + st.N] = 0.0
    return out


def grad_a(st, pin=True):
    """Partial derivatives of :func:`energy_a` with respect to the window displacements."""
    return _window(st, *_grad_full(st), pin=pin)


def _embed(st, f):
    P = st.pad
    n = 2 * st.N + 1
    fp = np.zeros(n + 2 * P)
    fm = np.zeros(n + 2 * P)
    fp[P : P + n] = f[:n]
    fm[P : P + n] = f[n:]
    return fp, fm


def hess_vec_a(st, f, pin=True):
    """Second variation applied to ``f`` without assembling the Hessian."""
    m = st.model
    f = np.asarray(f, dtype=float).copy()
    n = 2 * st.N + 1
    if pin:
        f[st.N] = 0.0
        f[n + st.N] = 0.0
    up, um = st.padded()
    fp, fm = _embed(st, f)
    lo, hi = _ranges(st)
    hp = np.zeros_like(fp)
    hm = np.zeros_like(fm)
    for s in range(m.s_intra, 0, -1):
        for w, fw, h in ((up, fp, hp), (um, fm, hm)):
            c = m.V.deriv(2, s + _intra_diffs(w, s, lo, hi)) / st.eps
            t = c * _intra_diffs(fw, s, lo, hi)
            h[lo + s : hi + s] += t
            h[lo:hi] -= t
    for off in m.inter_offsets()[np.argsort(-np.abs(m.inter_offsets()))]:
        s = int(round(off + 0.5))
        c = st.eps * m.U.deriv(2, off + up[lo + s : hi + s] - um[lo:hi])
        t = c * (fp[lo + s : hi + s] - fm[lo:hi])
        hp[lo + s : hi + s] += t
        hm[lo:hi] -= t
    return _window(st, hp, hm, pin=pin)


def hessian_a(st, pin=True):
    """Sparse Hessian over the window (pinned rows and columns set to identity)."""
    m = st.model
    up, um = st.padded()
    P = st.pad
    n = 2 * st.N + 1
    lo, hi = _ranges(st)
    pos = np.arange(lo, hi)
    rows, cols, vals = [], [], []

    def add_pair(a, b, c):
        # energy term 1/2 c (f_a - f_b)^2 in global (padded, 2-layer) numbering
        rows.extend([a, b, a, b])
        cols.extend([a, b, b, a])
        vals.extend([c, c, -c, -c])

    M = n + 2 * P
    for s in range(m.s_intra, 0, -1):
        for layer, w in ((0, up), (1, um)):
            c = m.V.deriv(2, s + _intra_diffs(w, s, lo, hi)) / st.eps
            add_pair(layer * M + pos + s, layer * M + pos, c)
    for off in m.inter_offsets():
        s = int(round(off + 0.5))
        c = st.eps * m.U.deriv(2, off + up[lo + s : hi + s] - um[lo:hi])
        add_pair(pos + s, M + pos, c)
    r = np.concatenate(rows)
    c_ = np.concatenate(cols)
    v = np.concatenate(vals)
    H = sparse.coo_matrix((v, (r, c_)), shape=(2 * M, 2 * M)).tocsr()
    keep = np.concatenate([np.arange(P, P + n), M + np.arange(P, P + n)])
    H = H[keep][:, keep].tolil()
    if pin:
        for j in (st.N, n + st.N):
            H[j, :] = 0.0
            H[:, j] = 0.0
            H[j, j] = 1.0
    return H.tocsr()


# --- norms ---------------------------------------------------------------

def x_eps_norm(f, eps, N=None):
    """sqrt(||Df+||_eps^2 + ||Df-||_eps^2 + ||f_perp||_eps^2), f zero outside the window."""
    f = np.asarray(f, dtype=float)
    n = f.size // 2
    fp = np.concatenate([[0.0], f[:n], [0.0]])
    fm = np.concatenate([[0.0], f[n:], [0.0]])
    dp = np.diff(fp) / eps
    dm = np.diff(fm) / eps
    perp = f[:n] - f[n:]
    return math.sqrt(eps * (np.dot(dp, dp) + np.dot(dm, dm) + np.dot(perp, perp)))


def gram_matrix(N, eps, pin=True):
    """Sparse Gram matrix of the X_eps inner product on the window."""
    n = 2 * N + 1
    K = sparse.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / eps
    I = sparse.identity(n)
    G = sparse.bmat([[K + eps * I, -eps * I], [-eps * I, K + eps * I]]).tolil()
    if pin:
        for j in (N, n + N):
            G[j, :] = 0.0
            G[:, j] = 0.0
            G[j, j] = 1.0
    return G.tocsr()


def inner_eps(f, g, eps):
    """Discrete L2 pairing eps * sum f_i g_i."""
    return eps * float(np.dot(f, g))


# --- symmetric subspace -----------------------------------------------------

def symmetric_basis(N):
    """Map T from c_1..c_N to window vectors with f+_i = -f-_i = -f+_{-i}."""
    n = 2 * N + 1
    i = np.arange(1, N + 1)
    j = i - 1
    rows = np.concatenate([N + i, N - i, n + N + i, n + N - i])
    cols = np.concatenate([j, j, j, j])
    vals = np.concatenate([np.ones(N), -np.ones(N), -np.ones(N), np.ones(N)])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(2 * n, N))


def symmetric_state(st, c):
    """State with u+_i = c_i, u+_{-i} = 1/2 - c_i, u+_0 = 1/4 and u- = -u+."""
    N = st.N
    up = np.empty(2 * N + 1)
    up[N] = 0.25
    up[N + 1 :] = c
    up[: N][::-1] = 0.5 - np.asarray(c)
    return st.with_displacements(up, -up)


def symmetry_defect(st):
    """max_i |u+_i + u+_{-i} - 1/2| and max_i |u+_i + u-_i|."""
    up, um = st.u_plus, st.u_minus
    return float(np.max(np.abs(up + up[::-1] - 0.5))), float(np.max(np.abs(up + um)))


# --- consistency ----------------------------------------------------------

def dual_norm(st, g, symmetric=True):
    """sup over unit f (in X_eps, restricted to M_eps if ``symmetric``) of g . f."""
    G = gram_matrix(st.N, st.eps)
    if symmetric:
        T = symmetric_basis(st.N)
        g = T.T @ g
        G = (T.T @ G @ T).tocsc()
    else:
        G = G.tocsc()
    try:
        z = spla.spsolve(G, g)
    except RuntimeError as exc:
        raise ConvergenceError(f"Gram solve failed: {exc}") from exc
    if not np.all(np.isfinite(z)):
        raise ConvergenceError("Gram solve produced non-finite values")
    return math.sqrt(max(float(np.dot(g, z)), 0.0))


def consistency_residual(st, symmetric=True):
    """X_eps-dual norm of the atomistic first variation at ``st``."""
    return dual_norm(st, grad_a(st), symmetric)


def grad_norm(st, g=None, symmetric=False):
    """||dE||_eps = ||g||_2 / sqrt(eps) for the partial-derivative vector g.

    With ``symmetric`` the gradient is first projected onto the symmetric
    subspace, which is the quantity a reduced solve drives to zero.
    """
    g = grad_a(st) if g is None else g
    if symmetric:
        # basis columns have four unit entries, hence norm 2
        g = (symmetric_basis(st.N).T @ g) / 2.0
    return float(np.linalg.norm(g)) / math.sqrt(st.eps)


# --- relaxation -------------------------------------------------------------

@dataclass
class RelaxInfo:
    iterations: int
    grad_norm: float
    cg_iterations: int
    history: list


def _pcg(apply_A, b, M_solve, rtol, max_iter):
    """Preconditioned CG.  Raises on non-positive curvature."""
    x = np.zeros_like(b)
    r = b.copy()
    z = M_solve(r)
    p = z.copy()
    rz = float(np.dot(r, z))
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return x, 0
    for k in range(1, max_iter + 1):
        Ap = apply_A(p)
        pAp = float(np.dot(p, Ap))
        if pAp <= 0.0:
            raise NonPositiveCurvatureError(f"CG found <Hp, p> = {pAp:.3g} <= 0")
        a = rz / pAp
        x += a * p
        r -= a * Ap
        if np.linalg.norm(r) <= rtol * bnorm:
            return x, k
        z = M_solve(r)
        rz_new = float(np.dot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, max_iter


def _reduction(st, symmetric):
    if symmetric:
        T = symmetric_basis(st.N)
    else:
        n = 2 * st.N + 1
        keep = np.setdiff1d(np.arange(2 * n), [st.N, n + st.N])
        T = sparse.identity(2 * n, format="csr")[:, keep]
    return T.tocsr()


def _preconditioner(st, T, shift_curv):
    """Factorised alpha K / eps + eps gamma''(0) P_perp^T P_perp in reduced coordinates."""
    n = 2 * st.N + 1
    a = st.model.alpha
    K = sparse.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
    I = sparse.identity(n)
    c = st.eps * shift_curv
    P = sparse.bmat([[a * K / st.eps + c * I, -c * I], [-c * I, a * K / st.eps + c * I]])
    lu = spla.splu((T.T @ P @ T).tocsc())
    return lu.solve


def _gamma2_0(model):
    off = model.inter_offsets()
    return float(np.sum(model.U.deriv(2, off)))


def relax(st, mode="newton_cg", tol=1e-8, max_iter=100, symmetric=True, cg_max=500, verbose=False):
    """Relax ``st`` to an equilibrium of :func:`energy_a`.

    Parameters
    ----------
    mode : {'newton_cg', 'fixed_point'}
        ``newton_cg`` is inexact Newton with Armijo backtracking.
        ``fixed_point`` iterates ``w <- -A_w^{-1} grad(v)`` where ``A_w`` is the
        Hessian averaged along ``v + t w`` by 3-point Gauss quadrature.
    tol : float
        Target for :func:`grad_norm` (projected when ``symmetric``).
    symmetric : bool
        Solve in the symmetric subspace (unknowns u+_i, i > 0).

    Returns
    -------
    (LatticeState, RelaxInfo)
    """
    if mode not in ("newton_cg", "fixed_point"):
        raise ValueError(f"unknown solver mode {mode!r}")
    T = _reduction(st, symmetric)
    Msolve = _preconditioner(st, T, max(_gamma2_0(st.model), 0.0))
    u0 = st.vector()
    cur = st
    g = grad_a(cur)
    gn = grad_norm(cur, g, symmetric)
    hist = [gn]
    cg_total = 0
    if gn <= tol:
        return cur, RelaxInfo(0, gn, 0, hist)

    if mode == "newton_cg":
        E = energy_a(cur)
        for it in range(1, max_iter + 1):
            H = hessian_a(cur)
            Hr = (T.T @ H @ T).tocsr()
            gr = T.T @ g
            rtol = min(0.1, math.sqrt(gn))
            p, k = _pcg(lambda v: Hr @ v, -gr, Msolve, rtol, cg_max)
            cg_total += k
            step = T @ p
            t = 1.0
            slope = float(np.dot(gr, p))
            while True:
                trial = cur.with_vector(cur.vector() + t * step)
                Et = energy_a(trial)
                gt = grad_a(trial)
                gnt = grad_norm(trial, gt, symmetric)
                if Et <= E + 1e-4 * t * slope or gnt < gn:
                    break
                t *= 0.5
                if t < 1e-10:
                    raise ConvergenceError("line search failed in Newton relaxation")
            cur, E, g, gn = trial, Et, gt, gnt
            hist.append(gn)
            if verbose:
                print(f"newton {it}: |g| = {gn:.3e}, step {t:g}, cg {k}")
            if gn <= tol:
                return cur, RelaxInfo(it, gn, cg_total, hist)
        raise ConvergenceError(f"Newton relaxation stalled at |g| = {gn:.3e}")

    # fixed-point contraction around the initial state v
    g0r = T.T @ g
    nodes, weights = np.polynomial.legendre.leggauss(3)
    tq = 0.5 * (nodes + 1.0)
    wq = 0.5 * weights
    w = np.zeros(T.shape[1])
    gn0 = gn
    for it in range(1, max_iter + 1):
        Hs = []
        for t in tq:
            Hs.append((T.T @ hessian_a(st.with_vector(u0 + t * (T @ w))) @ T).tocsr())
        A = sum(wi * Hi for wi, Hi in zip(wq, Hs))
        rtol = max(min(1e-3, 0.1 * tol / gn0), 1e-14)
        w_new, k = _pcg(lambda v: A @ v, -g0r, Msolve, rtol, cg_max)
        cg_total += k
        w = w_new
        cur = st.with_vector(u0 + T @ w)
        g = grad_a(cur)
        gn = grad_norm(cur, g, symmetric)
        hist.append(gn)
        if verbose:
            print(f"fixed point {it}: |g| = {gn:.3e}, cg {k}")
        if gn <= tol:
            return cur, RelaxInfo(it, gn, cg_total, hist)
    raise ConvergenceError(f"fixed-point relaxation stalled at |g| = {gn:.3e}")


def state_to_rows(st):
    """Rows (i, u+, u-, u_perp) for CSV output."""
    return np.column_stack([st.index, st.u_plus, st.u_minus, st.u_perp])
