"""
Pair potentials for the bilayer chain.

Two potentials enter the model: the intra-layer potential ``V`` acting
between atoms of the same chain and the (rescaled) inter-layer potential
``U`` acting across the glide plane.  Every potential is an even function
of the separation and provides derivatives up to order four.

All lengths are in units of the lattice constant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate, interpolate, optimize

from .errors import ConvergenceError, DomainError, OrderError, StabilityError

MAX_ORDER = 4


def _check_order(k):
    if k < 0 or k > MAX_ORDER:
        raise OrderError(f"derivative order {k} not in 0..{MAX_ORDER}")


def _parity(x, k):
    # d^k/dx^k of an even function is (-1)^k-symmetric
    if k % 2 == 0:
        return 1.0
    return np.sign(x)


@dataclass(frozen=True)
class PairPotential:
    """Base class.  Subclasses implement ``_deriv_pos`` for ``x > 0``.

    Attributes
    ----------
    decay_R, decay_theta : float
        Radius beyond which decay bounds are checked, and the exponent margin.
    s_max : int
        Truncation index of every lattice sum that involves this potential.
    """

    decay_R: float = field(default=2.0, kw_only=True)
    decay_theta: float = field(default=1.0, kw_only=True)
    s_max: int = field(default=64, kw_only=True)

    singular = False

    def __post_init__(self):
        if self.s_max < 1:
            raise ValueError("s_max must be >= 1")
        if self.decay_R <= 0 or self.decay_theta <= 0:
            raise ValueError("decay_R and decay_theta must be positive")

    def _deriv_pos(self, k, x):
        raise NotImplementedError

    def deriv(self, k, x):
        """k-th derivative at ``x`` (scalar or array)."""
        _check_order(k)
        x = np.asarray(x, dtype=float)
        if self.singular and np.any(x == 0.0):
            raise DomainError(f"{type(self).__name__} is singular at x = 0")
        ax = np.abs(x)
        out = self._deriv_pos(k, ax) * _parity(x, k)
        return out if out.ndim else float(out)

    def __call__(self, x):
        return self.deriv(0, x)


@dataclass(frozen=True)
class LennardJones(PairPotential):
    """V(x) = -(r0/|x|)^m + (r0/|x|)^n with 1 < m < n."""

    m: float = 6.0
    n: float = 12.0
    r0: float = 1.0

    singular = True

    def __post_init__(self):
        super().__post_init__()
        if not (1 < self.m < self.n):
            raise ValueError("need 1 < m < n")
        if self.r0 <= 0:
            raise ValueError("r0 must be positive")

    def _deriv_pos(self, k, ax):
        # d^k/dx^k x^-p = (-1)^k p (p+1) ... (p+k-1) x^(-p-k)
        def term(p):
            c = 1.0
            for j in range(k):
                c *= -(p + j)
            return c * self.r0**p * ax ** (-p - k)

        return -term(self.m) + term(self.n)


@dataclass(frozen=True)
class HarmonicNN(PairPotential):
    """Nearest-neighbour spring, V(x) = k0/2 (|x| - 1)^2 for |x| < 3/2, zero beyond.

    Lattice sums never sample the cut region for moderate displacements, so
    the potential acts only between nearest neighbours.
    """

    k0: float = 1.0
    s_max: int = field(default=1, kw_only=True)

    singular = True
    cutoff = 1.5

    def __post_init__(self):
        super().__post_init__()
        if self.k0 <= 0:
            raise ValueError("k0 must be positive")

    def _deriv_pos(self, k, ax):
        inside = ax < self.cutoff
        d = ax - 1.0
        vals = [0.5 * self.k0 * d**2, self.k0 * d, self.k0 + 0.0 * d, 0.0 * d, 0.0 * d]
        return np.where(inside, vals[k], 0.0)


# physicists' Hermite polynomials H_0..H_4
_HERMITE = (
    lambda y: 1.0 + 0.0 * y,
    lambda y: 2.0 * y,
    lambda y: 4.0 * y**2 - 2.0,
    lambda y: 8.0 * y**3 - 12.0 * y,
    lambda y: 16.0 * y**4 - 48.0 * y**2 + 12.0,
)


@dataclass(frozen=True)
class Gaussian(PairPotential):
    """U(x) = amp * exp(-(x / width)^2)."""

    amp: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if self.width <= 0:
            raise ValueError("width must be positive")

    def _deriv_pos(self, k, ax):
        y = ax / self.width
        return self.amp * (-1) ** k * _HERMITE[k](y) * np.exp(-y * y) / self.width**k


@dataclass(frozen=True, eq=False)
class Tabulated(PairPotential):
    """Even potential given by samples on ``x >= 0``; quintic spline, zero beyond the last knot."""

    knots: tuple = ()
    values: tuple = ()
    singular_at_zero: bool = False

    def __post_init__(self):
        super().__post_init__()
        x = np.asarray(self.knots, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 6:
            raise ValueError("need at least 6 matching knots and values")
        if np.any(np.diff(x) <= 0) or x[0] < 0:
            raise ValueError("knots must be non-negative and strictly increasing")
        object.__setattr__(self, "_spline", interpolate.make_interp_spline(x, y, k=5))

    @property
    def singular(self):
        return self.singular_at_zero

    @property
    def support(self):
        return float(self.knots[-1])

    def _deriv_pos(self, k, ax):
        lo, hi = self.knots[0], self.knots[-1]
        inside = (ax >= lo) & (ax <= hi)
        vals = self._spline(np.clip(ax, lo, hi), nu=k)
        return np.where(inside, vals, 0.0)

    @classmethod
    def from_csv(cls, path, **kwargs):
        """Load a two-column (x, value) CSV; a header row is skipped if present."""
        xs, ys = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                try:
                    xs.append(float(row[0]))
                    ys.append(float(row[1]))
                except ValueError:
                    continue
        return cls(knots=tuple(xs), values=tuple(ys), **kwargs)


def eval_deriv(p, k, x):
    """k-th derivative of potential ``p`` at ``x``."""
    return p.deriv(k, x)


# --- lattice sums ----------------------------------------------------------

def lattice_sum(terms):
    """Sum ``terms`` ordered from smallest to largest magnitude."""
    terms = np.asarray(terms, dtype=float)
    return float(math.fsum(terms[np.argsort(np.abs(terms))]))


class AlphaResult(NamedTuple):
    alpha: float
    tail: float
    tail_estimate: float = 0.0

    @property
    def extrapolated(self):
        """alpha plus the estimated neglected part of the series."""
        return self.alpha + self.tail_estimate


def elastic_alpha(V, s_max=None):
    """Elastic constant alpha = sum_{s != 0} V''(s) s^2 / 2 truncated at ``s_max``.

    Returns
    -------
    AlphaResult
        ``alpha``; ``tail``, a bound on the neglected part of the series from
        the integral of |V''(x)| x^2 beyond the cutoff; and ``tail_estimate``,
        the signed Euler-Maclaurin estimate of that part.
    """
    S = V.s_max if s_max is None else int(s_max)
    s = np.arange(S, 0, -1, dtype=float)
    # both signs of s contribute equally
    alpha = lattice_sum(V.deriv(2, s) * s**2)
    if alpha <= 0:
        raise StabilityError(f"elastic constant alpha = {alpha:g} is not positive")
    tail, est = _alpha_tail(V, S)
    return AlphaResult(alpha, tail, est)


def _alpha_tail(V, S):
    support = getattr(V, "support", None)
    if isinstance(V, HarmonicNN) or (support is not None and support <= S):
        return 0.0, 0.0
    f = lambda x: float(V.deriv(2, x)) * x * x
    bound, _ = integrate.quad(lambda x: abs(f(x)), S, np.inf, limit=200, epsabs=0, epsrel=1e-12)
    signed, _ = integrate.quad(f, S, np.inf, limit=200, epsabs=0, epsrel=1e-12)
    # sum_{s > S} f(s) ~ int_S^inf f - f(S) / 2
    return float(bound), float(signed - 0.5 * f(S))


def zeta(t, terms=32):
    """Riemann zeta for real t > 1 by Euler-Maclaurin summation."""
    if t <= 1:
        raise DomainError("zeta needs t > 1")
    K = terms
    head = math.fsum(k ** (-t) for k in range(K - 1, 0, -1))
    # tail sum_{k >= K} k^-t: integral, endpoint and Bernoulli corrections
    tail = K ** (1 - t) / (t - 1) + 0.5 * K ** (-t)
    bern = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66)
    rising = t
    fact = 2.0
    for j, b in enumerate(bern, start=1):
        tail += b / fact * rising * K ** (-t - 2 * j + 1)
        rising *= (t + 2 * j - 1) * (t + 2 * j)
        fact *= (2 * j + 1) * (2 * j + 2)
    return head + tail


def lj_r0_closed_form(m, n):
    """r0 making the unit spacing an equilibrium of the bare LJ chain."""
    return (m * zeta(m) / (n * zeta(n))) ** (1.0 / (n - m))


def lj_equilibrium_residual(r0, m, n, U=None, eps=0.0):
    """sum_k k V'(k) + eps^2 sum_k (k - 1/2) U'(k - 1/2) for LJ(m, n, r0)."""
    res = 2.0 * (m * zeta(m) * r0**m - n * zeta(n) * r0**n)
    if U is not None and eps != 0.0:
        S = U.s_max
        k = np.arange(-S, S + 1, dtype=float) - 0.5
        res += eps**2 * lattice_sum(k * U.deriv(1, k))
    return res


def calibrate_r0(m, n, U=None, eps=0.0, bracket=(0.5, 1.5)):
    """r0 such that unit spacing is the equilibrium lattice constant."""
    f = lambda r: lj_equilibrium_residual(r, m, n, U, eps)
    a, b = bracket
    if f(a) * f(b) > 0:
        raise ConvergenceError(f"residual does not change sign on {bracket}")
    try:
        r0 = optimize.brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceError(str(exc)) from exc
    return r0


def calibrated_lj(m=6.0, n=12.0, U=None, eps=0.0, **kwargs):
    return LennardJones(m=m, n=n, r0=calibrate_r0(m, n, U, eps), **kwargs)


def matched_gaussian(alpha, width=0.5, s_max=64):
    """Gaussian inter-layer potential whose misfit curvature gamma''(0) equals ``alpha``.

    With this choice the dimensionless ratio a^2 gamma''(0) / alpha of the
    rescaled model is one.
    """
    probe = Gaussian(amp=1.0, width=width, s_max=s_max)
    s = np.arange(-s_max, s_max + 1, dtype=float) - 0.5
    g2 = lattice_sum(probe.deriv(2, s))
    if g2 <= 0:
        raise StabilityError("Gaussian of this width gives gamma''(0) <= 0")
    return Gaussian(amp=alpha / g2, width=width, s_max=s_max)


# --- decay check -----------------------------------------------------------

@dataclass
class DecayReport:
    role: str
    theta: float
    R: float
    constants: list
    slopes: list
    violations: list

    @property
    def passed(self):
        return not self.violations


def verify_decay(p, role="intra", n_samples=200):
    """Check |p^(k)(x)| <= C |x|^-(k+4+theta) (intra) or |x|^-(k+2+theta) (inter) on [R, 10R].

    The smallest admissible constant C is reported for every k.  An order k
    is flagged when the log-log slope over the outer half of the sample
    range is shallower than the required exponent.
    """
    if role not in ("intra", "inter"):
        raise ValueError("role must be 'intra' or 'inter'")
    base = 4.0 if role == "intra" else 2.0
    R, theta = p.decay_R, p.decay_theta
    x = np.geomspace(R, 10 * R, n_samples)
    consts, slopes, bad = [], [], []
    for k in range(MAX_ORDER + 1):
        expo = k + base + theta
        vals = np.abs(np.asarray(p.deriv(k, x), dtype=float))
        consts.append(float(np.max(vals * x**expo)))
        outer = slice(n_samples // 2, None)
        nz = vals[outer] > 1e-300
        if nz.sum() < 2:
            slopes.append(-np.inf)
            continue
        lx, ly = np.log(x[outer][nz]), np.log(vals[outer][nz])
        slope = float(np.polyfit(lx, ly, 1)[0])
        slopes.append(slope)
        if slope > -expo + 1e-3:
            bad.append(k)
    return DecayReport(role, theta, R, consts, slopes, bad)
