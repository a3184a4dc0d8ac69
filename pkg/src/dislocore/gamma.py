"""
Misfit energy density (gamma-surface) of the bilayer.

A :class:`GammaSurface` is stored as a cosine series

    gamma(phi) = sum_k a_k (1 - cos 2 pi k phi),

which is even, 1-periodic and vanishes at integers by construction.  The
``1 - cos`` factor is evaluated as ``2 sin^2`` so that gamma keeps full
relative accuracy near its minima, where the continuum solver integrates
1/sqrt(gamma).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OrderError, StabilityError
from .potentials import MAX_ORDER, lattice_sum

DEFAULT_GRID = 1024


def _offsets(U, s_max=None):
    S = U.s_max if s_max is None else int(s_max)
    s = np.arange(-S, S + 1, dtype=float)
    # largest |offset| first so that small terms accumulate first
    s = s[np.argsort(-np.abs(s - 0.5), kind="stable")]
    return s - 0.5


def gamma_from_potential(U, phi, s_max=None):
    """Direct lattice sum sum_{|s| <= s_max} [U(s - 1/2 + phi) - U(s - 1/2)]."""
    off = _offsets(U, s_max)
    phi = np.asarray(phi, dtype=float)
    terms = U.deriv(0, off[:, None] + phi.reshape(1, -1)) - U.deriv(0, off)[:, None]
    out = np.array([math.fsum(col) for col in terms.T])
    return out.reshape(phi.shape) if phi.ndim else float(out[0])


def gamma_lattice_deriv(U, k, phi, s_max=None):
    """Term-wise differentiated lattice sum sum_s U^(k)(s - 1/2 + phi)."""
    if k == 0:
        return gamma_from_potential(U, phi, s_max)
    if k > MAX_ORDER or k < 0:
        raise OrderError(f"derivative order {k} not in 0..{MAX_ORDER}")
    off = _offsets(U, s_max)
    phi = np.asarray(phi, dtype=float)
    terms = U.deriv(k, off[:, None] + phi.reshape(1, -1))
    out = np.array([math.fsum(col) for col in terms.T])
    return out.reshape(phi.shape) if phi.ndim else float(out[0])


def epsilon_parameter(alpha, gamma2_at_0, a=1.0):
    """Dimensionless ratio sqrt(a^2 gamma''(0) / alpha)."""
    if alpha <= 0 or gamma2_at_0 <= 0:
        raise StabilityError(f"need alpha > 0 and gamma''(0) > 0, got {alpha:g}, {gamma2_at_0:g}")
    return math.sqrt(a * a * gamma2_at_0 / alpha)


def _series(coeffs, k, phi):
    phi = np.asarray(phi, dtype=float)
    a = np.asarray(coeffs, dtype=float)
    kk = np.arange(1, a.size + 1, dtype=float)
    arg = np.pi * np.multiply.outer(phi, kk)
    w = 2 * np.pi * kk
    if k == 0:
        basis = 2.0 * np.sin(arg) ** 2
    elif k == 1:
        basis = w * np.sin(2 * arg)
    elif k == 2:
        basis = w**2 * np.cos(2 * arg)
    elif k == 3:
        basis = -(w**3) * np.sin(2 * arg)
    else:
        basis = -(w**4) * np.cos(2 * arg)
    out = basis @ a
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class GammaSurface:
    """Periodic misfit density with derivatives up to order four.

    Attributes
    ----------
    coeffs : ndarray
        Cosine-series coefficients ``a_1 .. a_K``.
    alpha : float
        Elastic constant the surface is paired with.
    potential : PairPotential or None
        Inter-layer potential the surface was built from, if any.
    """

    coeffs: np.ndarray
    alpha: float
    grid_size: int = DEFAULT_GRID
    potential: object = None
    s_max: int | None = None
    a: float = 1.0
    label: str = ""
    grid: np.ndarray = field(init=False, repr=False)
    values: np.ndarray = field(init=False, repr=False)
    derivs: tuple = field(init=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", c)
        grid = np.arange(self.grid_size) / self.grid_size
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", _series(c, 0, grid))
        object.__setattr__(self, "derivs", tuple(_series(c, k, grid) for k in range(1, 5)))

    # -- constructors ------------------------------------------------------

    @classmethod
    def sinusoidal(cls, amplitude, alpha, **kw):
        """gamma(phi) = A (1 - cos 2 pi phi)."""
        return cls(np.array([float(amplitude)]), alpha, label="sinusoidal", **kw)

    @classmethod
    def from_values(cls, values, alpha, rtol=1e-15, **kw):
        """Project samples on the uniform grid of [0, 1) onto the cosine series."""
        v = np.asarray(values, dtype=float)
        G = v.size
        kw.pop("grid_size", None)
        F = np.fft.rfft(v).real / G
        # v = F0 + 2 sum F_k cos(...) (+ Nyquist); gamma(0) is pinned to 0
        a = -2.0 * F[1:]
        if G % 2 == 0:
            a[-1] = -F[-1]
        scale = np.max(np.abs(a)) if a.size else 0.0
        a[np.abs(a) <= rtol * scale] = 0.0
        nz = np.nonzero(a)[0]
        a = a[: nz[-1] + 1] if nz.size else a[:1]
        return cls(a, alpha, grid_size=G, **kw)

    @classmethod
    def from_potential(cls, U, alpha, grid_size=DEFAULT_GRID, s_max=None):
        grid = np.arange(grid_size) / grid_size
        vals = gamma_from_potential(U, grid, s_max)
        return cls.from_values(vals, alpha, grid_size=grid_size, potential=U,
                               s_max=s_max, label="lattice-sum")

    @classmethod
    def from_trig_fit(cls, fit, alpha, grid_size=DEFAULT_GRID):
        """The psi = 0 slice of a fitted 2D surface, in units where a = 1."""
        a1 = -2.0 * (fit.c1 + fit.c2)
        a2 = -(fit.c2 + 2.0 * fit.c3)
        return cls(np.array([a1, a2]), alpha, grid_size=grid_size, a=fit.a, label="trig-fit")

    # -- evaluation --------------------------------------------------------

    def __call__(self, phi):
        return _series(self.coeffs, 0, phi)

    def deriv(self, k, phi):
        if k < 0 or k > MAX_ORDER:
            raise OrderError(f"derivative order {k} not in 0..{MAX_ORDER}")
        return _series(self.coeffs, k, phi)

    @property
    def gamma2_at_0(self):
        kk = np.arange(1, self.coeffs.size + 1)
        return float(lattice_sum(self.coeffs * (2 * np.pi * kk) ** 2))

    @property
    def eps(self):
        return epsilon_parameter(self.alpha, self.gamma2_at_0, self.a)

    @property
    def tail_rate(self):
        """Decay rate sqrt(2 gamma''(0) / alpha) of the linearised profile."""
        return math.sqrt(2.0 * self.gamma2_at_0 / self.alpha)

    def spectral_deriv(self, k, rtol=1e-13):
        """k-th derivative of the grid values by FFT differentiation.

        Modes below ``rtol`` times the largest one are dropped first;
        otherwise roundoff in the samples is amplified by ``(2 pi G)^k``.
        """
        G = self.grid_size
        F = np.fft.rfft(self.values)
        F[np.abs(F) <= rtol * np.max(np.abs(F))] = 0.0
        w = 2j * np.pi * np.fft.rfftfreq(G, d=1.0 / G)
        if G % 2 == 0 and k % 2 == 1:
            w[-1] = 0.0
        return np.fft.irfft(F * w**k, n=G)

    def export_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phi", "gamma"])
            for p, g in zip(self.grid, self.values):
                w.writerow([f"{p:.17g}", f"{g:.17g}"])


def gamma_deriv(g, k, phi):
    """k-th derivative of the gamma-surface.

    Surfaces built from a potential are differentiated term by term through
    the lattice sum; analytic surfaces use their cosine series.
    """
    if k < 0 or k > MAX_ORDER:
        raise OrderError(f"derivative order {k} not in 0..{MAX_ORDER}")
    if g.potential is not None:
        return gamma_lattice_deriv(g.potential, k, phi, g.s_max)
    return g.deriv(k, phi)


# --- hexagonal 2D trigonometric fit ------------------------------------------

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class GammaTrigFit:
    """Six-coefficient trigonometric fit of a hexagonal 2D gamma-surface (J/m^2)."""

    c0: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    a: float = 1.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("lattice constant must be positive")
        tol = 1e-12 * max(1.0, abs(self.c1), abs(self.c3))
        if abs(self.c4 - SQRT3 * self.c1) > tol or abs(self.c5 + SQRT3 * self.c3) > tol:
            raise ValueError("fit violates c4 = sqrt(3) c1, c5 = -sqrt(3) c3")

    @classmethod
    def from_constants(cls, c0, c1, c2, c3, a=1.0):
        return cls(c0, c1, c2, c3, SQRT3 * c1, -SQRT3 * c3, a)

    def terms(self):
        """(coefficient, 'cos'|'sin', k_phi, k_psi) for every plane wave of the series."""
        q = 2 * math.pi / self.a
        r = q / SQRT3
        return [
            (self.c1, "cos", q, r), (self.c1, "cos", q, -r), (self.c1, "cos", 0.0, 2 * r),
            (self.c2, "cos", q, SQRT3 * q), (self.c2, "cos", q, -SQRT3 * q), (self.c2, "cos", 2 * q, 0.0),
            (self.c3, "cos", 2 * q, 2 * r), (self.c3, "cos", 2 * q, -2 * r), (self.c3, "cos", 0.0, 4 * r),
            (self.c4, "sin", q, -r), (-self.c4, "sin", q, r), (self.c4, "sin", 0.0, 2 * r),
            (self.c5, "sin", 2 * q, -2 * r), (-self.c5, "sin", 2 * q, 2 * r), (self.c5, "sin", 0.0, 4 * r),
        ]


# graphene bilayer fit and monolayer stiffness, J/m^2
GRAPHENE_FIT_C = (21.336e-3, -6.127e-3, -1.128e-3, 0.143e-3)
GRAPHENE_C11 = 312.67


def graphene_fit(a=1.0):
    return GammaTrigFit.from_constants(*GRAPHENE_FIT_C, a=a)


def gamma2d_trig(fit, phi, psi, dphi=0):
    """Evaluate the fitted 2D surface, or its ``dphi``-th partial derivative in phi."""
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    out = np.zeros(np.broadcast(phi, psi).shape)
    if dphi == 0:
        out = out + fit.c0
    for c, kind, kp, ks in fit.terms():
        arg = kp * phi + ks * psi
        # d^n/dphi^n of cos/sin(kp phi + ...) cycles through the four phases
        shift = dphi * math.pi / 2
        base = np.cos(arg + shift) if kind == "cos" else np.sin(arg + shift)
        out = out + c * kp**dphi * base
    return out if out.ndim else float(out)


def graphene_epsilon(fit=None, C11=GRAPHENE_C11):
    """Dimensionless parameter from a 2D fit: sqrt(a^2 d2gamma/dphi2(0,0) / C11)."""
    fit = graphene_fit() if fit is None else fit
    g2 = gamma2d_trig(fit, 0.0, 0.0, dphi=2)
    return epsilon_parameter(C11, g2, fit.a)


# --- structural checks -------------------------------------------------------

@dataclass
class GammaReport:
    gamma_at_0: float
    min_value: float
    periodicity: float
    symmetry: float
    c0: float
    m_prime: float
    local_violation: float

    @property
    def max_violation(self):
        return max(abs(self.gamma_at_0), max(0.0, -self.min_value), self.periodicity, self.symmetry)


def validate_gamma(g, curvature_fraction=0.5, n=None):
    """Check gamma(0) = 0, gamma >= 0, periodicity, symmetry and local convexity.

    ``c0`` is the largest grid radius on which
    ``gamma(phi) >= curvature_fraction * gamma''(0) phi^2 / 2`` holds, and
    ``m_prime`` is the minimum of gamma over [c0, 1 - c0].
    """
    n = g.grid_size if n is None else n
    phi = np.arange(n) / n
    if g.potential is not None:
        vals = gamma_from_potential(g.potential, phi, g.s_max)
        shifted = gamma_from_potential(g.potential, phi + 1.0, g.s_max)
        mirror = gamma_from_potential(g.potential, 1.0 - phi, g.s_max)
    else:
        vals, shifted, mirror = g(phi), g(phi + 1.0), g(1.0 - phi)
    g2 = g.gamma2_at_0
    bound = 0.5 * curvature_fraction * g2 * phi**2
    half = phi <= 0.5
    ok = vals[half] >= bound[half] - 1e-14 * np.max(np.abs(vals))
    if ok.all():
        c0 = 0.5
    else:
        first_bad = int(np.argmin(ok))
        c0 = float(phi[half][max(first_bad - 1, 0)])
    core = (phi >= c0) & (phi <= 1 - c0)
    m_prime = float(np.min(vals[core])) if core.any() else float("nan")
    viol = float(np.max(np.maximum(bound[half] - vals[half], 0.0)))
    return GammaReport(
        gamma_at_0=float(vals[0]),
        min_value=float(np.min(vals)),
        periodicity=float(np.max(np.abs(shifted - vals))),
        symmetry=float(np.max(np.abs(mirror - vals))),
        c0=c0,
        m_prime=m_prime,
        local_violation=viol,
    )
