from dataclasses import dataclass, replace

import numpy as np
import pytest
from scipy import linalg

from dislocore import lattice as la
from dislocore.analysis import (
    atom_stability,
    circulant_gap_matrix,
    convergence_sweep,
    delta_gap,
    gap_symbol,
    loglog_slope,
    random_fields,
    stability_gap_drift,
)
from dislocore.potentials import HarmonicNN, PairPotential, calibrated_lj


@dataclass(frozen=True)
class Springs(PairPotential):
    """Piecewise quadratic V with V''(s) = stiffness[s - 1] near each integer s."""

    stiffness: tuple = (1.0,)

    def _deriv_pos(self, k, ax):
        s = np.clip(np.rint(ax), 1, len(self.stiffness))
        c = np.asarray(self.stiffness)[s.astype(int) - 1]
        inside = np.abs(ax - s) < 0.5
        d = ax - s
        out = {0: 0.5 * c * d * d, 1: c * d, 2: c}.get(k, 0.0 * c)
        return np.where(inside, out, 0.0)


def test_delta_harmonic_is_zero():
    rep = delta_gap(HarmonicNN())
    assert rep.delta == 0.0 and rep.raw == 0.0
    assert rep.circulant == 0.0


def test_delta_lj_is_zero():
    rep = delta_gap(calibrated_lj())
    assert abs(rep.delta) <= 1e-10
    assert rep.raw <= 1e-10
    assert abs(rep.circulant) <= 1e-10


def test_delta_synthetic_second_neighbour():
    k2 = 0.3
    V = Springs(stiffness=(1.0, k2), s_max=2)
    rep = delta_gap(V)
    # sigma(k) = 4 k2 sin^2(k / 2), maximal at k = pi
    assert rep.delta == pytest.approx(4 * k2, rel=1e-12)
    assert rep.k_star == pytest.approx(np.pi, rel=1e-6)
    assert abs(rep.delta - rep.circulant) <= 1e-8


def test_circulant_spectrum_is_the_symbol():
    rng = np.random.default_rng(7)
    for _ in range(3):
        V = Springs(stiffness=tuple(rng.normal(size=5)), s_max=5)
        n = 128
        w = linalg.eigvalsh(circulant_gap_matrix(V, n))
        k = 2 * np.pi * np.arange(n) / n
        sym = np.sort(np.where(k == 0, 0.0, gap_symbol(V, np.where(k == 0, 1.0, k))))
        assert np.max(np.abs(w - sym)) <= 1e-8 * max(1.0, np.max(np.abs(w)))
        rep = delta_gap(V, ring=n)
        assert rep.delta >= 0.0
        assert rep.delta >= rep.circulant - 1e-12


def test_negative_gap_is_clamped():
    V = Springs(stiffness=(1.0, -0.2, -0.1), s_max=3)
    rep = delta_gap(V)
    assert rep.delta == 0.0
    assert rep.raw <= 0.0


def test_atom_stability(relaxed_005):
    _, _, rel, _ = relaxed_005
    pinned = atom_stability(rel, pin=True)
    free = atom_stability(rel, pin=False)
    assert pinned.lambda_min_atom > 0
    assert pinned.residual <= 1e-8
    # without the pin the translation direction is (marginally) unstable
    assert free.lambda_min_atom < 1e-3 * pinned.lambda_min_atom
    assert abs(free.lambda_min_atom) < 0.01 * pinned.lambda_min_atom


def test_unpinned_mode_collapses(sweep_table):
    lam = [abs(r.lambda_atom_unpinned) for r in sweep_table.rows]
    assert all(b < 0.3 * a for a, b in zip(lam, lam[1:]))


def test_sweep_rates(sweep_table):
    for name in ("x_err", "e_gap", "consist"):
        fit = sweep_table.slopes[name]
        assert fit.slope >= 1.9
        assert fit.r2 >= 0.99
        assert fit.ci95[0] <= fit.slope <= fit.ci95[1]
    assert all(r.ok for r in sweep_table.rows)


def test_atom_stability_approaches_pn(sweep_table):
    assert sweep_table.kappa > 0
    gaps = [abs(r.lambda_atom - sweep_table.kappa) for r in sweep_table.rows]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_sweep_flags_failed_rows(study):
    cfg = replace(study, tol=1e-16, max_iter=1, stability=False)
    tab = convergence_sweep([0.1], cfg)
    assert not tab.rows[0].ok
    assert "ConvergenceError" in tab.rows[0].message


def test_sweep_rejects_unordered_eps(study):
    with pytest.raises(ValueError):
        convergence_sweep([0.05, 0.1], study)


def test_sweep_is_thread_deterministic(study, monkeypatch):
    monkeypatch.delenv("DISLOCORE_THREADS", raising=False)
    base = replace(study, stability=False)
    a = convergence_sweep([0.1, 0.05], replace(base, jobs=1))
    b = convergence_sweep([0.1, 0.05], replace(base, jobs=2))
    assert [r.__dict__ for r in a.rows] == [r.__dict__ for r in b.rows]


def test_loglog_slope_exact():
    x = np.array([0.1, 0.05, 0.025])
    fit = loglog_slope(x, 3 * x**2)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


def test_random_fields_are_unit(gamma_lj):
    fs = random_fields(0.05, 400, 5, gamma_lj.tail_rate, seed=3)
    for f in fs:
        assert la.x_eps_norm(f, 0.05) == pytest.approx(1.0, rel=1e-12)
        assert f[400] == 0.0 and f[801 + 400] == 0.0


@pytest.fixture(scope="module")
def drift(study):
    return stability_gap_drift([0.1, 0.05, 0.025], study, n_fields=20)


def test_drift_rate(drift):
    rows, fit = drift
    assert fit.slope >= 0.9
    # uniform bound c * eps over the random fields
    ratios = [r["max"] / r["eps"] for r in rows]
    assert max(ratios) <= 2 * min(ratios)


def test_drift_far_from_core(study, drift):
    eps = 0.05
    N = study.window(eps, study.gamma_surface().tail_rate)
    rows, _ = stability_gap_drift([eps], study, n_fields=5, center=-0.6 * eps * N)
    near = next(r for r in drift[0] if r["eps"] == eps)
    # the tail of phi at this distance is ~ exp(-10 mu)
    assert rows[0]["max"] <= 1e-4 * near["max"]
