import json
import pathlib
import time

import numpy as np
import pytest

from dislocore import lattice as la
from dislocore.analysis import StudyConfig, convergence_sweep
from dislocore.gamma import GammaSurface
from dislocore.potentials import calibrated_lj, elastic_alpha, matched_gaussian
from dislocore.pn import solve_pn

DATA = pathlib.Path(__file__).parent / "data"
ROOT = pathlib.Path(__file__).parent.parent
SWEEP_EPS = [0.1, 0.05, 0.025, 0.0125]

# acceptance lines, printed in the terminal summary
ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def oracles():
    with open(DATA / "oracles.json") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def baselines():
    with open(DATA / "baselines.json") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def lj():
    return calibrated_lj()


@pytest.fixture(scope="session")
def lj_alpha(lj):
    return elastic_alpha(lj).alpha


@pytest.fixture(scope="session")
def gauss_inter(lj_alpha):
    return matched_gaussian(lj_alpha)


@pytest.fixture(scope="session")
def model(lj, gauss_inter):
    return la.LatticeModel(lj, gauss_inter)


@pytest.fixture(scope="session")
def gamma_lj(gauss_inter, lj_alpha):
    return GammaSurface.from_potential(gauss_inter, lj_alpha)


@pytest.fixture(scope="session")
def study(lj, gauss_inter):
    return StudyConfig(lj, gauss_inter)


@pytest.fixture(scope="session")
def sinusoid():
    return GammaSurface.sinusoidal(1.0, 1.0)


@pytest.fixture(scope="session")
def sinusoid_sol(sinusoid):
    return solve_pn(sinusoid)


def sampled(model, g, eps, window=24.0):
    """Sampled PN dislocation on the standard window for ``eps``."""
    mu = g.tail_rate
    N = max(int(np.ceil(window / (mu * eps))), model.s_max)
    sol = solve_pn(g, L=max(20.0 / mu, eps * N))
    return sol, la.sample_pn(sol, eps, N, model)


@pytest.fixture(scope="session")
def relaxed_005(model, gamma_lj):
    sol, v = sampled(model, gamma_lj, 0.05)
    rel, info = la.relax(v, tol=1e-10)
    return sol, v, rel, info


@pytest.fixture(scope="session")
def sweep_table(study):
    t0 = time.perf_counter()
    table = convergence_sweep(SWEEP_EPS, study)
    table.seconds = time.perf_counter() - t0
    return table
