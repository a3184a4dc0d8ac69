"""
Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Keys carry a section prefix,
e.g. ``potential.intra = lj 6 12`` or ``sweep.eps_list = 0.1, 0.05``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ConfigError, DislocoreError
from .gamma import GRAPHENE_FIT_C, GRAPHENE_C11, GammaTrigFit
from .potentials import (
    Gaussian,
    HarmonicNN,
    LennardJones,
    Tabulated,
    calibrated_lj,
    elastic_alpha,
    matched_gaussian,
)

MODES = ("newton_cg", "fixed_point")


@dataclass
class RunConfig:
    intra: str = "lj 6 12"
    inter: str = "gaussian matched 0.5"
    s_max: int = 64
    gamma_grid: int = 1024
    pn_L: float | None = None
    pn_tol: float = 1e-10
    eps: float = 0.05
    N: int | None = None
    mode: str = "newton_cg"
    tol: float = 1e-8
    max_iter: int = 100
    eps_list: list = field(default_factory=lambda: [0.1, 0.05, 0.025, 0.0125])
    kappa_grid: int = 512
    gammafit: dict = field(default_factory=lambda: {
        "c0": GRAPHENE_FIT_C[0], "c1": GRAPHENE_FIT_C[1], "c2": GRAPHENE_FIT_C[2], "c3": GRAPHENE_FIT_C[3],
        "c4": None, "c5": None, "a": 1.0, "C11": GRAPHENE_C11})
    outputs: dict = field(default_factory=dict)
    seed: int = 0
    base_dir: str = "."

    # -- derived objects ---------------------------------------------------

    def potentials(self):
        """Build (V, U) from the potential specs."""
        V = _parse_potential(self.intra, "potential.intra", self.s_max, self.base_dir)
        if isinstance(V, str):
            raise ConfigError("'matched' is only meaningful for potential.inter", "potential.intra")
        U = _parse_potential(self.inter, "potential.inter", self.s_max, self.base_dir, V=V)
        return V, U

    def trig_fit(self):
        gf = self.gammafit
        c1, c3 = gf["c1"], gf["c3"]
        c4 = gf["c4"] if gf["c4"] is not None else 3**0.5 * c1
        c5 = gf["c5"] if gf["c5"] is not None else -(3**0.5) * c3
        try:
            return GammaTrigFit(gf["c0"], c1, gf["c2"], c3, c4, c5, gf["a"])
        except ValueError as exc:
            raise ConfigError(str(exc), "gammafit") from exc

    def study(self, jobs=1, stability=True):
        from .analysis import StudyConfig

        V, U = self.potentials()
        return StudyConfig(V, U, grid_size=self.gamma_grid, pn_tol=self.pn_tol, pn_L=self.pn_L,
                           mode=self.mode, tol=self.tol, max_iter=self.max_iter, N=self.N,
                           stability=stability, kappa_grid=self.kappa_grid, seed=self.seed,
                           jobs=jobs)


def _floats(tokens, key):
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise ConfigError(f"non-numeric value in {key}: {' '.join(tokens)}", key) from exc


def _parse_potential(spec, key, s_max, base_dir, V=None):
    tok = spec.split()
    if not tok:
        raise ConfigError(f"empty potential spec for {key}", key)
    kind, args = tok[0].lower(), tok[1:]
    try:
        if kind in ("lj", "lennard-jones", "lennardjones"):
            nums = _floats(args, key)
            m = nums[0] if len(nums) > 0 else 6.0
            n = nums[1] if len(nums) > 1 else 12.0
            if len(nums) >= 3:
                return LennardJones(m=m, n=n, r0=nums[2], s_max=s_max)
            return calibrated_lj(m, n, s_max=s_max)
        if kind in ("harmonic", "harmonicnn", "nn"):
            k0 = _floats(args[:1], key)[0] if args else 1.0
            return HarmonicNN(k0=k0)
        if kind == "gaussian":
            if args and args[0].lower() == "matched":
                if V is None:
                    return "matched"
                width = _floats(args[1:2], key)[0] if len(args) > 1 else 0.5
                return matched_gaussian(elastic_alpha(V).alpha, width=width, s_max=s_max)
            amp, width = _floats(args[:2], key)
            return Gaussian(amp=amp, width=width, s_max=s_max)
        if kind in ("tabulated", "table", "csv"):
            if not args:
                raise ConfigError(f"{key}: tabulated potential needs a CSV path", key)
            path = args[0] if os.path.isabs(args[0]) else os.path.join(base_dir, args[0])
            if not os.path.exists(path):
                raise ConfigError(f"{key}: file not found: {path}", key)
            return Tabulated.from_csv(path, s_max=s_max)
    except ConfigError:
        raise
    except (ValueError, DislocoreError) as exc:
        raise ConfigError(f"{key}: {exc}", key) from exc
    raise ConfigError(f"{key}: unknown potential kind {kind!r}", key)


def _to_int(v, key):
    try:
        return int(v)
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {v!r}", key) from exc


def _to_float(v, key):
    try:
        return float(v)
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got {v!r}", key) from exc


def _eps_list(v, key):
    vals = [_to_float(t, key) for t in v.replace(",", " ").split()]
    if not vals:
        raise ConfigError(f"{key} is empty", key)
    if any(e <= 0 or e >= 1 for e in vals):
        raise ConfigError(f"{key}: every eps must lie in (0, 1)", key)
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"{key} must be strictly decreasing", key)
    return vals


def parse_config_text(text, base_dir="."):
    cfg = RunConfig(base_dir=base_dir)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", f"line {lineno}")
        key, val = (p.strip() for p in line.split("=", 1))
        _apply(cfg, key, val)
    return cfg


def _apply(cfg, key, val):
    simple = {
        "potential.intra": ("intra", str),
        "potential.inter": ("inter", str),
        "potential.s_max": ("s_max", _to_int),
        "gamma.grid": ("gamma_grid", _to_int),
        "pn.L": ("pn_L", _to_float),
        "pn.tol": ("pn_tol", _to_float),
        "lattice.eps": ("eps", _to_float),
        "lattice.N": ("N", _to_int),
        "lattice.s_max": ("s_max", _to_int),
        "solver.mode": ("mode", str),
        "solver.tol": ("tol", _to_float),
        "solver.max_iter": ("max_iter", _to_int),
        "sweep.eps_list": ("eps_list", _eps_list),
        "stability.N": ("kappa_grid", _to_int),
        "seed": ("seed", _to_int),
    }
    if key in simple:
        attr, conv = simple[key]
        value = conv(val) if conv is str else conv(val, key)
        setattr(cfg, attr, value)
    elif key.startswith("gammafit."):
        name = key.split(".", 1)[1]
        if name not in cfg.gammafit:
            raise ConfigError(f"unknown key {key}", key)
        cfg.gammafit[name] = _to_float(val, key)
    elif key.startswith("output."):
        cfg.outputs[key.split(".", 1)[1]] = val
    else:
        raise ConfigError(f"unknown key {key}", key)
    _validate(cfg, key)


def _validate(cfg, key):
    if cfg.mode not in MODES:
        raise ConfigError(f"solver.mode must be one of {MODES}", "solver.mode")
    if cfg.s_max < 1:
        raise ConfigError("s_max must be >= 1", key)
    if not 0 < cfg.eps < 1:
        raise ConfigError("lattice.eps must lie in (0, 1)", "lattice.eps")
    if cfg.tol <= 0 or cfg.pn_tol <= 0:
        raise ConfigError("tolerances must be positive", key)
    if cfg.gamma_grid < 16:
        raise ConfigError("gamma.grid must be >= 16", "gamma.grid")
    if cfg.kappa_grid < 2 or cfg.kappa_grid % 2:
        raise ConfigError("stability.N must be a positive even integer", "stability.N")
    if cfg.gammafit["a"] <= 0:
        raise ConfigError("gammafit.a must be positive", "gammafit.a")


def load_config(path):
    """Read a run configuration; a missing file raises ConfigError naming the path."""
    if path is None:
        return RunConfig()
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}", path)
    with open(path) as fh:
        text = fh.read()
    return parse_config_text(text, base_dir=os.path.dirname(os.path.abspath(path)))
