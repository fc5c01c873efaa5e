"""Flat key=value configuration with section prefixes, plus hashing.

Example::

    grid.h = 0.00390625
    grid.R = 0.5
    grid.shape = half_disk
    solver.grad_tol = 1e-10

Identical configs hash identically; the hash names output directories so
reruns never clobber.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace

# frozen by the calibration sweep over {0, 1, 2, 4, 8} on the analytic corpus
# (plane, canonical profile, one-phase example; radii in [16h, 1/4]): the
# smallest value with zero monotonicity violations is 0.
C_MONO_DEFAULT = 0.0


@dataclass(frozen=True)
class SolverConfig:
    grid_h: float = 1.0 / 256
    grid_R: float = 1.0
    grid_shape: str = "half_disk"
    sigma: float = 0.1
    beta_min: float = 0.3
    c_mono: float = C_MONO_DEFAULT
    theta: float = 0.01
    mu: float = 0.5
    epsilon0: float = 0.2
    delta: float = 0.1
    pde_tol: float = 1e-8
    vi_tol: float = 1e-10
    grad_tol: float = 1e-8
    mono_tol: float = 0.02
    max_iters: int = 200
    seed: int = 0
    # one-phase front polish
    fb_max_outer: int = 60
    fb_tol: float = 0.02          # in units of h
    fb_relax: float = 0.7
    level_mult: float = 1.2
    penalty_stages: tuple = (8.0, 4.0, 2.0, 1.0)  # in units of h
    # signorini relaxation
    max_sweeps: int = 200_000
    omega: float = 0.0            # 0 -> optimal-SOR formula
    # problem selection for the CLI front end
    data_kind: str = "example"
    coeff_q: str = "example"
    domain_g: str = ""            # comma-separated polynomial coefficients

    def __post_init__(self):
        for name in ("pde_tol", "vi_tol", "grad_tol", "mono_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.sigma < 0.5:
            raise ValueError("sigma must lie in (0, 1/2)")
        for name in ("theta", "mu"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


_KEYMAP = {
    "grid.h": ("grid_h", float),
    "grid.R": ("grid_R", float),
    "grid.shape": ("grid_shape", str),
    "freq.sigma": ("sigma", float),
    "freq.C_mono": ("c_mono", float),
    "freq.mono_tol": ("mono_tol", float),
    "reg.beta_min": ("beta_min", float),
    "reg.theta": ("theta", float),
    "reg.mu": ("mu", float),
    "reg.epsilon0": ("epsilon0", float),
    "reg.delta": ("delta", float),
    "solver.pde_tol": ("pde_tol", float),
    "solver.vi_tol": ("vi_tol", float),
    "solver.grad_tol": ("grad_tol", float),
    "solver.max_iters": ("max_iters", int),
    "solver.max_sweeps": ("max_sweeps", int),
    "solver.omega": ("omega", float),
    "solver.fb_max_outer": ("fb_max_outer", int),
    "solver.fb_tol": ("fb_tol", float),
    "solver.fb_relax": ("fb_relax", float),
    "solver.level_mult": ("level_mult", float),
    "run.seed": ("seed", int),
    "domain.shape": ("grid_shape", str),
    "domain.g": ("domain_g", str),
    "data.kind": ("data_kind", str),
    "coeff.Q": ("coeff_q", str),
}
_ATTR_TO_KEY = {attr: key for key, (attr, _) in _KEYMAP.items()}


def parse_config(text: str) -> SolverConfig:
    kw = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _KEYMAP:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        attr, typ = _KEYMAP[key]
        kw[attr] = typ(val.strip())
    return SolverConfig(**kw)


def serialize_config(cfg: SolverConfig) -> str:
    lines = []
    for f in fields(cfg):
        key = _ATTR_TO_KEY.get(f.name)
        if key is None:
            continue
        v = getattr(cfg, f.name)
        text = v if isinstance(v, str) else repr(v)
        lines.append(f"{key} = {text}")
    return "\n".join(sorted(lines)) + "\n"


def config_hash(cfg: SolverConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:16]
