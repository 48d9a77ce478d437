"""Run configuration: JSON loading, validation and the run manifest."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass
class SpeciesConfig:
    m_A: float = 1.0
    m_B: float = 2.0
    gamma: float = 1.0
    C_phi: list = field(default_factory=lambda: [[1.0, 1.0], [1.0, 1.0]])
    C_b: float = 1.0
    b_form: str = "abs_cos"


@dataclass
class VelocityConfig:
    R: float | None = None          # None: 6 thermal widths of the lighter species at theta = 1
    N: int = 16


@dataclass
class SpatialConfig:
    d: int = 1
    Lx: float = 2.0 * math.pi
    M: int = 256


@dataclass
class FrameConfig:
    l: float = 25.0 / 4.0
    q_tilde: float | None = None


@dataclass
class StudyConfig:
    deltas: list = field(default_factory=lambda: [0.1, 0.05, 0.025])
    eps: list = field(default_factory=lambda: [0.04, 0.02, 0.01])
    proxy_eps: list = field(default_factory=lambda: [0.04, 0.01, 0.0025])
    sweep_eps: float = 0.01
    sweep_deltas: list = field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05, 0.02])
    t_end: float = 0.5
    cfl: float = 0.4
    acoustic_t_end: float = 5.0
    kinetic_N: int = 14
    residual_M: int = 64
    residual_delta: float = 0.1
    proxy_M: int = 128
    h_states: int = 20
    export_operator: bool = False


@dataclass
class RunConfig:
    species: SpeciesConfig = field(default_factory=SpeciesConfig)
    velocity: VelocityConfig = field(default_factory=VelocityConfig)
    spatial: SpatialConfig = field(default_factory=SpatialConfig)
    angular_order: int = 6
    cutoff_m: float = 0.2
    frame: FrameConfig = field(default_factory=FrameConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    out: str = "out"
    seed: int = 0

    # derived objects -------------------------------------------------------
    def species_pair(self):
        from .species import SpeciesPair
        s = self.species
        return SpeciesPair(s.m_A, s.m_B, s.gamma, tuple(tuple(r) for r in s.C_phi), s.C_b, s.b_form)

    def velocity_grid(self, N=None):
        from .grids import VelocityGrid
        return VelocityGrid(self.velocity.R, N or self.velocity.N)

    def spatial_grid(self, M=None, d=None):
        from .grids import SpatialGrid
        return SpatialGrid(self.spatial.Lx, M or self.spatial.M, d or self.spatial.d)

    def cutoff(self):
        from .kernel_estimates import CutoffSpec
        return CutoffSpec(self.cutoff_m)

    def kernel_frame(self):
        from .kernel_estimates import KernelFrame
        from .species import select_theta_M, shared_params
        glob = select_theta_M([1.0], self.species_pair(), self.frame.l, self.frame.q_tilde)
        return KernelFrame(glob, shared_params(1.0, 1.0))

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        """sha256 of the resolved config without the output directory."""
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _build(cls, data, prefix, defaulted):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "config", "expected a JSON object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{prefix}{unknown[0]}", "unknown key")
    kw = {}
    for name, f in names.items():
        key = f"{prefix}{name}"
        sub = _SECTIONS.get((cls, name))
        if sub is not None:
            kw[name] = _build(sub, data.get(name, {}), key + ".", defaulted)
            continue
        if name in data:
            kw[name] = data[name]
        else:
            defaulted.append(key)
    return cls(**kw)


_SECTIONS = {
    (RunConfig, "species"): SpeciesConfig,
    (RunConfig, "velocity"): VelocityConfig,
    (RunConfig, "spatial"): SpatialConfig,
    (RunConfig, "frame"): FrameConfig,
    (RunConfig, "study"): StudyConfig,
}


def _num(v, key, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(key, f"expected an integer, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(key, "must be finite")
    return int(v) if integer else float(v)


def _decreasing(v, key):
    if not isinstance(v, list) or len(v) < 3:
        raise ConfigError(key, "need a list of at least three values")
    v = [_num(x, key) for x in v]
    if any(b >= a for a, b in zip(v, v[1:])) or v[-1] <= 0:
        raise ConfigError(key, "values must be positive and strictly decreasing")
    return v


def validate(cfg: RunConfig) -> RunConfig:
    """Coerce types, fill derived defaults and re-run the owning types' checks."""
    from .grids import SUPPORTED_ORDERS

    s = cfg.species
    s.m_A, s.m_B, s.C_b = _num(s.m_A, "species.m_A"), _num(s.m_B, "species.m_B"), _num(s.C_b, "species.C_b")
    s.gamma = _num(s.gamma, "species.gamma")
    if not -3.0 < s.gamma <= 1.0:
        raise ConfigError("species.gamma", f"gamma must lie in (-3, 1], got {s.gamma}")
    s.C_phi = [[_num(x, "species.C_phi") for x in row] for row in s.C_phi]
    pair = cfg.species_pair()

    v = cfg.velocity
    v.N = _num(v.N, "velocity.N", integer=True)
    if v.N < 4 or v.N % 2:
        raise ConfigError("velocity.N", f"N must be even and at least 4, got {v.N}")
    if v.R is None:
        v.R = 6.0 / math.sqrt(min(pair.masses))
    v.R = _num(v.R, "velocity.R")
    if v.R <= 0:
        raise ConfigError("velocity.R", "must be positive")

    sp = cfg.spatial
    sp.d, sp.M, sp.Lx = _num(sp.d, "spatial.d", True), _num(sp.M, "spatial.M", True), _num(sp.Lx, "spatial.Lx")
    if sp.d not in (1, 3):
        raise ConfigError("spatial.d", "dimension must be 1 or 3")
    if sp.M < 8:
        raise ConfigError("spatial.M", "need at least 8 cells")
    if sp.Lx <= 0:
        raise ConfigError("spatial.Lx", "must be positive")

    cfg.angular_order = _num(cfg.angular_order, "angular_order", True)
    if cfg.angular_order not in SUPPORTED_ORDERS:
        raise ConfigError("angular_order", f"supported orders are {SUPPORTED_ORDERS}")
    cfg.cutoff_m = _num(cfg.cutoff_m, "cutoff_m")
    cfg.cutoff()

    fr = cfg.frame
    fr.l = _num(fr.l, "frame.l")
    if fr.l < 25.0 / 4.0:
        raise ConfigError("frame.l", "weight exponent must be at least 25/4")
    if fr.q_tilde is not None:
        fr.q_tilde = _num(fr.q_tilde, "frame.q_tilde")
        if not pair.q_lower < fr.q_tilde < 1.0:
            raise ConfigError("frame.q_tilde", f"need {pair.q_lower:.4g} < q_tilde < 1")

    st = cfg.study
    st.deltas = _decreasing(st.deltas, "study.deltas")
    st.eps = _decreasing(st.eps, "study.eps")
    st.proxy_eps = _decreasing(st.proxy_eps, "study.proxy_eps")
    if not isinstance(st.sweep_deltas, list) or len(st.sweep_deltas) < 3:
        raise ConfigError("study.sweep_deltas", "need at least three values")
    st.sweep_deltas = [_num(x, "study.sweep_deltas") for x in st.sweep_deltas]
    for key in ("sweep_eps", "t_end", "cfl", "acoustic_t_end", "residual_delta"):
        val = _num(getattr(st, key), f"study.{key}")
        if val <= 0:
            raise ConfigError(f"study.{key}", "must be positive")
        setattr(st, key, val)
    if st.cfl > 1.0:
        raise ConfigError("study.cfl", "CFL number must lie in (0, 1]")
    if any(d <= 0 or d >= 1 for d in st.deltas + st.sweep_deltas):
        raise ConfigError("study.deltas", "amplitudes must lie in (0, 1)")
    for key in ("kinetic_N", "residual_M", "proxy_M", "h_states"):
        setattr(st, key, _num(getattr(st, key), f"study.{key}", True))
    if st.kinetic_N < 4 or st.kinetic_N % 2:
        raise ConfigError("study.kinetic_N", "N must be even and at least 4")
    if st.residual_M < 8 or st.proxy_M < 8:
        raise ConfigError("study.residual_M", "need at least 8 cells")
    if not isinstance(st.export_operator, bool):
        raise ConfigError("study.export_operator", "expected true or false")

    if not isinstance(cfg.out, str) or not cfg.out:
        raise ConfigError("out", "expected a directory name")
    cfg.seed = _num(cfg.seed, "seed", True)
    if cfg.seed < 0:
        raise ConfigError("seed", "must be nonnegative")
    return cfg


def config_from_dict(data: dict):
    """(validated RunConfig, list of keys filled with defaults)."""
    defaulted = []
    cfg = _build(RunConfig, data, "", defaulted)
    return validate(cfg), defaulted


def load_config(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"no such file: {p}")
    try:
        text = p.read_bytes().decode("utf-8")
    except UnicodeDecodeError as e:
        raise ConfigError("config", f"not UTF-8: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"parse error at line {e.lineno}, column {e.colno}: {e.msg}") from e
    return config_from_dict(data)


def versions():
    import numba
    import numpy
    import scipy

    from . import __version__
    return {"artifact": __version__, "python": platform.python_version(), "numpy": numpy.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def manifest(cfg: RunConfig, defaulted, command):
    d = cfg.to_dict()
    d.pop("out")
    return {"command": command, "config": d, "config_hash": cfg.digest(),
            "defaults_applied": sorted(defaulted), "seed": cfg.seed, "versions": versions()}
