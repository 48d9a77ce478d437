"""Species parameters, bi-Maxwellians, moments and collision invariants."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateStateError, DomainError, FrameInfeasibleError
from .grids import VelocityGrid, quad_v

SPECIES = ("A", "B")


def b_abs_cos(c):
    return np.abs(c)


def b_cos_squared(c):
    return c * c


B_FORMS = {"abs_cos": b_abs_cos, "cos_squared": b_cos_squared}


@dataclass(frozen=True)
class SpeciesPair:
    m_A: float = 1.0
    m_B: float = 2.0
    gamma: float = 1.0
    C_phi: tuple = ((1.0, 1.0), (1.0, 1.0))
    C_b: float = 1.0
    b_form: str = "abs_cos"

    def __post_init__(self):
        if not (self.m_A > 0 and self.m_B > 0):
            raise ConfigError("species.m", "masses must be positive")
        if not (-3.0 < self.gamma <= 1.0):
            raise ConfigError("species.gamma", f"gamma must lie in (-3, 1], got {self.gamma}")
        C = np.asarray(self.C_phi, dtype=float)
        if C.shape != (2, 2) or np.any(C <= 0):
            raise ConfigError("species.C_phi", "need a positive 2x2 table")
        if C[0, 1] != C[1, 0]:
            raise ConfigError("species.C_phi", "C_phi must be symmetric in the species")
        if not self.C_b > 0:
            raise ConfigError("species.C_b", "C_b must be positive")
        if self.b_form not in B_FORMS:
            raise ConfigError("species.b_form", f"unknown angular function {self.b_form!r}")

    @property
    def masses(self) -> tuple:
        return (self.m_A, self.m_B)

    def mass(self, a: int) -> float:
        return self.masses[a]

    def b(self, cos_theta):
        """Angular factor; 0 <= b <= C_b|cos| for every shipped form."""
        return self.C_b * B_FORMS[self.b_form](np.asarray(cos_theta, dtype=float))

    def b_integral(self) -> float:
        """Integral of b(cos theta) over the unit sphere."""
        return {"abs_cos": 2.0 * np.pi, "cos_squared": 4.0 * np.pi / 3.0}[self.b_form] * self.C_b

    @property
    def mass_ratio_bound(self) -> float:
        return (self.m_A + self.m_B) / max(self.m_A, self.m_B)

    @property
    def q_lower(self) -> float:
        return max(self.m_A, self.m_B) / (self.m_A + self.m_B)


@dataclass(frozen=True)
class MaxwellParams:
    n: float = 1.0
    u: tuple = (0.0, 0.0, 0.0)
    theta: float = 1.0

    def __post_init__(self):
        if not self.n > 0:
            raise DomainError(f"density must be positive, got {self.n}")
        if not self.theta > 0:
            raise DomainError(f"temperature must be positive, got {self.theta}")

    @property
    def uvec(self) -> np.ndarray:
        return np.asarray(self.u, dtype=float)


def maxwellian(p: MaxwellParams, m: float, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    d = v - p.uvec
    r2 = np.sum(d * d, axis=-1)
    return p.n * (m / (2.0 * np.pi * p.theta)) ** 1.5 * np.exp(-m * r2 / (2.0 * p.theta))


def bi_maxwellian(params, species: SpeciesPair, grid: VelocityGrid) -> np.ndarray:
    """(2, N^3) array of the two species Maxwellians on the grid nodes."""
    return np.stack([maxwellian(params[a], species.mass(a), grid.nodes) for a in range(2)])


def shared_params(nA, nB, u=(0.0, 0.0, 0.0), theta=1.0):
    u = tuple(float(x) for x in u)
    return (MaxwellParams(nA, u, theta), MaxwellParams(nB, u, theta))


def weight(v, l: float = 25.0 / 4.0):
    """w(v) = (1 + |v|)^l."""
    return (1.0 + np.linalg.norm(np.asarray(v, dtype=float), axis=-1)) ** l


@dataclass(frozen=True)
class Moments:
    n_species: np.ndarray       # (2,)
    flux: np.ndarray            # (2, 3) int v F
    energy: np.ndarray          # (2,) int m |v - u|^2 F about the mixture velocity
    n: float
    rho: float
    u: np.ndarray
    theta: float


def moments(F, species: SpeciesPair, grid: VelocityGrid) -> Moments:
    F = np.asarray(F, dtype=float)
    v = grid.nodes
    dens = quad_v(F, grid)
    if not np.all(np.isfinite(dens)) or dens.sum() <= 0.0:
        raise DegenerateStateError("total mass is zero")
    flux = np.stack([quad_v(F * v[:, k], grid) for k in range(3)], axis=-1)
    m = np.asarray(species.masses)
    rho = float(np.dot(m, dens))
    u = (m[:, None] * flux).sum(axis=0) / rho
    d = v - u
    r2 = np.einsum("ij,ij->i", d, d)
    energy = m * quad_v(F * r2, grid)
    n = float(dens.sum())
    theta = float(energy.sum() / (3.0 * n))
    return Moments(dens, flux, energy, n, rho, u, theta)


def collision_invariant_vectors(species: SpeciesPair, grid: VelocityGrid) -> np.ndarray:
    """(6, 2, N^3): e1, e2, m v_1, m v_2, m v_3, m |v|^2."""
    v = grid.nodes
    m = np.asarray(species.masses)[:, None]
    one = np.ones(grid.size)
    out = np.zeros((6, 2, grid.size))
    out[0, 0] = one
    out[1, 1] = one
    for k in range(3):
        out[2 + k] = m * v[:, k]
    out[5] = m * np.einsum("ij,ij->i", v, v)
    return out


@dataclass(frozen=True)
class GlobalFrame:
    theta_M: float
    species: SpeciesPair
    q_tilde: float
    l: float = 25.0 / 4.0
    theta_max: float = field(default=None)

    def __post_init__(self):
        if not self.theta_M > 0:
            raise DomainError("theta_M must be positive")
        if not (self.species.q_lower < self.q_tilde < 1.0):
            raise ConfigError("frame.q_tilde", f"need {self.species.q_lower} < q_tilde < 1")
        if self.l < 25.0 / 4.0 - 1e-12:
            raise ConfigError("frame.l", "weight exponent must be at least 25/4")

    @property
    def mass_ratio_bound(self) -> float:
        return self.species.mass_ratio_bound

    def mu_M(self, a: int, v) -> np.ndarray:
        return maxwellian(MaxwellParams(1.0, (0.0, 0.0, 0.0), self.theta_M), self.species.mass(a), v)

    def w(self, v) -> np.ndarray:
        return weight(v, self.l)


def default_q_tilde(species: SpeciesPair, theta_ratio: float = 1.0) -> float:
    """Midpoint of the admissible q-interval.

    The upper end is 1, tightened to theta_M/max(theta) when that is smaller,
    because mu_delta <= C mu_M^q needs q*theta < theta_M for every sampled theta.
    """
    hi = min(1.0, 1.0 / theta_ratio)
    lo = species.q_lower
    if hi <= lo:
        raise FrameInfeasibleError(
            f"no admissible q: temperature ratio {theta_ratio:.4g} leaves an empty interval")
    return 0.5 * (lo + hi)


def select_theta_M(theta_field, species: SpeciesPair, l: float = 25.0 / 4.0,
                   q_tilde: float | None = None) -> GlobalFrame:
    th = np.asarray(theta_field, dtype=float)
    if not np.all(th > 0):
        raise DomainError("temperature field must be strictly positive")
    tmin, tmax = float(th.min()), float(th.max())
    if tmax > species.mass_ratio_bound * tmin:
        raise FrameInfeasibleError(
            f"max theta {tmax:.6g} exceeds {species.mass_ratio_bound:.6g} * min theta {tmin:.6g}")
    q = default_q_tilde(species, tmax / tmin) if q_tilde is None else q_tilde
    return GlobalFrame(theta_M=tmin, species=species, q_tilde=q, l=l, theta_max=tmax)
