"""Unequal-mass bilinear collision operators on the velocity lattice."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from . import _kernels
from .errors import ConfigError, DomainError, FrameError, ShapeError
from .grids import AngularRule, VelocityGrid, lebedev_like_rule, quad_v, tree_sum
from .species import SpeciesPair, collision_invariant_vectors

FRAMES = ("raw", "fluct", "weighted")
_B_CODES = {"abs_cos": 0, "cos_squared": 1}


@dataclass(frozen=True)
class CollisionPair:
    v: np.ndarray
    v_star: np.ndarray
    omega: np.ndarray
    alpha: int = 0
    beta: int = 1

    def __post_init__(self):
        if abs(np.linalg.norm(self.omega) - 1.0) > 1e-14:
            raise DomainError("omega must be a unit vector")


def post_collision(v, v_star, omega, m_a, m_b):
    """Post-collision velocities of an (m_a, m_b) pair; broadcasts over leading axes."""
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if np.any(np.abs(np.linalg.norm(omega, axis=-1) - 1.0) > 1e-12):
        raise DomainError("omega must be a unit vector")
    proj = np.sum((v - v_star) * omega, axis=-1, keepdims=True) * omega
    M = m_a + m_b
    return v - (2.0 * m_b / M) * proj, v_star + (2.0 * m_a / M) * proj


def kernel_B(r, cos_theta, a, b, species: SpeciesPair):
    r = np.asarray(r, dtype=float)
    if species.gamma < 0 and np.any(r == 0.0):
        raise DomainError("relative speed 0 with a singular kinetic factor")
    return species.C_phi[a][b] * r ** species.gamma * species.b(cos_theta)


@dataclass
class DistributionField:
    """Per-species node values with a frame tag; shape (..., 2, N^3)."""

    values: np.ndarray
    grid: VelocityGrid
    frame: str = "raw"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.frame not in FRAMES:
            raise ConfigError("frame", f"unknown frame {self.frame!r}")
        if self.values.ndim < 2 or self.values.shape[-2:] != (2, self.grid.size):
            raise ShapeError(f"expected (..., 2, {self.grid.size}), got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("non-finite node values")
        if self.frame == "raw" and np.any(self.values < 0.0):
            raise DomainError("raw distributions must be nonnegative")


def _raw(F, grid):
    if isinstance(F, DistributionField):
        if F.frame != "raw":
            raise FrameError(f"collision operator needs the raw frame, got {F.frame!r}")
        return F.values
    F = np.asarray(F, dtype=float)
    if F.shape[-1] != grid.size:
        raise ShapeError(f"expected {grid.size} node values, got {F.shape[-1]}")
    return F


@dataclass
class CollisionOperator:
    """Lattice realisation of Q^{ab}.

    Each lattice pair (v_i, v_j) and sphere node omega removes F_i G_j from
    both pre-collision nodes and deposits it around v' and v_*' with tensor
    Lagrange weights of half-width `stencil`.  Pairs with |v - v_*| > umax
    and pairs with F_i G_j below rel_threshold * max F * max G are skipped.
    """

    species: SpeciesPair
    grid: VelocityGrid
    angular: AngularRule = field(default_factory=lambda: lebedev_like_rule(6))
    stencil: int = 2
    rel_threshold: float = 1e-10
    umax: float | None = None

    def __post_init__(self):
        if self.stencil not in (1, 2, 3):
            raise ConfigError("collision.stencil", "half-width must be 1, 2 or 3")
        if self.rel_threshold < 0:
            raise ConfigError("collision.rel_threshold", "must be nonnegative")
        if self.umax is None:
            self.umax = 2.0 * self.grid.R
        self._dirs, self._dw = self.angular.hemisphere
        self._all = np.ones(self.grid.size, dtype=np.bool_)
        self._ok = _kernels.block_ok(self._all, self.grid.N, self.stencil)

    def _coeffs(self, a, b):
        ma, mb = self.species.mass(a), self.species.mass(b)
        return 2.0 * mb / (ma + mb), 2.0 * ma / (ma + mb)

    def pair(self, F, G, a, b):
        """(Q^{ab}(F, G), Q^{ba}(G, F)); the second entry is None when a == b."""
        F = np.ascontiguousarray(_raw(F, self.grid), dtype=float)
        G = np.ascontiguousarray(_raw(G, self.grid), dtype=float)
        out_a = np.zeros(self.grid.size)
        out_b = np.zeros(self.grid.size)
        scale = max(np.abs(F).max(), 0.0) * max(np.abs(G).max(), 0.0)
        if scale == 0.0:
            return out_a, (None if a == b else out_b)
        ca, cb = self._coeffs(a, b)
        s = self.species
        _kernels.collide_pass(
            F, G, self._all, self._all, self._ok, self._ok, self.grid.N, self.stencil,
            self.grid.h, ca, cb, s.C_phi[a][b] * self.grid.weight, s.gamma,
            self._dirs, self._dw, _B_CODES[s.b_form], s.C_b, self.umax ** 2,
            self.rel_threshold * scale, True, a != b, out_a, out_b)
        return out_a, (None if a == b else out_b)

    def Q_bilinear(self, F, G, a, b):
        return self.pair(F, G, a, b)[0]

    def collision_term(self, F):
        """Vector term (Q^{AA} + Q^{AB}, Q^{BA} + Q^{BB}) for a (2, N^3) raw pair."""
        F = _raw(F, self.grid)
        if F.shape != (2, self.grid.size):
            raise ShapeError(f"expected (2, {self.grid.size}), got {F.shape}")
        qaa, _ = self.pair(F[0], F[0], 0, 0)
        qab, qba = self.pair(F[0], F[1], 0, 1)
        qbb, _ = self.pair(F[1], F[1], 1, 1)
        return np.stack([qaa + qab, qba + qbb])

    def entropy_production(self, F, C=None):
        F = _raw(F, self.grid)
        if np.any(F <= 0.0):
            raise DomainError("entropy production needs a strictly positive state")
        if C is None:
            C = self.collision_term(F)
        return float(tree_sum(quad_v(C * np.log(F), self.grid)))

    def invariant_pairings(self, C):
        """Six pairings <C, Psi_i> and each one relative to <|C|, |Psi_i|>."""
        psi = collision_invariant_vectors(self.species, self.grid)
        raw = np.array([tree_sum(quad_v(C * p, self.grid)) for p in psi])
        scale = np.array([tree_sum(quad_v(np.abs(C * p), self.grid)) for p in psi])
        return raw, np.abs(raw) / np.where(scale > 0, scale, 1.0)

    def q_monte_carlo(self, F, G, a, b, nodes, samples=4096, seed=0):
        """Monte-Carlo estimate of Q^{ab}(F, G) at the listed node indices.

        v_* is drawn uniformly from the grid box and omega uniformly on the
        sphere; post-collision values use cubic spline interpolation with zero
        extension.  Returns (estimate, standard error).
        """
        F = _raw(F, self.grid)
        G = _raw(G, self.grid)
        g = self.grid
        rng = np.random.default_rng(seed)
        N = g.N
        Fc = F.reshape(N, N, N)
        Gc = G.reshape(N, N, N)
        vol = (2.0 * g.R) ** 3 * 4.0 * np.pi
        ma, mb = self.species.mass(a), self.species.mass(b)
        nodes = np.atleast_1d(np.asarray(nodes, dtype=int))
        est = np.empty(len(nodes))
        err = np.empty(len(nodes))

        def idx(x):
            return ((x + g.R) / g.h - 0.5).T

        for n, k in enumerate(nodes):
            v = g.nodes[k]
            vs = rng.uniform(-g.R, g.R, size=(samples, 3))
            om = rng.normal(size=(samples, 3))
            om /= np.linalg.norm(om, axis=1, keepdims=True)
            u = vs - v
            r = np.linalg.norm(u, axis=1)
            cos = np.abs(np.sum(u * om, axis=1)) / np.where(r > 0, r, 1.0)
            Bv = kernel_B(np.where(r > 0, r, 1.0), cos, a, b, self.species) * (r > 0)
            vp, vsp = post_collision(np.broadcast_to(v, vs.shape), vs, om, ma, mb)
            gain = (map_coordinates(Fc, idx(vp), order=3, mode="constant")
                    * map_coordinates(Gc, idx(vsp), order=3, mode="constant"))
            loss = F[k] * map_coordinates(Gc, idx(vs), order=3, mode="constant")
            y = vol * Bv * (gain - loss)
            est[n] = y.mean()
            err[n] = y.std(ddof=1) / np.sqrt(samples)
        return est, err


def seeded_state(species: SpeciesPair, grid: VelocityGrid, seed: int, n_bumps=2):
    """Positive non-equilibrium pair: each species a sum of randomly drifted Maxwellians."""
    from .species import MaxwellParams, maxwellian
    rng = np.random.default_rng(seed)
    F = np.zeros((2, grid.size))
    for a in range(2):
        for _ in range(n_bumps):
            p = MaxwellParams(rng.uniform(0.3, 1.0), tuple(rng.uniform(-0.8, 0.8, 3)), rng.uniform(0.5, 1.3))
            F[a] += maxwellian(p, species.mass(a), grid.nodes)
    return F
