"""Velocity lattices, periodic spatial grids and sphere quadrature."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError, ShapeError

SUPPORTED_ORDERS = (4, 6, 8, 10, 12, 16)


def tree_sum(values, axis=-1):
    """Pairwise sum along `axis` with a fixed halving order.

    The result depends only on the array length, never on memory layout or
    thread count, which keeps reductions bit-reproducible.
    """
    x = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
    n = x.shape[-1]
    if n == 0:
        return np.zeros(x.shape[:-1])
    size = 1 << (n - 1).bit_length()
    if size != n:
        pad = np.zeros(x.shape[:-1] + (size - n,))
        x = np.concatenate([x, pad], axis=-1)
    while x.shape[-1] > 1:
        x = x[..., 0::2] + x[..., 1::2]
    return x[..., 0]


@dataclass(frozen=True)
class VelocityGrid:
    """Cell-centred cubic lattice covering [-R, R]^3."""

    R: float
    N: int

    def __post_init__(self):
        if self.N < 4 or self.N % 2:
            raise ConfigError("N", f"points per axis must be even and >= 4, got {self.N}")
        if not self.R > 0:
            raise ConfigError("R", f"extent must be positive, got {self.R}")

    @property
    def h(self) -> float:
        return 2.0 * self.R / self.N

    @property
    def weight(self) -> float:
        return self.h ** 3

    @property
    def size(self) -> int:
        return self.N ** 3

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.R + self.h * (np.arange(self.N) + 0.5)

    @cached_property
    def nodes(self) -> np.ndarray:
        """(N^3, 3) node coordinates, first axis slowest."""
        a = self.axis
        g = np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1)
        return g.reshape(-1, 3)

    def ball_mask(self, center, radius) -> np.ndarray:
        d = self.nodes - np.asarray(center, dtype=float)
        return np.einsum("ij,ij->i", d, d) <= radius * radius


def quad_v(values, grid: VelocityGrid):
    """h^3 times the tree-ordered sum over the last axis."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.size:
        raise ShapeError(f"expected {grid.size} node values, got {values.shape[-1]}")
    return grid.weight * tree_sum(values, axis=-1)


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic grid of M cells per axis on a torus of period Lx."""

    Lx: float = 2.0 * np.pi
    M: int = 64
    d: int = 1

    def __post_init__(self):
        if self.d not in (1, 3):
            raise ConfigError("d", "spatial dimension must be 1 or 3")
        if self.M < 4:
            raise ConfigError("M", "need at least 4 cells")
        if not self.Lx > 0:
            raise ConfigError("Lx", "period must be positive")

    @property
    def dx(self) -> float:
        return self.Lx / self.M

    @property
    def shape(self) -> tuple:
        return (self.M,) * self.d

    @cached_property
    def x(self) -> np.ndarray:
        return self.dx * (np.arange(self.M) + 0.5)

    def coords(self):
        if self.d == 1:
            return (self.x,)
        return tuple(np.meshgrid(self.x, self.x, self.x, indexing="ij"))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.dx)

    def ddx(self, f, axis=0):
        """Second-order centred difference along spatial axis `axis`.

        Spatial axes are the trailing `d` axes of f.
        """
        ax = f.ndim - self.d + axis
        return (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2.0 * self.dx)

    def integrate(self, f):
        """Cell sum times cell volume over the trailing d axes."""
        f = np.asarray(f, dtype=float)
        lead = f.shape[: f.ndim - self.d]
        return self.dx ** self.d * tree_sum(f.reshape(lead + (-1,)), axis=-1)


@dataclass(frozen=True)
class AngularRule:
    """Product rule on the sphere: Gauss-Legendre in cos(theta) times trapezoid in phi.

    The cos(theta) nodes are mirrored about zero, so the rule is invariant
    under omega -> -omega and the collision sums can run over the upper
    hemisphere with doubled weights.
    """

    order: int
    mu: np.ndarray = field(repr=False)        # cos(theta) nodes in (0, 1)
    mu_w: np.ndarray = field(repr=False)      # matching weights, sum 1
    phi: np.ndarray = field(repr=False)

    @property
    def phi_w(self) -> float:
        return 2.0 * np.pi / len(self.phi)

    @cached_property
    def hemisphere(self):
        """(local directions with pole along z, weights) for the upper half, weights doubled."""
        mu, ph = np.meshgrid(self.mu, self.phi, indexing="ij")
        st = np.sqrt(1.0 - mu ** 2)
        dirs = np.stack([st * np.cos(ph), st * np.sin(ph), mu], axis=-1).reshape(-1, 3)
        w = 2.0 * np.repeat(self.mu_w, len(self.phi)) * self.phi_w
        return dirs, w

    @cached_property
    def directions(self) -> np.ndarray:
        d, _ = self.hemisphere
        return np.concatenate([d, -d])

    @cached_property
    def weights(self) -> np.ndarray:
        _, w = self.hemisphere
        return np.concatenate([w, w]) / 2.0

    def integrate(self, f):
        """Integrate a callable of (n, 3) unit vectors over the sphere."""
        return float(np.dot(self.weights, f(self.directions)))


def lebedev_like_rule(order: int = 6) -> AngularRule:
    if order not in SUPPORTED_ORDERS:
        raise ConfigError("angular_order", f"supported orders are {SUPPORTED_ORDERS}, got {order}")
    x, w = np.polynomial.legendre.leggauss(order // 2)
    mu = 0.5 * (x + 1.0)
    mu_w = 0.5 * w
    phi = (np.arange(order) + 0.5) * 2.0 * np.pi / order
    return AngularRule(order=order, mu=mu, mu_w=mu_w, phi=phi)


def frame_from(axis):
    """Orthonormal (e1, e2, a) with a parallel to `axis`, sign-normalised.

    Both a and -a give the same frame, so a pair (v, v*) and its swap share
    the same set of collision directions.
    """
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    for c in a:
        if c != 0.0:
            if c < 0.0:
                a = -a
            break
    ref = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(a, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    return e1, e2, a
