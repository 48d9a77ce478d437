"""Linearised mixture operator L, its kernel, projections and micro solves."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, linalg
from scipy.sparse.linalg import LinearOperator, eigsh

from . import _kernels
from .collision import _B_CODES
from .errors import ConfigError, DomainError, FrameError, NumericalError, SolvabilityError
from .grids import AngularRule, VelocityGrid, lebedev_like_rule
from .species import MaxwellParams, SpeciesPair, maxwellian


def _radial_moment(s, gamma, m, theta):
    """Integral of |w - x|^gamma over a unit-density Maxwellian, |x - u| = s."""
    a = m / (2.0 * theta)
    norm = (a / np.pi) ** 1.5

    def inner(rho):
        if s == 0.0:
            return 2.0 * rho ** gamma
        if gamma == -2.0:
            return np.log((s + rho) / abs(s - rho)) / (s * rho) if rho != s else 0.0
        return ((s + rho) ** (gamma + 2) - abs(s - rho) ** (gamma + 2)) / ((gamma + 2) * s * rho)

    f = lambda rho: 2.0 * np.pi * rho * rho * np.exp(-a * rho * rho) * inner(rho)
    pts = [s] if s > 0 else None
    val, _ = integrate.quad(f, 0.0, np.inf if pts is None else max(4 * s, 50.0 / np.sqrt(a)),
                            points=pts, limit=200)
    return norm * val


def nu_alpha(v, a, params, species: SpeciesPair):
    """Collision frequency sum_b int int B^{ab} mu^b dw dv_* at velocities v."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    out = np.zeros(len(v))
    bint = species.b_integral()
    for b in range(2):
        p = params[b]
        s = np.linalg.norm(v - p.uvec, axis=1)
        uniq, inv = np.unique(np.round(s, 12), return_inverse=True)
        vals = np.array([_radial_moment(x, species.gamma, species.mass(b), p.theta) for x in uniq])
        out += species.C_phi[a][b] * bint * p.n * vals[inv]
    return out


@dataclass
class KernelBasis:
    X: np.ndarray                  # (6, 2, N^3)
    params: tuple
    grid: VelocityGrid
    species: SpeciesPair

    def gram(self):
        return self.grid.weight * np.einsum("isk,jsk->ij", self.X, self.X)


def _check_shared(params):
    pa, pb = params
    if not (np.allclose(pa.uvec, pb.uvec) and np.isclose(pa.theta, pb.theta)):
        raise FrameError("local frame needs a shared bulk velocity and temperature")


def kernel_basis(params, species: SpeciesPair, grid: VelocityGrid) -> KernelBasis:
    """Orthonormal basis of the kernel.

    The momentum vectors carry 1/sqrt(theta rho) so that the continuum Gram
    matrix is the identity for arbitrary masses; a final symmetric
    orthonormalisation removes the lattice quadrature error.
    """
    _check_shared(params)
    pa, pb = params
    u, th = pa.uvec, pa.theta
    n = pa.n + pb.n
    rho = species.m_A * pa.n + species.m_B * pb.n
    v = grid.nodes
    X = np.zeros((6, 2, grid.size))
    for s, p in enumerate(params):
        m = species.mass(s)
        sq = np.sqrt(maxwellian(p, m, v))
        d = v - u
        X[s, s] = sq / np.sqrt(p.n)
        for k in range(3):
            X[2 + k, s] = d[:, k] * m * sq / np.sqrt(th * rho)
        X[5, s] = (m * np.einsum("ij,ij->i", d, d) / th - 3.0) * sq / np.sqrt(6.0 * n)
    # symmetric orthonormalisation in the lattice inner product: same span,
    # nearest orthonormal set to the continuum vectors
    lam, V = np.linalg.eigh(grid.weight * np.einsum("isk,jsk->ij", X, X))
    X = np.einsum("ij,jsk->isk", (V / np.sqrt(lam)) @ V.T, X)
    return KernelBasis(X, tuple(params), grid, species)


def project_macro(f, basis: KernelBasis):
    f = np.asarray(f, dtype=float)
    c = basis.grid.weight * np.einsum("isk,...sk->...i", basis.X, f)
    return np.einsum("...i,isk->...sk", c, basis.X)


@dataclass
class OperatorMatrix:
    """Symmetric matrix of L on the active nodes, species-major."""

    L: np.ndarray
    frame: str
    params: tuple
    grid: VelocityGrid
    species: SpeciesPair
    active: np.ndarray               # (2, N^3) bool
    raw_asymmetry: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def sizes(self):
        return int(self.active[0].sum()), int(self.active[1].sum())

    def restrict(self, f):
        f = np.asarray(f, dtype=float)
        return np.concatenate([f[..., 0, self.active[0]], f[..., 1, self.active[1]]], axis=-1)

    def extend(self, y):
        y = np.asarray(y, dtype=float)
        na, _ = self.sizes
        out = np.zeros(y.shape[:-1] + (2, self.grid.size))
        out[..., 0, self.active[0]] = y[..., :na]
        out[..., 1, self.active[1]] = y[..., na:]
        return out

    def apply(self, f):
        return self.extend(self.restrict(f) @ self.L.T)

    def symmetry_defect(self):
        return float(np.linalg.norm(self.L - self.L.T) / np.linalg.norm(self.L))

    def export(self, path):
        """Flat little-endian float64 matrix plus a JSON sidecar."""
        path = Path(path)
        self.L.astype("<f8").tofile(path)
        side = {
            "rows": self.L.shape[0], "cols": self.L.shape[1], "order": "C",
            "frame": self.frame, "species_sizes": list(self.sizes),
            "params": [{"n": p.n, "u": list(p.u), "theta": p.theta} for p in self.params],
            "grid": {"R": self.grid.R, "N": self.grid.N},
            "active_nodes": [np.flatnonzero(a).tolist() for a in self.active],
        }
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(side))


def default_active(params, species: SpeciesPair, grid: VelocityGrid, widths=6.0):
    """Balls of `widths` thermal widths around the bulk velocity, one per species."""
    return np.stack([grid.ball_mask(p.uvec, widths * np.sqrt(p.theta / species.mass(s)))
                     for s, p in enumerate(params)])


def assemble_L(params, species: SpeciesPair, grid: VelocityGrid,
               angular: AngularRule | None = None, frame="L_delta", stencil=1,
               widths=6.0, rel_threshold=1e-8, umax=None) -> OperatorMatrix:
    """Dense L on a ball of active nodes.

    Rows follow the pre/post form of the linearised integral with
    phi = g / sqrt(mu) interpolated at the post-collision points, so the
    rows annihilate the kernel vectors up to rounding.  The rows are then
    corrected to have range orthogonal to the kernel, L <- (I - P) L, and the
    stored matrix is the symmetric part.  `raw_asymmetry` is the relative
    Frobenius asymmetry before symmetrisation.
    """
    if frame not in ("L_delta", "L_M"):
        raise ConfigError("frame", f"unknown operator frame {frame!r}")
    _check_shared(params)
    angular = angular or lebedev_like_rule(6)
    umax = 2.0 * grid.R if umax is None else umax
    active = default_active(params, species, grid, widths)
    na = int(active[0].sum())
    size = na + int(active[1].sum())
    idx = np.full((2, grid.size), -1, dtype=np.int64)
    idx[0, active[0]] = np.arange(na)
    idx[1, active[1]] = np.arange(na, size)
    mu = np.stack([maxwellian(p, species.mass(s), grid.nodes) for s, p in enumerate(params)])
    sq = np.sqrt(mu)
    isq = np.where(active, 1.0 / np.where(active, sq, 1.0), 0.0)
    dirs, dw = angular.hemisphere
    L = np.zeros((size, size))
    nu = np.zeros(size)
    for a in range(2):
        rows = np.flatnonzero(active[a])
        for b in range(2):
            ma, mb = species.mass(a), species.mass(b)
            _kernels.linear_rows(
                rows, mu[b], sq[a], sq[b], isq[a], isq[b],
                2.0 * mb / (ma + mb), 2.0 * ma / (ma + mb),
                idx[a], idx[b], grid.N, stencil, grid.h,
                species.C_phi[a][b] * grid.weight, species.gamma, dirs, dw,
                _B_CODES[species.b_form], species.C_b, umax ** 2,
                rel_threshold * mu[b].max() * sq[a].max(), L, nu)
    L[np.diag_indices(size)] += nu
    basis = kernel_basis(params, species, grid)
    Q, _ = np.linalg.qr(np.concatenate([basis.X[:, 0, active[0]], basis.X[:, 1, active[1]]], axis=1).T)
    L -= Q @ (Q.T @ L)
    dif, tot = _kernels.symmetrize_inplace(L, 256)
    return OperatorMatrix(L, frame, tuple(params), grid, species, active, dif / tot,
                          {"stencil": stencil, "widths": widths, "umax": umax, "nu": nu})


def kernel_residuals(op: OperatorMatrix, basis: KernelBasis):
    """||L X_i|| / ||X_i|| for the six kernel vectors."""
    out = []
    for x in basis.X:
        y = op.restrict(x)
        out.append(float(np.linalg.norm(op.L @ y) / np.linalg.norm(y)))
    return np.array(out)


def _basis_on_active(op: OperatorMatrix, basis: KernelBasis):
    Y = op.restrict(basis.X).T
    Q, _ = np.linalg.qr(Y)
    return Q


class MicroSolver:
    """Factorised micro solve for many right-hand sides.

    Solves L f = (I - P) R on the complement of the kernel.  With
    `tol_compat` set, right-hand sides whose kernel overlap exceeds
    tol_compat * |R| are rejected; otherwise the overlap is projected out and
    reported.
    """

    def __init__(self, op: OperatorMatrix, basis: KernelBasis, ridge=1e-12):
        self.op = op
        Q = _basis_on_active(op, basis)
        L = op.L
        LQ = L @ Q
        A = L - Q @ LQ.T - LQ @ Q.T + Q @ (Q.T @ LQ) @ Q.T + Q @ Q.T
        A[np.diag_indices_from(A)] += ridge * np.trace(A) / len(A)
        self.Q = Q
        try:
            self._cf = linalg.cho_factor(A, lower=True, check_finite=False)
            self._solve = lambda r: linalg.cho_solve(self._cf, r, check_finite=False)
        except linalg.LinAlgError:
            lu = linalg.lu_factor(A, check_finite=False)
            self._solve = lambda r: linalg.lu_solve(lu, r, check_finite=False)

    def __call__(self, R, tol_compat=None):
        """Returns (f, overlap) with overlap the relative kernel component of each R."""
        op, Q = self.op, self.Q
        r = op.restrict(R)
        flat = r.reshape(-1, r.shape[-1])
        c = flat @ Q
        nr = np.linalg.norm(flat, axis=1)
        overlap = np.linalg.norm(c, axis=1) / np.where(nr > 0, nr, 1.0)
        if tol_compat is not None and np.any(overlap > tol_compat):
            raise SolvabilityError(
                f"source is not orthogonal to the kernel (overlap {overlap.max():.3e})")
        flat = flat - c @ Q.T
        y = self._solve(flat.T).T
        y = y - (y @ Q) @ Q.T
        Ly = y @ op.L
        Ly -= (Ly @ Q) @ Q.T
        res = np.linalg.norm(Ly - flat, axis=1)
        bad = res > 1e-6 * np.maximum(np.linalg.norm(flat, axis=1), 1e-300)
        if np.any(bad & (nr > 0)) or not np.all(np.isfinite(y)):
            raise NumericalError(f"micro solve stagnated, residual {float(res.max()):.3e}")
        return op.extend(y.reshape(r.shape)), overlap.reshape(r.shape[:-1])

    def apply(self, f):
        """(I - P) L f, the operator as seen on the micro subspace."""
        y = self.op.restrict(f) @ self.op.L
        return self.op.extend(y - (y @ self.Q) @ self.Q.T)


def solve_micro(op: OperatorMatrix, R, basis: KernelBasis, tol_compat=1e-6, ridge=1e-12):
    """Micro f with P f = 0 and L f = R, for R orthogonal to the kernel."""
    R = np.asarray(R, dtype=float)
    if not np.any(op.restrict(R)):
        return np.zeros_like(R)
    return MicroSolver(op, basis, ridge)(R, tol_compat)[0]


def nu_on_active(op: OperatorMatrix):
    v = op.grid.nodes
    return np.concatenate([nu_alpha(v[op.active[s]], s, op.params, op.species) for s in range(2)])


def coercivity(op: OperatorMatrix, basis: KernelBasis, k=1, tol=1e-12, seed=0):
    """Smallest <Lf, f>/|f|_nu^2 over the micro subspace.

    Works with h = nu^{1/2} f; the kernel directions nu^{-1/2} X are shifted
    to a large eigenvalue so that Lanczos only sees the micro part.
    """
    if op.frame != "L_delta":
        raise FrameError("coercivity is measured on the local-frame operator")
    nu = nu_on_active(op)
    s = 1.0 / np.sqrt(nu)
    B = op.L * s[:, None] * s[None, :]
    Z, _ = np.linalg.qr(op.restrict(basis.X).T * s[:, None])
    shift = 10.0 * np.abs(B).sum(axis=1).max()

    def mv(x):
        x = np.ravel(x)
        zx = Z.T @ x
        By = B @ (x - Z @ zx)
        By -= Z @ (Z.T @ By)
        return By + shift * (Z @ zx)

    n = len(nu)
    A = LinearOperator((n, n), matvec=mv, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    vals, vecs = eigsh(A, k=k, which="SA", tol=tol, v0=v0, maxiter=20 * n)
    c0 = float(vals.min())
    if not c0 > 0:
        raise NumericalError(f"nonpositive coercivity estimate {c0:.3e}: grid too coarse")
    f = vecs[:, np.argmin(vals)] * s
    return c0, op.extend(f)


def rayleigh_nu(op: OperatorMatrix, f):
    y = op.restrict(f)
    nu = nu_on_active(op)
    return float(y @ (op.L @ y) / np.sum(nu * y * y))
