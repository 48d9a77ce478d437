"""Hilbert-expansion terms built on fluid snapshots.

F_0 is the local bi-Maxwellian of an Euler state, R_0 the forcing
-(d_t + v.grad) mu / sqrt(mu) with d_t taken from the Euler system, and
f_1 = P f_1 + L^{-1} R_0.  Residuals of the truncations F_0 and F_0 + eps F_1
are evaluated at a few sample cells of a snapshot.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .collision import CollisionOperator
from .errors import ConfigError, DomainError, ShapeError
from .fluid import (FluidState, LinearEulerState, _dx, burnett_moments, euler_rhs,
                    linear_euler_solve, sources_from_moments)
from .grids import VelocityGrid, lebedev_like_rule, tree_sum
from .linearized import MicroSolver, assemble_L, kernel_basis
from .species import GlobalFrame, SpeciesPair, select_theta_M, shared_params


@dataclass(frozen=True)
class KineticSetup:
    species: SpeciesPair = field(default_factory=SpeciesPair)
    vgrid: VelocityGrid = field(default_factory=lambda: VelocityGrid(6.0, 14))
    angular_order: int = 6
    widths: float = 6.0

    @property
    def angular(self):
        return lebedev_like_rule(self.angular_order)

    def operator(self, params):
        """(OperatorMatrix, KernelBasis, MicroSolver) of L_delta at one state."""
        op = assemble_L(params, self.species, self.vgrid, self.angular, widths=self.widths)
        basis = kernel_basis(params, self.species, self.vgrid)
        return op, basis, MicroSolver(op, basis)


def _cells(q):
    cells = q.shape[1:]
    return cells, q.reshape(6, -1)


def local_maxwellians(q, species: SpeciesPair, vgrid: VelocityGrid):
    """mu_delta per species at every cell; q is (6,) + cells, result cells + (2, N^3)."""
    cells, qf = _cells(np.asarray(q, dtype=float))
    v = vgrid.nodes
    c = v[None, :, :] - qf[2:5].T[:, None, :]
    r2 = np.einsum("cvk,cvk->cv", c, c)
    th = qf[5][:, None]
    out = np.empty((qf.shape[1], 2, vgrid.size))
    for a in range(2):
        m = species.mass(a)
        out[:, a] = qf[a][:, None] * (m / (2.0 * np.pi * th)) ** 1.5 * np.exp(-m * r2 / (2.0 * th))
    return out.reshape(cells + (2, vgrid.size))


def _log_derivative(q, dq, species, vgrid):
    """Derivative of log mu_delta along a direction dq of the fluid variables."""
    cells, qf = _cells(q)
    dqf = dq.reshape(6, -1)
    v = vgrid.nodes
    c = v[None, :, :] - qf[2:5].T[:, None, :]
    r2 = np.einsum("cvk,cvk->cv", c, c)
    cdu = np.einsum("cvk,kc->cv", c, dqf[2:5])
    th = qf[5][:, None]
    dth = dqf[5][:, None]
    out = np.empty((qf.shape[1], 2, vgrid.size))
    for a in range(2):
        m = species.mass(a)
        out[:, a] = (dqf[a][:, None] / qf[a][:, None] - 1.5 * dth / th
                     + m * cdu / th + m * r2 * dth / (2.0 * th * th))
    return out.reshape(cells + (2, vgrid.size))


def build_F0(s: FluidState, species: SpeciesPair, vgrid: VelocityGrid):
    if tuple(s.masses) != species.masses:
        raise ConfigError("masses", "fluid state and species pair disagree on the masses")
    return local_maxwellians(s.q, species, vgrid)


def build_R0(s: FluidState, species: SpeciesPair, vgrid: VelocityGrid, dq_dt=None):
    """-(d_t + v.grad) mu_delta / sqrt(mu_delta) with d_t from the Euler system.

    Spatial derivatives are centred differences; the same differences feed
    the Euler right-hand side, so the six kernel pairings vanish up to the
    velocity quadrature error whenever the state is advanced by that system.
    """
    g = s.grid
    D = [_dx(s.q, g, j) for j in range(g.d)]
    dt = euler_rhs(s, D) if dq_dt is None else np.asarray(dq_dt, dtype=float)
    lg = _log_derivative(s.q, dt, species, vgrid)
    v = vgrid.nodes
    for j in range(g.d):
        lg = lg + v[:, j] * _log_derivative(s.q, D[j], species, vgrid)
    return -np.sqrt(build_F0(s, species, vgrid)) * lg


def compatibility(R, params, species: SpeciesPair, vgrid: VelocityGrid):
    """Pairings <R, X_i> relative to |R| for one cell."""
    basis = kernel_basis(params, species, vgrid)
    c = vgrid.weight * np.einsum("isk,sk->i", basis.X, R)
    nr = np.sqrt(vgrid.weight * np.sum(R * R))
    return c / (nr if nr > 0 else 1.0)


def macro_part(q, qk, species: SpeciesPair, vgrid: VelocityGrid):
    """P f_k from the fluid coefficients (n_k^A, n_k^B, u_k, theta_k); fluctuation frame."""
    cells, qf = _cells(np.asarray(q, dtype=float))
    kf = np.asarray(qk, dtype=float).reshape(6, -1)
    v = vgrid.nodes
    c = v[None, :, :] - qf[2:5].T[:, None, :]
    r2 = np.einsum("cvk,cvk->cv", c, c)
    cu = np.einsum("cvk,kc->cv", c, kf[2:5])
    th = qf[5][:, None]
    sq = np.sqrt(local_maxwellians(q, species, vgrid)).reshape(qf.shape[1], 2, vgrid.size)
    out = np.empty_like(sq)
    for a in range(2):
        m = species.mass(a)
        out[:, a] = (kf[a][:, None] / qf[a][:, None] + m * cu / th
                     + kf[5][:, None] / (6.0 * th) * (m * r2 / th - 3.0)) * sq[:, a]
    return out.reshape(cells + (2, vgrid.size))


def build_f1(R0, solver: MicroSolver, q_cell, species, vgrid, qk_cell=None, tol_compat=1e-2):
    """f_1 = P f_1 + L^{-1} R_0 at one cell; returns (f1, micro, overlap)."""
    micro, overlap = solver(R0, tol_compat)
    f1 = micro.copy()
    if qk_cell is not None:
        f1 += macro_part(np.asarray(q_cell)[:, None], np.asarray(qk_cell)[:, None], species, vgrid)[0]
    return f1, micro, float(overlap)


def f1_decay_sup(f1, params, species: SpeciesPair, vgrid: VelocityGrid, b=None, p1=4.0):
    """sup (1 + |v|)^p1 mu_s^{-b} |f_1| with mu_s the lighter species' Maxwellian."""
    lo = species.q_lower / 2.0
    b = 0.5 * (lo + 0.5) if b is None else b
    if not lo < b < 0.5:
        raise ConfigError("b", f"need {lo:.4g} < b < 1/2")
    s = int(np.argmin(species.masses))
    p = params[s]
    v = vgrid.nodes
    c = v - p.uvec
    ms = species.mass(s)
    log_mu = np.log(p.n) + 1.5 * np.log(ms / (2.0 * np.pi * p.theta)) - ms * np.sum(c * c, 1) / (2.0 * p.theta)
    wt = p1 * np.log1p(np.linalg.norm(v, axis=1)) - b * log_mu
    f = np.abs(np.asarray(f1))
    with np.errstate(divide="ignore"):
        lv = np.where(f > 0, np.log(np.where(f > 0, f, 1.0)) + wt, -np.inf)
    return float(np.exp(lv.max()))


def weighted_remainder(F_R, frame: GlobalFrame, vgrid: VelocityGrid):
    """h = w F_R / sqrt(mu_M) per species."""
    F_R = np.asarray(F_R, dtype=float)
    if F_R.shape[-2:] != (2, vgrid.size):
        raise ShapeError(f"expected (..., 2, {vgrid.size}), got {F_R.shape}")
    v = vgrid.nodes
    w = frame.w(v)
    out = np.empty_like(F_R)
    for a in range(2):
        out[..., a, :] = w * F_R[..., a, :] / np.sqrt(frame.mu_M(a, v))
    return out


# ---- frozen reference operator for the fluid sources --------------------------

class ReferenceMicro:
    """Micro parts L_ref^{-1}(I - P_ref) R_0 with L at the reference state (1, 1, 0, 1).

    Used inside the linearised Euler sources and the acoustic-limit proxy,
    where the micro part enters at relative order delta.
    """

    def __init__(self, setup: KineticSetup, params=None):
        self.setup = setup
        params = params or shared_params(1.0, 1.0)
        self.op, self.basis, self.solver = setup.operator(params)

    def micro(self, R0):
        f, _ = self.solver(R0)
        return f

    def fluid_sources(self, grid):
        st = self.setup

        def sources(t, bq, qk):
            s = FluidState(bq, grid, st.species.masses)
            f = self.micro(build_R0(s, st.species, st.vgrid))
            Am, Bm = burnett_moments(f, bq, st.species, st.vgrid)
            return sources_from_moments(Am, Bm, bq, grid, st.species, u_k=qk[2:5])

        return sources


def macro_trajectory(setup: KineticSetup, background: FluidState, t_end, init=None,
                     sample_times=None, ref: ReferenceMicro | None = None, cfl=0.4):
    """(n_1^A, n_1^B, u_1, theta_1) along the Euler background; zero data by default."""
    g = background.grid
    init = LinearEulerState(np.zeros((6,) + g.shape) if init is None else init, g)
    src = ref.fluid_sources(g) if ref is not None else None
    return linear_euler_solve(init, background, t_end, sources=src, cfl=cfl, sample_times=sample_times)


# ---- truncation residuals -----------------------------------------------------

@dataclass
class ExpansionTruncation:
    eps: float
    terms: list                     # raw F_0, F_1 on the sample cells, (cells, 2, N^3)
    frame: GlobalFrame

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError("eps", "Knudsen number must be positive")
        if not 1 <= len(self.terms) <= 2:
            raise ConfigError("K", "validated truncations stop at K = 1")
        shapes = {np.shape(t) for t in self.terms}
        if len(shapes) != 1:
            raise ShapeError("expansion terms live on different grids")
        if not np.all(self.terms[0] > 0.0):
            raise DomainError("F_0 must be strictly positive")

    @property
    def K(self):
        return len(self.terms) - 1

    def F(self):
        return sum(self.eps ** k * t for k, t in enumerate(self.terms))


@dataclass
class ResidualSnapshot:
    """Per-cell pieces of the truncated residuals at one time."""

    cells: list
    F0: np.ndarray          # (C, 2, Nv)
    F1: np.ndarray
    D0: np.ndarray          # (d_t + v.grad) F_0
    lin: np.ndarray         # Q(F_0, F_1) + Q(F_1, F_0) = -sqrt(mu) (I - P) L f_1
    T1: np.ndarray          # (d_t + v.grad) F_1
    Q11: np.ndarray         # Q(F_1, F_1)
    vgrid: VelocityGrid
    cell_volume: float
    frame: GlobalFrame
    overlap: float = 0.0
    f1_sup: list = field(default_factory=list)

    def truncation(self, eps, K):
        return ExpansionTruncation(eps, [self.F0] if K == 0 else [self.F0, self.F1], self.frame)


def expansion_snapshot(setup: KineticSetup, states, macro, grid, cells, tau):
    """Pieces of the K = 0, 1 residuals at the listed cells (d = 1).

    `states` and `macro` map the keys "m", "0", "p" to (6, M) fields at
    t - tau, t and t + tau.  f_1 is built with L_delta assembled at each cell
    and at its space and time neighbours.
    """
    if grid.d != 1:
        raise ConfigError("d", "residual snapshots are implemented for slab data")
    sp, vg = setup.species, setup.vgrid
    R0 = {k: build_R0(FluidState(states[k], grid, sp.masses), sp, vg) for k in ("m", "0", "p")}
    cache = {}

    def f1_at(key, i):
        i = i % grid.M
        if (key, i) not in cache:
            q = states[key][:, i]
            fs = FluidState(states[key], grid, sp.masses)
            op, basis, solver = setup.operator(fs.params_at(i))
            f1, micro, ov = build_f1(R0[key][i], solver, q, sp, vg, macro[key][:, i])
            sq = np.sqrt(local_maxwellians(q[:, None], sp, vg)[0])
            cache[(key, i)] = (sq * f1, micro, solver, ov, f1, fs.params_at(i))
        return cache[(key, i)]

    coll = CollisionOperator(sp, vg, setup.angular)
    v1 = vg.nodes[:, 0]
    out = {k: [] for k in ("F0", "F1", "D0", "lin", "T1", "Q11")}
    overlap = 0.0
    sups = []
    for i in cells:
        F1c, micro, solver, ov, f1, params = f1_at("0", i)
        overlap = max(overlap, ov)
        sups.append(f1_decay_sup(f1, params, sp, vg))
        sq = np.sqrt(local_maxwellians(states["0"][:, i][:, None], sp, vg)[0])
        out["F0"].append(sq * sq)
        out["F1"].append(F1c)
        out["D0"].append(-sq * R0["0"][i])
        out["lin"].append(-sq * solver.apply(micro))
        dt = (f1_at("p", i)[0] - f1_at("m", i)[0]) / (2.0 * tau)
        dx = (f1_at("0", i + 1)[0] - f1_at("0", i - 1)[0]) / (2.0 * grid.dx)
        out["T1"].append(dt + v1 * dx)
        out["Q11"].append(coll.collision_term(F1c))
    frame = select_theta_M(states["0"][5], sp)
    arr = {k: np.stack(v) for k, v in out.items()}
    return ResidualSnapshot(list(cells), vgrid=vg, cell_volume=grid.dx ** grid.d, frame=frame,
                            overlap=overlap, f1_sup=sups, **arr)


def expansion_residual(snap: ResidualSnapshot, eps, K):
    """Per-species L2_{x,v} and weighted-sup norms of the truncated residual.

    The bilinear collision term is expanded around F_0: Q(F_0, F_0) = 0 for a
    local Maxwellian and the kernel part of f_1 drops out of the linear term,
    so the lattice enters only through L_delta on the micro part and through
    Q(F_1, F_1).
    """
    if K == 0:
        r = snap.D0
    elif K == 1:
        r = snap.D0 - snap.lin + eps * (snap.T1 - snap.Q11)
    else:
        raise ConfigError("K", "validated truncations stop at K = 1")
    vg = snap.vgrid
    l2 = np.sqrt(snap.cell_volume * vg.weight * tree_sum(tree_sum(r * r, axis=-1), axis=0))
    h = weighted_remainder(r, snap.frame, vg)
    sup = np.abs(h).max(axis=(0, 2))
    return {"eps": float(eps), "K": int(K), "L2": l2.tolist(), "sup_w": sup.tolist(),
            "L2_total": float(np.sqrt(np.sum(l2 ** 2))), "sup_total": float(sup.max())}
