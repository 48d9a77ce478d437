"""Mixture Euler, linearised Euler and acoustic systems on a periodic grid.

Fields are stored as one array of shape (6,) + grid.shape in the order
(n_A, n_B, u_1, u_2, u_3, theta).  The Euler solver is a second-order
finite-volume scheme (centred linear reconstruction, Rusanov flux, SSP-RK2);
the acoustic solver is exact in time mode by mode.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BlowUpError, ConfigError, DomainError, ShapeError
from .grids import SpatialGrid, VelocityGrid, quad_v
from .species import MaxwellParams, SpeciesPair, maxwellian

NAMES = ("n_A", "n_B", "u_1", "u_2", "u_3", "theta")


def _check_fields(q, grid):
    q = np.asarray(q, dtype=float)
    if q.shape != (6,) + grid.shape:
        raise ShapeError(f"expected fields of shape {(6,) + grid.shape}, got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise DomainError("non-finite field values")
    return q


@dataclass
class FluidState:
    q: np.ndarray
    grid: SpatialGrid
    masses: tuple = (1.0, 2.0)

    def __post_init__(self):
        self.q = _check_fields(self.q, self.grid)
        if np.any(self.q[[0, 1, 5]] <= 0.0):
            raise DomainError("densities and temperature must stay positive")

    @classmethod
    def from_fluctuations(cls, grid, masses, delta, sigma_A, sigma_B, u, theta):
        sA, sB, th = (np.broadcast_to(np.asarray(f, float), grid.shape) for f in (sigma_A, sigma_B, theta))
        uu = np.broadcast_to(np.asarray(u, float), (3,) + grid.shape)
        q = np.concatenate([(1.0 + delta * sA)[None], (1.0 + delta * sB)[None],
                            delta * uu, (1.0 + delta * th)[None]])
        return cls(q, grid, tuple(masses))

    @classmethod
    def constant(cls, grid, masses, nA=1.0, nB=1.0, u=(0.0, 0.0, 0.0), theta=1.0):
        q = np.empty((6,) + grid.shape)
        q[0], q[1], q[5] = nA, nB, theta
        for k in range(3):
            q[2 + k] = u[k]
        return cls(q, grid, tuple(masses))

    n_A = property(lambda self: self.q[0])
    n_B = property(lambda self: self.q[1])
    u = property(lambda self: self.q[2:5])
    theta = property(lambda self: self.q[5])

    @property
    def n(self):
        return self.q[0] + self.q[1]

    @property
    def rho(self):
        return self.masses[0] * self.q[0] + self.masses[1] * self.q[1]

    def params_at(self, idx):
        """Shared-velocity Maxwell parameters of the two species at one cell."""
        c = self.q[(slice(None),) + tuple(np.atleast_1d(idx))]
        u = tuple(float(x) for x in c[2:5])
        return (MaxwellParams(float(c[0]), u, float(c[5])), MaxwellParams(float(c[1]), u, float(c[5])))


@dataclass
class AcousticState:
    q: np.ndarray           # (sigma_A, sigma_B, u_1, u_2, u_3, theta)
    grid: SpatialGrid
    masses: tuple = (1.0, 2.0)

    def __post_init__(self):
        self.q = _check_fields(self.q, self.grid)

    @property
    def M(self):
        return self.masses[0] + self.masses[1]


@dataclass
class LinearEulerState:
    q: np.ndarray           # (n_k^A, n_k^B, u_k, theta_k)
    grid: SpatialGrid

    def __post_init__(self):
        self.q = _check_fields(self.q, self.grid)


# ---- spatial operators ------------------------------------------------------

def _dx(f, grid, j):
    a = f.ndim - grid.d + j
    return (np.roll(f, -1, axis=a) - np.roll(f, 1, axis=a)) / (2.0 * grid.dx)


def _faces(w, grid, j):
    """Left/right states at faces i+1/2 from centred linear reconstruction."""
    a = w.ndim - grid.d + j
    wp = np.roll(w, -1, axis=a)
    wm = np.roll(w, 1, axis=a)
    wpp = np.roll(w, -2, axis=a)
    left = w + 0.25 * (wp - wm)
    right = wp - 0.25 * (wpp - w)
    return left, right


def _div_faces(F, grid, j):
    a = F.ndim - grid.d + j
    return (F - np.roll(F, 1, axis=a)) / grid.dx


def sound_speed(q, masses):
    n = q[0] + q[1]
    rho = masses[0] * q[0] + masses[1] * q[1]
    return np.sqrt(5.0 * n * q[5] / (3.0 * rho))


def _conserved(w, masses):
    rho = masses[0] * w[0] + masses[1] * w[1]
    n = w[0] + w[1]
    mom = rho * w[2:5]
    E = 0.5 * rho * np.sum(w[2:5] ** 2, axis=0) + 1.5 * n * w[5]
    return np.concatenate([w[:2], mom, E[None]])


def _primitive(U, masses):
    rho = masses[0] * U[0] + masses[1] * U[1]
    n = U[0] + U[1]
    u = U[2:5] / rho
    theta = (U[5] - 0.5 * rho * np.sum(u * u, axis=0)) / (1.5 * n)
    return np.concatenate([U[:2], u, theta[None]])


def _flux(w, masses, j):
    rho = masses[0] * w[0] + masses[1] * w[1]
    n = w[0] + w[1]
    p = n * w[5]
    uj = w[2 + j]
    F = np.empty_like(w)
    F[0] = w[0] * uj
    F[1] = w[1] * uj
    F[2:5] = rho * w[2:5] * uj
    F[2 + j] += p
    E = 0.5 * rho * np.sum(w[2:5] ** 2, axis=0) + 1.5 * p
    F[5] = (E + p) * uj
    return F


def euler_fv_rhs(U, grid, masses):
    """-div F(U) with Rusanov fluxes on reconstructed primitive states."""
    w = _primitive(U, masses)
    out = np.zeros_like(U)
    for j in range(grid.d):
        wl, wr = _faces(w, grid, j)
        if np.any(wl[[0, 1, 5]] <= 0.0) or np.any(wr[[0, 1, 5]] <= 0.0):
            raise BlowUpError("positivity lost in the reconstruction")
        a = np.maximum(np.abs(wl[2 + j]) + sound_speed(wl, masses),
                       np.abs(wr[2 + j]) + sound_speed(wr, masses))
        F = 0.5 * (_flux(wl, masses, j) + _flux(wr, masses, j)) \
            - 0.5 * a * (_conserved(wr, masses) - _conserved(wl, masses))
        out -= _div_faces(F, grid, j)
    return out


def euler_rhs(s: FluidState, ddx=None):
    """Pointwise time derivative of (n_A, n_B, u, theta) from the Euler system.

    Spatial derivatives use centred differences unless `ddx` (a list of d
    arrays shaped like s.q) supplies them.
    """
    g = s.grid
    q = s.q
    D = [_dx(q, g, j) for j in range(g.d)] if ddx is None else ddx
    u = q[2:5]
    n, rho, th = s.n, s.rho, q[5]
    out = np.zeros_like(q)
    div_u = sum(D[j][2 + j] for j in range(g.d))
    for j in range(g.d):
        out[0] -= u[j] * D[j][0]
        out[1] -= u[j] * D[j][1]
        out[2:5] -= u[j] * D[j][2:5]
        out[5] -= u[j] * D[j][5]
        dn = D[j][0] + D[j][1]
        out[2 + j] -= (n * D[j][5] + th * dn) / rho
    out[0] -= q[0] * div_u
    out[1] -= q[1] * div_u
    out[5] -= (2.0 / 3.0) * th * div_u
    return out


# ---- trajectories -----------------------------------------------------------

@dataclass
class Trajectory:
    times: list
    states: list            # arrays (6,) + grid.shape
    grid: SpatialGrid
    meta: dict = field(default_factory=dict)

    def at(self, t):
        for tt, q in zip(self.times, self.states):
            if abs(tt - t) <= 1e-12 * max(1.0, abs(t)):
                return q
        raise KeyError(f"time {t} was not sampled")

    @property
    def final(self):
        return self.states[-1]

    def to_csv(self, path):
        path = Path(path)
        g = self.grid
        xs = g.coords()
        cols = ["t"] + (["x"] if g.d == 1 else ["x1", "x2", "x3"]) + ["n_A", "n_B", "u1", "u2", "u3", "theta"]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for t, q in zip(self.times, self.states):
                flat = q.reshape(6, -1)
                X = [x.reshape(-1) for x in np.broadcast_arrays(*xs)]
                for c in range(flat.shape[1]):
                    w.writerow([repr(float(t))] + [repr(float(x[c])) for x in X]
                               + [repr(float(v)) for v in flat[:, c]])
        side = {"grid": {"Lx": g.Lx, "M": g.M, "d": g.d}, "times": [float(t) for t in self.times], **self.meta}
        path.with_suffix(".json").write_text(json.dumps(side, sort_keys=True, indent=1))


def _ssp2(rhs, y, dt):
    y1 = y + dt * rhs(y)
    return 0.5 * (y + y1 + dt * rhs(y1))


def _schedule(t_end, sample_times):
    ts = sorted(set([0.0] + [float(t) for t in (sample_times or [])] + [float(t_end)]))
    if ts[0] < 0.0 or ts[-1] > t_end:
        raise ConfigError("sample_times", "must lie in [0, t_end]")
    return ts


def euler_solve(init: FluidState, t_end, cfl=0.4, sample_times=None, delta=None):
    """Integrate the mixture Euler system; returns a Trajectory.

    When `delta` is given the sup deviation from (1, 1, 0, 1) divided by
    delta is recorded at each sample (the C_1 of the small-amplitude bound).
    """
    if not 0.0 < cfl <= 1.0:
        raise ConfigError("cfl", f"CFL number must lie in (0, 1], got {cfl}")
    g, m = init.grid, init.masses
    U = _conserved(init.q, m)
    ts = _schedule(t_end, sample_times)
    times, states = [0.0], [init.q.copy()]
    t = 0.0
    steps = 0

    def rhs(V):
        return euler_fv_rhs(V, g, m)

    for target in ts[1:]:
        while t < target - 1e-14:
            w = _primitive(U, m)
            a = max(float(np.max(np.abs(w[2 + j]) + sound_speed(w, m))) for j in range(g.d))
            dt = min(cfl * g.dx / a, target - t)
            try:
                U = _ssp2(rhs, U, dt)
            except BlowUpError as e:
                raise BlowUpError(f"{e} at t = {t:.6g}", time=t) from e
            t = target if target - t - dt <= 1e-14 else t + dt
            steps += 1
            w = _primitive(U, m)
            if not np.all(np.isfinite(w)) or np.any(w[[0, 1, 5]] <= 0.0):
                raise BlowUpError(f"positivity lost at t = {t:.6g}", time=t)
        times.append(target)
        states.append(_primitive(U, m))
    meta = {"scheme": "fv-rusanov-centred-ssp2", "cfl": cfl, "masses": list(m), "steps": steps}
    if delta:
        ref = np.array([1.0, 1.0, 0.0, 0.0, 0.0, 1.0]).reshape((6,) + (1,) * g.d)
        meta["delta"] = delta
        meta["deviation_over_delta"] = [float(np.max(np.abs(q - ref)) / delta) for q in states]
    return Trajectory(times, states, g, meta)


def conserved_totals(q, grid, masses):
    """Integrals of n_A, n_B, momentum and total energy."""
    return grid.integrate(_conserved(q, masses))


# ---- symmetrizer ------------------------------------------------------------

def euler_matrices(w, masses, j):
    """A_0, the flux matrix A_j of the primitive system, and A_0 A_j as printed.

    Returns (A0, Aj, printed) for one cell state w = (n_A, n_B, u, theta).
    """
    nA, nB, u, th = w[0], w[1], np.asarray(w[2:5]), w[5]
    n = nA + nB
    rho = masses[0] * nA + masses[1] * nB
    e = np.zeros(3)
    e[j] = 1.0
    A0 = np.diag([th / nA, th / nB, rho, rho, rho, 1.5 * n / th])
    Aj = np.zeros((6, 6))
    Aj[0, 0] = Aj[1, 1] = u[j]
    Aj[0, 2:5] = nA * e
    Aj[1, 2:5] = nB * e
    Aj[2:5, 0] = Aj[2:5, 1] = th / rho * e
    Aj[2:5, 2:5] = u[j] * np.eye(3)
    Aj[2:5, 5] = n / rho * e
    Aj[5, 2:5] = (2.0 / 3.0) * th * e
    Aj[5, 5] = u[j]
    P = np.zeros((6, 6))
    P[0, 0] = u[j] * th / nA
    P[1, 1] = u[j] * th / nB
    P[0, 2:5] = P[1, 2:5] = th * e
    P[2:5, 0] = P[2:5, 1] = th * e
    P[2:5, 2:5] = rho * u[j] * np.eye(3)
    P[2:5, 5] = n * e
    P[5, 2:5] = n * e
    P[5, 5] = 1.5 * n / th * u[j]
    return A0, Aj, P


def symmetrizer_check(s: FluidState, n_cells=100, seed=0):
    """Max asymmetry of A_0 A_j, max |A_0 A_j - printed| and min eig A_0 over random cells."""
    rng = np.random.default_rng(seed)
    flat = s.q.reshape(6, -1)
    cells = rng.integers(0, flat.shape[1], size=n_cells)
    asym = mismatch = 0.0
    lam = np.inf
    for c in cells:
        w = flat[:, c]
        for j in range(3):
            A0, Aj, P = euler_matrices(w, s.masses, j)
            S = A0 @ Aj
            scale = max(np.abs(S).max(), 1.0)
            asym = max(asym, float(np.abs(S - S.T).max() / scale))
            mismatch = max(mismatch, float(np.abs(S - P).max() / scale))
        lam = min(lam, float(np.linalg.eigvalsh(A0).min()))
    return {"asymmetry": asym, "printed_mismatch": mismatch, "min_eig_A0": lam}


# ---- acoustic system ----------------------------------------------------------

def _kvecs(grid):
    # the Nyquist mode of a real field has no signed derivative; keep it frozen
    k = grid.wavenumbers.copy()
    if grid.M % 2 == 0:
        k[grid.M // 2] = 0.0
    if grid.d == 1:
        return [k]
    return list(np.meshgrid(k, k, k, indexing="ij"))


def _fft(f, grid):
    return np.fft.fftn(f, axes=tuple(range(f.ndim - grid.d, f.ndim)))


def _ifft(f, grid):
    return np.fft.ifftn(f, axes=tuple(range(f.ndim - grid.d, f.ndim))).real


def acoustic_symbol(k, masses):
    """Matrix S with d/dt q_hat = -i S q_hat for the mode with wavevector k."""
    k = np.asarray(k, float)
    M = masses[0] + masses[1]
    S = np.zeros((6, 6))
    S[0, 2:5] = S[1, 2:5] = k
    S[2:5, 0] = S[2:5, 1] = k / M
    S[2:5, 5] = 2.0 * k / M
    S[5, 2:5] = (2.0 / 3.0) * k
    return S


def acoustic_solve(init: AcousticState, t):
    """Exact-in-time solution of the acoustic system at time t."""
    g = init.grid
    M = init.M
    c2 = 10.0 / (3.0 * M)
    Q = _fft(init.q, g)
    K = _kvecs(g)
    kk = np.sqrt(sum(k * k for k in K))
    safe = np.where(kk > 0, kk, 1.0)
    khat = [k / safe for k in K] + [np.zeros_like(kk)] * (3 - g.d)
    a0 = sum(khat[j] * Q[2 + j] for j in range(3))          # longitudinal velocity
    s0 = 2.0 * Q[5] + Q[0] + Q[1]
    om = np.sqrt(c2) * kk
    cs, sn = np.cos(om * t), np.sin(om * t)
    som = np.where(kk > 0, sn / np.where(om > 0, om, 1.0), t)
    A = -1j * kk * s0 / M
    a = a0 * cs + A * som
    # time integral of a: a0 sin/om + A (1 - cos)/om^2
    one_m = np.where(kk > 0, (1.0 - cs) / np.where(om > 0, om * om, 1.0), 0.5 * t * t)
    Ia = a0 * som + A * one_m
    out = np.empty_like(Q)
    out[0] = Q[0] - 1j * kk * Ia
    out[1] = Q[1] - 1j * kk * Ia
    out[5] = Q[5] - (2.0 / 3.0) * 1j * kk * Ia
    for j in range(3):
        out[2 + j] = Q[2 + j] + khat[j] * (a - a0)
    return AcousticState(_ifft(out, g), g, init.masses)


def _spectral_norm2(F, grid, ell):
    K = _kvecs(grid)
    k2 = sum(k * k for k in K)
    vol = grid.Lx ** grid.d
    ncell = grid.M ** grid.d
    return vol / ncell ** 2 * float(np.sum(np.abs(F) ** 2 * k2 ** ell))


def acoustic_energy(state: AcousticState, ell=0):
    """int |D^l u|^2 + 3 |D^l theta|^2 / M + |D^l n|^2 / (2M), M = m_A + m_B."""
    if ell < 0:
        raise ConfigError("ell", "derivative order must be nonnegative")
    g, M = state.grid, state.M
    Q = _fft(state.q, g)
    e = sum(_spectral_norm2(Q[2 + j], g, ell) for j in range(3))
    e += 3.0 * _spectral_norm2(Q[5], g, ell) / M
    e += _spectral_norm2(Q[0] + Q[1], g, ell) / (2.0 * M)
    return e


def vorticity_hat(state: AcousticState):
    """Fourier coefficients of curl u (for d = 1 only the x_1 derivatives survive)."""
    g = state.grid
    Q = _fft(state.q[2:5], g)
    K = _kvecs(g) + [np.zeros(g.shape)] * (3 - g.d)
    return np.stack([1j * (K[1] * Q[2] - K[2] * Q[1]),
                     1j * (K[2] * Q[0] - K[0] * Q[2]),
                     1j * (K[0] * Q[1] - K[1] * Q[0])])


# ---- Burnett functions and linear Euler system --------------------------------

def burnett_vectors(params, species: SpeciesPair, grid: VelocityGrid):
    """A (2, 3, 3, N^3) and B (2, 3, N^3) built on sqrt(mu_delta) of each species."""
    v = grid.nodes
    A = np.empty((2, 3, 3, grid.size))
    B = np.empty((2, 3, grid.size))
    for a, p in enumerate(params):
        m = species.mass(a)
        sq = np.sqrt(maxwellian(p, m, v))
        c = v - p.uvec
        r2 = np.sum(c * c, axis=1)
        for i in range(3):
            for j in range(3):
                A[a, i, j] = (m * c[:, i] * c[:, j] / p.theta - (i == j) * m * r2 / (3.0 * p.theta)) * sq
            B[a, i] = 0.5 * c[:, i] * np.sqrt(m / p.theta) * (m * r2 / p.theta - 5.0) * sq
    return A, B


def burnett_moments(f, q, species: SpeciesPair, vgrid: VelocityGrid):
    """int A_ij f and int B_i f per species; f has shape cells + (2, N^3), q (6,) + cells.

    Returns arrays (2, 3, 3) + cells and (2, 3) + cells.
    """
    cells = q.shape[1:]
    C = int(np.prod(cells)) if cells else 1
    qf = q.reshape(6, C)
    ff = np.asarray(f, dtype=float).reshape(C, 2, vgrid.size)
    v = vgrid.nodes
    th = qf[5][:, None]
    Am = np.empty((2, 3, 3, C))
    Bm = np.empty((2, 3, C))
    for a in range(2):
        m = species.mass(a)
        c = v[None, :, :] - qf[2:5].T[:, None, :]                     # (C, Nv, 3)
        r2 = np.einsum("cvk,cvk->cv", c, c)
        sq = np.sqrt(qf[a][:, None] * (m / (2.0 * np.pi * th)) ** 1.5 * np.exp(-m * r2 / (2.0 * th)))
        g = sq * ff[:, a] * vgrid.weight
        M2 = np.einsum("cv,cvi,cvj->ijc", g, c, c)
        tr = np.einsum("cv,cv->c", g, r2)
        Am[a] = m * M2 / th[:, 0] - np.eye(3)[:, :, None] * m * tr / (3.0 * th[:, 0])
        w3 = g * (m * r2 / th - 5.0)
        Bm[a] = 0.5 * np.sqrt(m / th[:, 0]) * np.einsum("cv,cvi->ic", w3, c)
    return Am.reshape((2, 3, 3) + cells), Bm.reshape((2, 3) + cells)


def linear_euler_sources(fk, background: FluidState, species: SpeciesPair, vgrid: VelocityGrid, u_k=None):
    """(H, g) from the A/B moments of f_k; fk has shape grid.shape + (2, N^3)."""
    g = background.grid
    fk = np.asarray(fk, dtype=float)
    if fk.shape != g.shape + (2, vgrid.size):
        raise ShapeError(f"expected f_k of shape {g.shape + (2, vgrid.size)}, got {fk.shape}")
    return sources_from_moments(*burnett_moments(fk, background.q, species, vgrid), background.q, g,
                                species, u_k)


def sources_from_moments(Am, Bm, q, g, species, u_k=None):
    th, u = q[5], q[2:5]
    H = np.zeros((3,) + g.shape)
    gs = np.zeros(g.shape)
    for a in range(2):
        m = species.mass(a)
        for i in range(3):
            for j in range(g.d):
                H[i] -= m * _dx(th / m * Am[a, i, j], g, j)
        for i in range(g.d):
            inner = (th / m) ** 1.5 * Bm[a, i] + sum(u[j] * th / m * Am[a, i, j] for j in range(3))
            gs -= 2.0 * m * _dx(inner, g, i)
    if u_k is not None:
        gs -= 2.0 * np.sum(np.asarray(u_k) * H, axis=0)
    return H, gs


def _jump_dissipation(q, grid, a):
    """Rusanov-type dissipation of the reconstructed jumps, summed over axes."""
    out = np.zeros_like(q)
    for j in range(grid.d):
        ql, qr = _faces(q, grid, j)
        out += _div_faces(0.5 * a * (qr - ql), grid, j)
    return out


def linear_euler_rhs(qk, bq, grid, masses, H=None, gsrc=None, a=None):
    """Time derivative of (n_k^A, n_k^B, u_k, theta_k) with frozen background bq.

    The temperature equation carries the factors 3 in the combination
    (theta_k div u + 3 theta div u_k) and 3 u_k . grad theta exactly as in
    the system it discretises.
    """
    nA, nB, u, th = bq[0], bq[1], bq[2:5], bq[5]
    n = nA + nB
    rho = masses[0] * nA + masses[1] * nB
    kA, kB, uk, tk = qk[0], qk[1], qk[2:5], qk[5]
    d = grid.d
    out = np.zeros_like(qk)
    for j in range(d):
        out[0] -= _dx(kA * u[j] + nA * uk[j], grid, j)
        out[1] -= _dx(kB * u[j] + nB * uk[j], grid, j)
    adv = np.zeros((3,) + grid.shape)
    for j in range(d):
        adv += uk[j] * _dx(u, grid, j) + u[j] * _dx(uk, grid, j)
    mom = -rho * adv
    pA = (nA * tk + 3.0 * th * kA) / 3.0
    pB = (nB * tk + 3.0 * th * kB) / 3.0
    for j in range(d):
        mom[j] += kA / nA * _dx(nA * th, grid, j) + kB / nB * _dx(nB * th, grid, j)
        mom[j] -= _dx(pA + pB, grid, j)
    if H is not None:
        mom += H
    out[2:5] = mom / rho
    div_u = sum(_dx(u[j], grid, j) for j in range(d))
    div_uk = sum(_dx(uk[j], grid, j) for j in range(d))
    tt = -(2.0 / 3.0) * (tk * div_u + 3.0 * th * div_uk)
    for j in range(d):
        tt -= u[j] * _dx(tk, grid, j) + 3.0 * uk[j] * _dx(th, grid, j)
    if gsrc is not None:
        tt += gsrc / n
    out[5] = tt
    if a is not None:
        out += _jump_dissipation(qk, grid, a)
    return out


def linear_energy(qk, bq, grid, masses):
    """int sum_a (theta/n_a) n_k^a^2 + rho |u_k|^2 + n theta_k^2 / (6 theta)."""
    nA, nB, th = bq[0], bq[1], bq[5]
    n = nA + nB
    rho = masses[0] * nA + masses[1] * nB
    dens = th / nA * qk[0] ** 2 + th / nB * qk[1] ** 2 + rho * np.sum(qk[2:5] ** 2, axis=0) \
        + n * qk[5] ** 2 / (6.0 * th)
    return float(grid.integrate(dens))


def linear_euler_solve(init: LinearEulerState, background: FluidState, t_end, sources=None,
                       cfl=0.4, sample_times=None, freeze=False):
    """Integrate the linearised system along a background evolved in lockstep.

    `sources(t, bq, qk)` returns (H, g) or None.  With freeze=True the
    background is held at its initial value.
    """
    g, m = init.grid, background.masses
    if background.grid != g:
        raise ShapeError("background and perturbation live on different grids")
    ts = _schedule(t_end, sample_times)
    U = _conserved(background.q, m)
    qk = init.q.copy()
    times, states, bstates = [0.0], [qk.copy()], [background.q.copy()]
    t = 0.0

    def speed(bq):
        return max(float(np.max(np.abs(bq[2 + j]) + sound_speed(bq, m))) for j in range(g.d))

    def rhs_pair(tt, Y):
        Ub, y = Y
        bq = background.q if freeze else _primitive(Ub, m)
        H = gs = None
        if sources is not None:
            src = sources(tt, bq, y)
            if src is not None:
                H, gs = src
        a = speed(bq)
        dy = linear_euler_rhs(y, bq, g, m, H, gs, a)
        dU = np.zeros_like(Ub) if freeze else euler_fv_rhs(Ub, g, m)
        return dU, dy

    for target in ts[1:]:
        while t < target - 1e-14:
            bq = background.q if freeze else _primitive(U, m)
            dt = min(cfl * g.dx / speed(bq), target - t)
            k1 = rhs_pair(t, (U, qk))
            U1, q1 = U + dt * k1[0], qk + dt * k1[1]
            k2 = rhs_pair(t + dt, (U1, q1))
            U = 0.5 * (U + U1 + dt * k2[0])
            qk = 0.5 * (qk + q1 + dt * k2[1])
            t = target if target - t - dt <= 1e-14 else t + dt
            if not np.all(np.isfinite(qk)):
                raise BlowUpError(f"linearised solution blew up at t = {t:.6g}", time=t)
        times.append(target)
        states.append(qk.copy())
        bstates.append(background.q.copy() if freeze else _primitive(U, m))
    meta = {"scheme": "centred-rusanov-ssp2", "cfl": cfl, "masses": list(m), "frozen": freeze}
    traj = Trajectory(times, states, g, meta)
    traj.background = bstates
    return traj
