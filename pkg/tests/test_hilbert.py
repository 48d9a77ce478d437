import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixhilbert.errors import ConfigError, DomainError
from mixhilbert.fluid import FluidState
from mixhilbert.grids import SpatialGrid, VelocityGrid
from mixhilbert.hilbert import (ExpansionTruncation, KineticSetup, _log_derivative, build_R0, compatibility,
                                expansion_residual, expansion_snapshot, local_maxwellians, macro_part)
from mixhilbert.linearized import kernel_basis, project_macro
from mixhilbert.species import SpeciesPair, select_theta_M, shared_params
from oracles import maxwellian

SP = SpeciesPair()
VG = VelocityGrid(6.0, 12)


def test_local_maxwellians_match_oracle():
    q = np.array([[1.2], [0.7], [0.1], [-0.2], [0.0], [0.9]])
    F = local_maxwellians(q, SP, VG)[0]
    for a, m in enumerate(SP.masses):
        assert np.allclose(F[a], maxwellian(q[a, 0], q[2:5, 0], q[5, 0], m, VG.nodes), rtol=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_log_derivative_matches_finite_difference(seed):
    rng = np.random.default_rng(seed)
    q = np.array([1.0, 1.0, 0.0, 0.0, 0.0, 1.0]) + 0.2 * rng.uniform(-1, 1, 6)
    dq = rng.normal(size=6)
    h = 1e-6
    lp = np.log(local_maxwellians((q + h * dq)[:, None], SP, VG)[0])
    lm = np.log(local_maxwellians((q - h * dq)[:, None], SP, VG)[0])
    got = _log_derivative(q[:, None], dq[:, None], SP, VG)[0]
    assert np.allclose(got, (lp - lm) / (2 * h), rtol=1e-5, atol=1e-5)


def test_macro_part_lies_in_kernel():
    vg = VelocityGrid(6.0, 20)
    q = np.array([1.0, 1.0, 0.0, 0.0, 0.0, 1.0])
    qk = np.array([0.3, -0.2, 0.1, 0.5, -0.4, 0.7])
    f = macro_part(q[:, None], qk[:, None], SP, vg)[0]
    basis = kernel_basis(shared_params(1.0, 1.0), SP, vg)
    assert np.abs(project_macro(f, basis) - f).max() < 1e-6 * np.abs(f).max()


def test_R0_nearly_compatible():
    g = SpatialGrid(2 * np.pi, 32)
    x = g.x
    s = FluidState.from_fluctuations(g, SP.masses, 0.1, np.sin(x), np.cos(x), np.stack([np.cos(x), 0 * x, 0 * x]),
                                     np.sin(x))
    vg = VelocityGrid(6.0, 14)
    R = build_R0(s, SP, vg)
    worst = max(np.abs(compatibility(R[i], s.params_at(i), SP, vg)).max() for i in range(0, 32, 4))
    assert worst < 1e-2


def test_truncation_validation():
    fr = select_theta_M([1.0], SP)
    F0 = np.ones((1, 2, 8))
    with pytest.raises(ConfigError):
        ExpansionTruncation(0.0, [F0], fr)
    with pytest.raises(ConfigError):
        ExpansionTruncation(0.1, [F0, F0, F0], fr)
    with pytest.raises(DomainError):
        ExpansionTruncation(0.1, [-F0], fr)
    t = ExpansionTruncation(0.1, [F0, 2 * F0], fr)
    assert t.K == 1 and np.allclose(t.F(), 1.2)


def test_equilibrium_background_has_zero_residuals():
    setup = KineticSetup(SP, VelocityGrid(6.0, 8))
    g = SpatialGrid(2 * np.pi, 8)
    q = FluidState.constant(g, SP.masses).q
    states = {k: q for k in ("m", "0", "p")}
    macro = {k: np.zeros_like(q) for k in ("m", "0", "p")}
    snap = expansion_snapshot(setup, states, macro, g, [3], 0.02)
    for K in (0, 1):
        r = expansion_residual(snap, 0.01, K)
        assert r["L2_total"] == 0.0 and r["sup_total"] == 0.0
