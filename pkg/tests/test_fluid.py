import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixhilbert.errors import BlowUpError, ConfigError, DomainError, ShapeError
from mixhilbert.fluid import (AcousticState, FluidState, LinearEulerState, _flux, acoustic_energy,
                              acoustic_solve, acoustic_symbol, conserved_totals, euler_solve, linear_energy,
                              linear_euler_solve, symmetrizer_check, vorticity_hat)
from mixhilbert.grids import SpatialGrid
from oracles import mixture_euler_fluxes, sound_speed_sq

M2 = (1.0, 2.0)


def _bump(g, delta=0.1):
    x = g.x
    return FluidState.from_fluctuations(g, M2, delta, np.sin(x), 0.5 * np.cos(x),
                                        np.stack([np.cos(x), 0.3 * np.sin(2 * x), 0 * x]), 0.7 * np.sin(x + 0.3))


@settings(max_examples=50)
@given(st.floats(0.2, 3), st.floats(0.2, 3), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(0.2, 3))
def test_flux_matches_oracle(nA, nB, u1, u2, u3, th):
    w = np.array([nA, nB, u1, u2, u3, th])
    assert np.allclose(_flux(w, M2, 0), mixture_euler_fluxes(w, *M2), rtol=1e-12, atol=1e-12)


def test_positivity_enforced():
    g = SpatialGrid(2 * np.pi, 16)
    with pytest.raises(DomainError):
        FluidState.constant(g, M2, theta=-1.0)
    with pytest.raises(ShapeError):
        FluidState(np.ones((5, 16)), g, M2)


def test_constant_state_is_stationary():
    g = SpatialGrid(2 * np.pi, 32)
    s = FluidState.constant(g, M2, 1.0, 0.5, (0.3, 0.1, 0.0), 1.2)
    assert np.allclose(euler_solve(s, 0.3).final, s.q, atol=1e-13)


def test_euler_conserves_totals():
    g = SpatialGrid(2 * np.pi, 64)
    tr = euler_solve(_bump(g, 0.2), 0.5, sample_times=[0.25])
    t0 = conserved_totals(tr.states[0], g, M2)
    for q in tr.states:
        assert np.allclose(conserved_totals(q, g, M2), t0, rtol=1e-13, atol=1e-13)


def test_euler_second_order_in_space():
    errs, ref = [], euler_solve(_bump(SpatialGrid(2 * np.pi, 512)), 0.3).final
    for M in (64, 128):
        q = euler_solve(_bump(SpatialGrid(2 * np.pi, M)), 0.3).final
        r = ref.reshape(6, M, -1).mean(axis=2)
        errs.append(np.abs(q - r).max())
    assert np.log2(errs[0] / errs[1]) > 1.7


def test_near_vacuum_rarefaction_reports_time():
    g = SpatialGrid(2 * np.pi, 64)
    z = 0 * g.x
    q = np.stack([0.05 + z, 0.05 + z, 3.0 * np.sin(g.x), z, z, 1.0 + z])
    with pytest.raises(BlowUpError) as e:
        euler_solve(FluidState(q, g, M2), 2.0)
    assert e.value.time is not None


def test_bad_cfl():
    with pytest.raises(ConfigError):
        euler_solve(_bump(SpatialGrid(2 * np.pi, 16)), 0.1, cfl=1.5)


def test_symmetrizer():
    r = symmetrizer_check(_bump(SpatialGrid(2 * np.pi, 32), 0.3), n_cells=20)
    assert r["asymmetry"] < 1e-12 and r["printed_mismatch"] < 1e-12 and r["min_eig_A0"] > 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 5.0), st.sampled_from([1, 3]))
def test_acoustic_energy_and_vorticity(seed, t, d):
    g = SpatialGrid(2 * np.pi, 16 if d == 1 else 8, d)
    q = np.random.default_rng(seed).normal(size=(6,) + g.shape)
    s0 = AcousticState(q, g, M2)
    s1 = acoustic_solve(s0, t)
    for ell in (0, 1, 2):
        assert acoustic_energy(s1, ell) == pytest.approx(acoustic_energy(s0, ell), rel=1e-10)
    w0 = vorticity_hat(s0)
    assert np.abs(vorticity_hat(s1) - w0).max() <= 1e-10 * max(np.abs(w0).max(), 1.0)


@given(st.floats(0.2, 5), st.floats(0.2, 5))
def test_dispersion(ma, mb):
    k = np.array([0.3, -1.2, 2.0])
    lam = np.sort(np.abs(np.linalg.eigvals(acoustic_symbol(k, (ma, mb)))))
    assert lam[-1] ** 2 == pytest.approx(sound_speed_sq(ma, mb) * k @ k, rel=1e-10)
    assert np.allclose(lam[:-2], 0.0, atol=1e-7)


def test_plane_wave_time_dependence():
    g = SpatialGrid(2 * np.pi, 32)
    c = np.sqrt(sound_speed_sq(*M2))
    x = g.x
    # standing wave: a = cos(x), s = 2 theta + n_A + n_B = 0 initially
    q = np.zeros((6, 32))
    q[2] = np.cos(x)
    s = acoustic_solve(AcousticState(q, g, M2), 1.3)
    assert np.allclose(s.q[2], np.cos(c * 1.3) * np.cos(x), atol=1e-12)


def test_linear_euler_zero_data_and_energy():
    g = SpatialGrid(2 * np.pi, 128)
    bg = FluidState.constant(g, M2)
    zero = linear_euler_solve(LinearEulerState(np.zeros((6, 128)), g), bg, 0.5)
    assert not np.any(zero.final)
    x = g.x
    qk = np.stack([np.sin(x), np.cos(x), np.sin(2 * x), 0 * x, np.cos(x), np.sin(x)])
    tr = linear_euler_solve(LinearEulerState(qk, g), bg, 1.0)
    e0, e1 = (linear_energy(q, bg.q, g, M2) for q in (tr.states[0], tr.final))
    assert abs(e1 / e0 - 1) < 1e-3


def test_trajectory_csv(tmp_path):
    g = SpatialGrid(2 * np.pi, 8)
    tr = euler_solve(_bump(g), 0.1, sample_times=[0.05], delta=0.1)
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,x,n_A,n_B,u1,u2,u3,theta"
    assert len(lines) == 1 + 3 * 8
    meta = json.loads((tmp_path / "t.json").read_text())
    assert meta["cfl"] == 0.4 and meta["delta"] == 0.1
