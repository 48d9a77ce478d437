import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixhilbert.errors import ConfigError, DomainError, FrameInfeasibleError
from mixhilbert.grids import VelocityGrid
from mixhilbert.species import (MaxwellParams, SpeciesPair, bi_maxwellian, collision_invariant_vectors,
                                maxwellian, moments, select_theta_M, shared_params, weight)
from oracles import maxwellian as ref_maxwellian


def test_gamma_range():
    with pytest.raises(ConfigError, match=r"\(-3, 1\]"):
        SpeciesPair(gamma=1.5)
    with pytest.raises(ConfigError):
        SpeciesPair(gamma=-3.0)
    SpeciesPair(gamma=-2.9)


def test_asymmetric_cross_constant_rejected():
    with pytest.raises(ConfigError):
        SpeciesPair(C_phi=((1.0, 2.0), (1.0, 1.0)))


def test_bad_params():
    with pytest.raises(DomainError):
        MaxwellParams(n=0.0)
    with pytest.raises(DomainError):
        MaxwellParams(theta=-1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 3), st.floats(-1, 1), st.floats(0.5, 2), st.floats(0.5, 4))
def test_maxwellian_matches_closed_form(n, u, th, m):
    v = np.random.default_rng(1).normal(size=(20, 3))
    got = maxwellian(MaxwellParams(n, (u, 0.0, 0.0), th), m, v)
    assert np.allclose(got, ref_maxwellian(n, (u, 0, 0), th, m, v), rtol=1e-13)


def test_moments_of_bimaxwellian():
    sp, g = SpeciesPair(), VelocityGrid(7.0, 24)
    F = bi_maxwellian(shared_params(1.2, 0.8, (0.3, 0.0, -0.2), 0.9), sp, g)
    mo = moments(F, sp, g)
    assert np.allclose(mo.n_species, [1.2, 0.8], rtol=1e-7)
    assert np.allclose(mo.u, [0.3, 0.0, -0.2], atol=1e-7)
    assert mo.theta == pytest.approx(0.9, rel=1e-6)


def test_invariants_shape_and_content():
    sp, g = SpeciesPair(), VelocityGrid(6.0, 4)
    psi = collision_invariant_vectors(sp, g)
    assert psi.shape == (6, 2, g.size)
    assert np.allclose(psi[5, 1], 2.0 * np.sum(g.nodes ** 2, 1))


def test_weight():
    assert weight(np.zeros(3)) == 1.0
    assert weight(np.array([3.0, 0, 4.0]), 2.0) == pytest.approx(36.0)


def test_frame_selection():
    sp = SpeciesPair()
    fr = select_theta_M([1.0, 1.2], sp)
    assert fr.theta_M == 1.0 and sp.q_lower < fr.q_tilde < 1.0
    with pytest.raises(FrameInfeasibleError):
        select_theta_M([1.0, 5.0], sp)
