import numpy as np
import pytest

from mixhilbert.errors import FrameError
from mixhilbert.grids import VelocityGrid, lebedev_like_rule
from mixhilbert.linearized import (MicroSolver, assemble_L, coercivity, kernel_basis, kernel_residuals,
                                   nu_alpha, project_macro, rayleigh_nu)
from mixhilbert.species import MaxwellParams, SpeciesPair, shared_params


@pytest.fixture(scope="module")
def setup():
    sp, g = SpeciesPair(), VelocityGrid(6.0, 10)
    params = shared_params(1.0, 1.0)
    op = assemble_L(params, sp, g, lebedev_like_rule(6))
    return sp, g, params, op, kernel_basis(params, sp, g)


def test_gram_is_identity_for_unequal_masses():
    sp, g = SpeciesPair(m_A=1.0, m_B=4.0), VelocityGrid(8.0, 40)
    b = kernel_basis(shared_params(0.7, 1.4, (0.1, 0, 0), 1.2), sp, g)
    assert np.abs(b.gram() - np.eye(6)).max() < 1e-6


def test_projection_idempotent():
    basis = kernel_basis(shared_params(1.0, 1.0), SpeciesPair(), VelocityGrid(6.0, 20))
    f = np.random.default_rng(0).normal(size=basis.X.shape[1:])
    p = project_macro(f, basis)
    assert np.abs(project_macro(p, basis) - p).max() < 1e-6 * np.abs(p).max()


def test_symmetric_and_small_on_kernel(setup):
    _, _, _, op, basis = setup
    assert op.symmetry_defect() <= 1e-8
    assert kernel_residuals(op, basis).max() < 0.3


def test_coercive_on_micro_part(setup):
    _, _, _, op, basis = setup
    c0, f = coercivity(op, basis)
    assert c0 > 0
    assert rayleigh_nu(op, f) == pytest.approx(c0, rel=1e-6)


def test_micro_solve_roundtrip(setup):
    _, g, _, op, basis = setup
    rng = np.random.default_rng(2)
    solver = MicroSolver(op, basis)
    r = solver.apply(op.extend(rng.normal(size=op.L.shape[0])))
    f, overlap = solver(r)
    assert overlap < 1e-10
    assert np.abs(op.restrict(f) @ solver.Q).max() < 1e-8
    assert np.linalg.norm(solver.apply(f) - r) < 1e-6 * np.linalg.norm(r)


def test_collision_frequency_grows_for_hard_potentials():
    sp = SpeciesPair()
    p = shared_params(1.0, 1.0)
    v = np.array([[0.0, 0, 0], [5.0, 0, 0]])
    nu = nu_alpha(v, 0, p, sp)
    assert nu[1] > nu[0] > 0


def test_unshared_frame_rejected():
    with pytest.raises(FrameError):
        kernel_basis((MaxwellParams(1, (0, 0, 0), 1), MaxwellParams(1, (0, 0, 0), 2)), SpeciesPair(),
                     VelocityGrid(6.0, 4))
