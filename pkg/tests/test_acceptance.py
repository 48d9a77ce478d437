"""The thirteen acceptance criteria at their stated tolerances.

Each test prints one line `criterion k: PASS|FAIL ...`; the lines are
repeated in the terminal summary.
"""
import filecmp
import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from mixhilbert import cli
from mixhilbert import experiments as ex
from mixhilbert import kernel_estimates as ke
from mixhilbert.collision import CollisionOperator, seeded_state
from mixhilbert.fluid import AcousticState, acoustic_energy, acoustic_solve, acoustic_symbol, vorticity_hat
from mixhilbert.grids import SpatialGrid, VelocityGrid, lebedev_like_rule
from mixhilbert.linearized import assemble_L, coercivity, kernel_basis, kernel_residuals
from mixhilbert.species import SpeciesPair, bi_maxwellian, shared_params

SP = SpeciesPair(1.0, 2.0, 1.0)


def verdict(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_c01_conservation():
    t0 = time.perf_counter()
    g = VelocityGrid(6.0, 16)
    op = CollisionOperator(SP, g, lebedev_like_rule(6))
    _, rel = op.invariant_pairings(op.collision_term(seeded_state(SP, g, 0)))
    dt = time.perf_counter() - t0
    verdict(1, rel.max() <= 1e-6 and dt < 120, f"max relative pairing {rel.max():.2e} (<= 1e-6), {dt:.1f} s (< 120 s)")


def test_c02_equilibrium_order():
    errs, hs = [], []
    for N in (12, 24):
        g = VelocityGrid(6.0, N)
        op = CollisionOperator(SP, g, lebedev_like_rule(6))
        errs.append(float(np.abs(op.collision_term(bi_maxwellian(shared_params(1.0, 1.0), SP, g))).max()))
        hs.append(g.h)
    order = np.log(errs[0] / errs[1]) / np.log(hs[0] / hs[1])
    verdict(2, order >= 2.0, f"max|Q(mu, mu)| {errs[0]:.3e} -> {errs[1]:.3e}, order {order:.2f} (>= 2)")


def test_c03_h_theorem():
    g = VelocityGrid(6.0, 12)
    op = CollisionOperator(SP, g, lebedev_like_rule(6))
    eq = [abs(op.entropy_production(bi_maxwellian(p, SP, g))) for p in
          (shared_params(1.0, 1.0), shared_params(0.6, 1.4, (0.3, -0.2, 0.1), 0.8),
           shared_params(1.5, 0.5, (0.0, 0.0, -0.4), 1.2))]
    ne = [op.entropy_production(seeded_state(SP, g, 100 + i)) for i in range(20)]
    ok = max(eq) <= 1e-8 and max(ne) < -1e-4
    verdict(3, ok, f"equilibrium max |D| {max(eq):.1e} (<= 1e-8); nonequilibrium max D {max(ne):.3e} (< -1e-4)")


def _spectrum(N):
    g = VelocityGrid(6.0, N)
    p = shared_params(1.0, 1.0)
    op = assemble_L(p, SP, g, lebedev_like_rule(6))
    b = kernel_basis(p, SP, g)
    return (op.symmetry_defect(), kernel_residuals(op, b).max(), float(np.abs(b.gram() - np.eye(6)).max()),
            coercivity(op, b)[0])


def test_c04_linearized_operator():
    s16, lx16, g16, c16 = _spectrum(16)
    s24, lx24, g24, c24 = _spectrum(24)
    ok = (max(s16, s24) <= 1e-8 and lx16 <= 0.05 and lx24 <= lx16 / 2 and max(g16, g24) <= 1e-6
          and min(c16, c24) > 0 and abs(c24 - c16) <= 0.2 * c16)
    verdict(4, ok, f"symmetry {max(s16, s24):.1e}; LX {lx16:.4f} -> {lx24:.4f}; gram {max(g16, g24):.1e};"
                   f" c0 {c16:.3f} -> {c24:.3f}")


@pytest.fixture(scope="module")
def kernel_runs():
    out = {}
    spec = ke.CutoffSpec(0.2)
    for gamma in (1.0, -1.0):
        sp = SpeciesPair(1.0, 2.0, gamma)
        fr = ke.default_frame(sp)
        t0 = time.perf_counter()
        reps = [ke.verify_k1(fr, spec), ke.verify_typical(fr, spec), ke.verify_hybrid_cross(fr, spec),
                ke.verify_hybrid_equal(fr, spec), ke.verify_integrated_decay(fr, spec)]
        t1 = time.perf_counter()
        sing = ke.verify_singular_scaling(fr)
        out[gamma] = (reps, t1 - t0, sing)
    return out


def test_c05_kernel_bounds(kernel_runs):
    total = sum(v[1] for v in kernel_runs.values())
    parts, ok = [], total < 600
    for gamma, (reps, _, _) in kernel_runs.items():
        ok &= all(r.passed for r in reps)
        dec = reps[-1].fitted_exponents
        parts.append(f"gamma {gamma:+.0f}: " + ", ".join(
            f"{r.bound_id} c={r.fitted_exponents['c']:.3f}" for r in reps[:-1])
            + f", decay slopes {dec['slope_A']:.2f}/{dec['slope_B']:.2f} (target {dec['target']:.0f} +- 0.3)")
    verdict(5, ok, "; ".join(parts) + f"; {total:.0f} s (< 600 s)")


def test_c06_singular_scaling(kernel_runs):
    s = {g: v[2] for g, v in kernel_runs.items()}
    ok = all(r.passed for r in s.values())
    verdict(6, ok, "; ".join(f"gamma {g:+.0f}: slope {r.fitted_exponents['slope']:.3f} (target"
                             f" {r.fitted_exponents['target']:.0f} +- 0.2)" for g, r in s.items()))


def test_c07_jacobian():
    r = ke.verify_jacobian(SP, n_configs=100)
    verdict(7, r.passed, f"max |det - (m_B - m_A)/(m_A + m_B)| {r.max_ratio:.1e} over 100 configurations (<= 1e-6)")


def test_c08_acoustic_solver():
    M2 = SP.masses
    worst_e = worst_v = worst_w = 0.0
    for d, M in ((1, 64), (3, 16)):
        g = SpatialGrid(2 * np.pi, M, d)
        q = np.random.default_rng(d).normal(size=(6,) + g.shape)
        q[..., :] += ex.default_profile(g)
        s0 = AcousticState(q, g, M2)
        e0 = acoustic_energy(s0)
        w0 = vorticity_hat(s0)
        for t in np.linspace(0.0, 5.0, 26):
            s = acoustic_solve(s0, t)
            worst_e = max(worst_e, abs(acoustic_energy(s) - e0) / e0)
            worst_v = max(worst_v, float(np.abs(vorticity_hat(s) - w0).max() / np.abs(w0).max()))
        for k in g.wavenumbers[1: M // 2]:
            for kv in ([k, 0, 0], [k, -k, 0.5 * k]):
                kv = np.asarray(kv, float)
                w2 = np.max(np.abs(np.linalg.eigvals(acoustic_symbol(kv, M2)))) ** 2
                target = 10.0 / (3.0 * sum(M2)) * kv @ kv
                worst_w = max(worst_w, abs(w2 - target) / target)
    ok = worst_e <= 1e-10 and worst_v <= 1e-10 and worst_w <= 1e-10
    verdict(8, ok, f"energy drift {worst_e:.1e}, vorticity change {worst_v:.1e}, dispersion {worst_w:.1e} (all <= 1e-10)")


def test_c09_linearization_rate():
    r = ex.acoustic_linearization_rate()
    ok = r.passed and r.wall_time < 300
    verdict(9, ok, f"sup slope {r.slope:.3f} (2 +- 0.2), fit residual {r.fit_residual:.1e}, {r.wall_time:.1f} s")


def test_c10_taylor_rate():
    r = ex.maxwellian_taylor_rate()
    ok = r.passed and abs(r.slope - 2) <= 0.1 and abs(r.extra["slope_L2"] - 2) <= 0.1
    verdict(10, ok, f"sup slope {r.slope:.3f}, L2 slope {r.extra['slope_L2']:.3f} (2 +- 0.1)")


def test_c11_residual_order():
    r = ex.hydrodynamic_residual_rate()
    ok = r.slope >= 0.8 and r.extra["K0_over_K1"] > 10 and r.fit_residual < 0.1
    verdict(11, ok, f"K=1 L2 slope {r.slope:.3f} (>= 0.8), K0/K1 at eps=0.01 {r.extra['K0_over_K1']:.0f} (> 10);"
                    f" sup slope {r.extra['slope_sup']:.2f} reported")


def test_c12_acoustic_limit_proxy():
    r = ex.acoustic_limit_proxy_rate()
    ok = abs(r.slope - 0.5) <= 0.1 and r.fit_residual < 0.1 and r.extra["argmin_in_window"]
    verdict(12, ok, f"L2 slope {r.slope:.3f} (0.5 +- 0.1), sup slope {r.extra['slope_sup']:.3f};"
                    f" sweep minimum at delta {r.extra['argmin_delta']} (window [0.05, 0.2])")


def test_c13_reproducibility(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"velocity": {"N": 10}, "spatial": {"M": 64}, "study": {"h_states": 3}}))
    diffs, n = [], 0
    for cmd in ("collide", "spectrum", "euler", "acoustic"):
        for run in ("a", "b"):
            assert cli.main([cmd, "--config", str(cfg), "--out", str(tmp_path / run / cmd), "--seed", "3"]) in (0, 1)
        cmp = filecmp.dircmp(tmp_path / "a" / cmd, tmp_path / "b" / cmd)
        files = [f for f in cmp.common_files if f != "timings.json"]
        _, mismatch, errors = filecmp.cmpfiles(tmp_path / "a" / cmd, tmp_path / "b" / cmd, files, shallow=False)
        diffs += mismatch + errors + cmp.left_only + cmp.right_only
        n += len(files)
    verdict(13, not diffs, f"{n} output files byte-identical across two runs" if not diffs else f"differ: {diffs}")
