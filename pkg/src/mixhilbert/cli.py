"""Command-line entry point: `mixhilbert <subcommand> --config cfg.json --out dir`.

Every run writes manifest.json plus the subcommand's CSV/JSON outputs.
Wall-clock timings go to timings.json only, so that all other files are
byte-identical across reruns with the same config and seed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

COMMANDS = ("collide", "spectrum", "kernels", "euler", "acoustic", "limits")
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS")


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=1, default=_jsonable) + "\n"


def _jsonable(x):
    import numpy as np
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


# ---- field format -------------------------------------------------------------

def write_field(path, array, meta=None, frame="raw"):
    """Flat little-endian float64 values plus `<path>.json` (shape, frame tag, metadata)."""
    import numpy as np
    path = Path(path)
    a = np.ascontiguousarray(array, dtype="<f8")
    a.tofile(path)
    side = {"shape": list(a.shape), "dtype": "<f8", "order": "C", "frame": frame, **(meta or {})}
    Path(str(path) + ".json").write_text(_dump(side))
    return path


def read_field(path):
    import numpy as np
    path = Path(path)
    side = json.loads(Path(str(path) + ".json").read_text())
    a = np.fromfile(path, dtype="<f8").reshape(side["shape"])
    return a, side


# ---- subcommands ----------------------------------------------------------------

def run_collide(cfg, out):
    import numpy as np

    from .collision import CollisionOperator, seeded_state
    from .grids import lebedev_like_rule
    from .species import bi_maxwellian, shared_params

    sp, g = cfg.species_pair(), cfg.velocity_grid()
    op = CollisionOperator(sp, g, lebedev_like_rule(cfg.angular_order))
    F = seeded_state(sp, g, cfg.seed)
    C = op.collision_term(F)
    raw, rel = op.invariant_pairings(C)
    mu = bi_maxwellian(shared_params(1.0, 0.7, (0.2, 0.0, -0.1), 1.1), sp, g)
    Cmu = op.collision_term(mu)
    eq = float(np.abs(Cmu).max())
    h_eq = op.entropy_production(mu, Cmu)
    h_ne = [op.entropy_production(s, None)
            for s in (seeded_state(sp, g, cfg.seed + 1 + i) for i in range(cfg.study.h_states))]
    res = {
        "conservation": {"pairings": raw, "relative": rel, "tolerance": 1e-6, "pass": bool(rel.max() <= 1e-6)},
        "equilibrium": {"max_abs_Q": eq, "h": g.h, "N": g.N},
        "h_theorem": {"equilibrium": h_eq, "nonequilibrium": h_ne,
                      "pass": bool(abs(h_eq) <= 1e-8 and max(h_ne, default=-1.0) < -1e-4)},
    }
    (out / "collide.json").write_text(_dump(res))
    return res["conservation"]["pass"] and res["h_theorem"]["pass"]


def run_spectrum(cfg, out):
    import numpy as np

    from .grids import lebedev_like_rule
    from .linearized import assemble_L, coercivity, kernel_basis, kernel_residuals
    from .species import shared_params

    sp, g = cfg.species_pair(), cfg.velocity_grid()
    params = shared_params(1.0, 1.0)
    op = assemble_L(params, sp, g, lebedev_like_rule(cfg.angular_order))
    basis = kernel_basis(params, sp, g)
    lx = kernel_residuals(op, basis)
    gram = float(np.abs(basis.gram() - np.eye(6)).max())
    c0, _ = coercivity(op, basis, seed=cfg.seed)
    res = {"N": g.N, "R": g.R, "dof": int(op.L.shape[0]), "symmetry_defect": op.symmetry_defect(),
           "raw_asymmetry": op.raw_asymmetry, "LX_ratios": lx, "gram_deviation": gram, "coercivity": c0}
    res["pass"] = bool(res["symmetry_defect"] <= 1e-8 and lx.max() <= 0.05 and gram <= 1e-6 and c0 > 0)
    if cfg.study.export_operator:
        op.export(out / "operator.bin")
    (out / "spectrum.json").write_text(_dump(res))
    return res["pass"]


def run_kernels(cfg, out):
    from . import kernel_estimates as ke

    sp, spec, frame = cfg.species_pair(), cfg.cutoff(), cfg.kernel_frame()
    s = cfg.seed
    reports = [ke.verify_k1(frame, spec, seed=s), ke.verify_typical(frame, spec, seed=s + 1)]
    notes = []
    if sp.m_A == sp.m_B:
        notes.append("hybrid_cross_weighted skipped: equal masses, the cross Hybrid kernel degenerates")
    else:
        reports.append(ke.verify_hybrid_cross(frame, spec, seed=s + 2))
    reports += [ke.verify_hybrid_equal(frame, spec, seed=s + 3), ke.verify_integrated_decay(frame, spec),
                ke.verify_singular_scaling(frame), ke.verify_jacobian(sp, seed=s + 5)]
    docs = [json.loads(r.to_json()) for r in reports]
    (out / "kernels.json").write_text(_dump({"reports": docs, "notes": notes}))
    return all(r.passed for r in reports)


def run_euler(cfg, out):
    import numpy as np

    from .experiments import REFERENCE, default_profile
    from .fluid import FluidState, conserved_totals, euler_solve, symmetrizer_check

    g, st = cfg.spatial_grid(), cfg.study
    sp = cfg.species_pair()
    delta = st.deltas[0]
    ref = REFERENCE.reshape((6,) + (1,) * g.d)
    s = FluidState(ref + delta * default_profile(g), g, sp.masses)
    times = list(np.linspace(0.0, st.t_end, 6)[1:-1])
    tr = euler_solve(s, st.t_end, cfl=st.cfl, sample_times=times, delta=delta)
    tr.meta.update({"gamma": sp.gamma, "grid": {"Lx": g.Lx, "M": g.M, "d": g.d}})
    tr.to_csv(out / "euler_trajectory.csv")
    write_field(out / "euler_final.bin", tr.final, {"Lx": g.Lx, "M": g.M, "d": g.d, "t": st.t_end},
                frame="primitive")
    tot0 = conserved_totals(tr.states[0], g, sp.masses)
    drift = float(max(np.abs(conserved_totals(q, g, sp.masses) - tot0).max() for q in tr.states)
                  / np.abs(tot0).max())
    sym = symmetrizer_check(FluidState(tr.final, g, sp.masses), seed=cfg.seed)
    ok = drift <= 1e-10 and sym["asymmetry"] <= 1e-12 and sym["printed_mismatch"] <= 1e-12 and sym["min_eig_A0"] > 0
    res = {"conserved_drift": drift, "symmetrizer": sym, "steps": tr.meta["steps"],
           "deviation_over_delta": tr.meta["deviation_over_delta"], "pass": bool(ok)}
    (out / "euler.json").write_text(_dump(res))
    return ok


def run_acoustic(cfg, out):
    import numpy as np

    from .experiments import default_profile
    from .fluid import AcousticState, Trajectory, acoustic_energy, acoustic_solve, acoustic_symbol, vorticity_hat

    g, st = cfg.spatial_grid(), cfg.study
    sp = cfg.species_pair()
    s0 = AcousticState(default_profile(g), g, sp.masses)
    times = list(np.linspace(0.0, st.acoustic_t_end, 11))
    states = [acoustic_solve(s0, t) for t in times]
    e0 = [acoustic_energy(s0, ell) for ell in (0, 1, 2)]
    drift = max(abs(acoustic_energy(s, ell) - e0[ell]) / e0[ell] for s in states for ell in (0, 1, 2))
    w0 = vorticity_hat(s0)
    scale = max(float(np.abs(w0).max()), 1.0)
    vort = max(float(np.abs(vorticity_hat(s) - w0).max()) for s in states) / scale
    M = sum(sp.masses)
    disp = 0.0
    rng = np.random.default_rng(cfg.seed)
    for k in rng.normal(size=(20, 3)) * 4.0:
        lam = np.linalg.eigvals(acoustic_symbol(k, sp.masses))
        w2 = float(np.max(np.abs(lam)) ** 2)
        target = 10.0 / (3.0 * M) * float(k @ k)
        disp = max(disp, abs(w2 - target) / target)
    Trajectory(times, [s.q for s in states], g, {"scheme": "exact-spectral", "masses": list(sp.masses),
                                                  "gamma": sp.gamma}).to_csv(out / "acoustic_trajectory.csv")
    ok = drift <= 1e-10 and vort <= 1e-10 and disp <= 1e-10
    res = {"energy_drift": drift, "vorticity_change": vort, "dispersion_error": disp, "pass": bool(ok)}
    (out / "acoustic.json").write_text(_dump(res))
    return ok


def run_limits(cfg, out, timings):
    from . import experiments as ex
    from .hilbert import KineticSetup

    st, sp = cfg.study, cfg.species_pair()
    setup = KineticSetup(sp, cfg.velocity_grid(st.kinetic_N), cfg.angular_order)
    g = cfg.spatial_grid(d=1)
    reps = [ex.acoustic_linearization_rate(st.deltas, g, sp.masses, st.t_end, st.cfl),
            ex.maxwellian_taylor_rate(st.deltas, setup, g, st.t_end, st.cfl),
            ex.hydrodynamic_residual_rate(st.eps, setup, cfg.spatial_grid(st.residual_M, 1),
                                          st.residual_delta, st.t_end, cfl=st.cfl),
            ex.acoustic_limit_proxy_rate(st.proxy_eps, setup, cfg.spatial_grid(st.proxy_M, 1), st.t_end,
                                         st.cfl, sweep_eps=st.sweep_eps, sweep_deltas=tuple(st.sweep_deltas))]
    ex.write_reports(reps, out)
    timings.update({r.study: {"wall_time": r.wall_time, "runtimes": r.runtimes} for r in reps})
    return all(r.passed for r in reps)


def run_subcommand(name, cfg, out, timings=None):
    """Run one study into `out`; returns True iff every pass flag is set."""
    timings = {} if timings is None else timings
    handlers = {"collide": run_collide, "spectrum": run_spectrum, "kernels": run_kernels,
                "euler": run_euler, "acoustic": run_acoustic}
    if name == "limits":
        return run_limits(cfg, out, timings)
    if name not in handlers:
        from .errors import ConfigError
        raise ConfigError("command", f"unknown subcommand {name!r}")
    return handlers[name](cfg, out)


def _parser():
    p = argparse.ArgumentParser(prog="mixhilbert", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON run configuration; defaults when omitted")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    p.add_argument("--seed", type=int, default=None, help="seed (overrides the config)")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print(json.dumps({"kind": "configuration", "field": "--threads", "message": "must be >= 1"}),
                  file=sys.stderr)
            return 2
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)

    from .config import config_from_dict, load_config, manifest, validate
    from .errors import MixError

    out = None
    try:
        if args.config:
            cfg, defaulted = load_config(args.config)
        else:
            cfg, defaulted = config_from_dict({})
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out:
            cfg.out = args.out
        validate(cfg)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(_dump(manifest(cfg, defaulted, args.command)))
        timings = {}
        t0 = time.perf_counter()
        ok = run_subcommand(args.command, cfg, out, timings)
        timings["total"] = time.perf_counter() - t0
        (out / "timings.json").write_text(_dump(timings))
    except MixError as e:
        doc = e.to_json()
        print(json.dumps(doc), file=sys.stderr)
        if out is not None:
            (out / "error.json").write_text(_dump(doc))
        return e.exit_code
    status = {"command": args.command, "pass": bool(ok)}
    print(json.dumps(status))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
