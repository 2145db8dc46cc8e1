"""Batch front-end.

Subcommands: simulate, optimize, tdvp, multilevel, verify, spectrum.
Exit codes: 0 success, 2 configuration error, 3 numerical-convergence
failure, 4 verification failure.
"""

import argparse
import json
import os
import sys
from pathlib import Path


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="resetsim",
        description="spin-boson qubit reset: simulation, control, diagnostics")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS/OpenMP thread cap (set before compute)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
            ("simulate", "run a reset protocol and write the trajectory"),
            ("optimize", "optimize the frequency protocol"),
            ("tdvp", "variational displacement dynamics for a protocol"),
            ("multilevel", "d-level transmon reset run"),
            ("verify", "run the oracle cross-check suite"),
            ("spectrum", "power spectrum of a protocol file")]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=(name != "spectrum"),
                       help="path to the JSON run configuration")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=0)
        if name == "spectrum":
            p.add_argument("--protocol", required=True,
                           help="protocol CSV (t_ns, omega_q_ghz)")
        if name == "tdvp":
            p.add_argument("--protocol", default=None,
                           help="protocol CSV; defaults to the constant protocol")
    args = parser.parse_args(argv)

    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from .errors import (BondLimitError, ConfigError, ConvergenceError,
                         NumericalAccuracyError)

    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalAccuracyError, ConvergenceError, BondLimitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def _dispatch(args):
    if args.command == "spectrum":
        return _cmd_spectrum(args)
    from .config import load_config
    cfg = load_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    if args.command == "simulate":
        return _cmd_simulate(cfg, args)
    if args.command == "optimize":
        return _cmd_optimize(cfg, args)
    if args.command == "tdvp":
        return _cmd_tdvp(cfg, args)
    if args.command == "multilevel":
        return _cmd_multilevel(cfg, args)
    if args.command == "verify":
        return _cmd_verify(cfg, args)
    raise AssertionError(args.command)


def _build_pt(cfg, coupling=None, use_cache=True):
    import numpy as np

    from .influence import (build_influence, build_process_tensor,
                            load_process_tensor, save_process_tensor)
    from .io import config_hash

    inf = build_influence(cfg.bath, cfg.dt, cfg.n_steps,
                          coupling_eigenvalues=coupling,
                          memory_tol=cfg.memory_tol,
                          memory_max_steps=cfg.memory_max_steps)
    key = config_hash({
        "bath": inf.bath_key, "dt": cfg.dt, "n": cfg.n_steps,
        "cutoff": cfg.svd_cutoff, "K": inf.memory_steps,
        "coupling": list(map(float, inf.coupling_eigenvalues))})[:24]
    cache = Path(cfg.out_dir)/f"pt_{key}.bin"
    if use_cache and cache.exists():
        return load_process_tensor(cache)
    pt = build_process_tensor(inf, svd_cutoff=cfg.svd_cutoff,
                              max_bond=cfg.max_bond)
    if use_cache:
        save_process_tensor(pt, cache)
    return pt


def _protocol_from_config(cfg, args, pt=None):
    import numpy as np

    from .dynamics import ControlProtocol
    from .io import read_csv
    from .units import ghz_to_angular

    if cfg.control_mode == "from_file" or getattr(args, "protocol", None):
        path = getattr(args, "protocol", None) or cfg.protocol_file
        _, data = read_csv(path)
        omega = ghz_to_angular(data[:, 1])
        return ControlProtocol(omega=omega, dt=cfg.dt, bounds=cfg.bounds)
    return ControlProtocol.constant(cfg.omega_q0, cfg.dt, cfg.n_steps,
                                    bounds=cfg.bounds)


def _write_trajectory(cfg, result, name, extra=None, seed=0):
    import numpy as np

    from .io import write_csv, write_metadata
    from .units import angular_to_ghz

    out = Path(cfg.out_dir)
    pops = result.populations
    if pops.ndim == 1:
        cols = ["t_ns", "P_plus"]
        table = np.column_stack([result.times, pops])
    else:
        d = pops.shape[1]
        cols = ["t_ns"] + [f"P_{k}" for k in range(d)]
        table = np.column_stack([result.times, pops])
    csv_path = out/f"{cfg.prefix}_{name}.csv"
    write_csv(csv_path, cols, table)
    write_metadata(out/f"{cfg.prefix}_{name}.json", cfg.raw, seed=seed,
                   extra=extra)
    return csv_path


def _cmd_simulate(cfg, args):
    pt = _build_pt(cfg)
    protocol = _protocol_from_config(cfg, args)
    from .dynamics import run_protocol
    from .io import array_hash
    result = run_protocol(pt, protocol)
    extra = {"bath_key": pt.bath_key, "svd_cutoff": pt.svd_cutoff,
             "memory_steps": pt.memory_steps,
             "protocol_hash": array_hash(protocol.omega),
             "final_population": float(result.p_plus[-1])}
    path = _write_trajectory(cfg, result, "trajectory", extra, args.seed)
    print(path)
    return 0


def _cmd_optimize(cfg, args):
    import numpy as np

    from .control import cost_and_gradient, optimize, power_spectrum
    from .dynamics import ControlProtocol, run_protocol
    from .io import array_hash, write_csv, write_metadata
    from .units import angular_to_ghz

    pt = _build_pt(cfg)
    init = ControlProtocol.constant(cfg.omega_q0, cfg.dt, cfg.n_steps,
                                    bounds=cfg.bounds)
    if cfg.random_init:
        rng = np.random.default_rng(args.seed)
        lo, hi = cfg.bounds
        omega = np.clip(cfg.omega_q0
                        + cfg.random_scale*rng.standard_normal(cfg.n_steps),
                        lo, hi)
        init = ControlProtocol(omega=omega, dt=cfg.dt, bounds=cfg.bounds)
    res = optimize(pt, init, gtol=cfg.gtol, maxiter=cfg.maxiter)
    out = Path(cfg.out_dir)
    write_csv(out/f"{cfg.prefix}_protocol.csv", ["t_ns", "omega_q_ghz"],
              np.column_stack([res.protocol.times[:-1],
                               angular_to_ghz(res.protocol.omega)]))
    write_csv(out/f"{cfg.prefix}_cost_history.csv", ["iteration", "infidelity"],
              np.column_stack([np.arange(res.history.size), res.history]))
    freq, power = power_spectrum(res.protocol)
    write_csv(out/f"{cfg.prefix}_protocol_spectrum.csv", ["freq_ghz", "power"],
              np.column_stack([freq, power]))
    traj = run_protocol(pt, res.protocol)
    _write_trajectory(cfg, traj, "optimized_trajectory", seed=args.seed)
    z0 = cost_and_gradient(pt, init)[0]
    write_metadata(out/f"{cfg.prefix}_optimize.json", cfg.raw, seed=args.seed,
                   extra={"initial_infidelity": z0,
                          "final_infidelity": res.infidelity,
                          "improvement_factor":
                              z0/res.infidelity if res.infidelity > 0 else np.inf,
                          "iterations": res.n_iterations,
                          "evaluations": res.n_evaluations,
                          "gradient_norm_final": res.gradient_norm_final,
                          "converged": res.converged,
                          "protocol_hash": array_hash(res.protocol.omega),
                          "bounds_ghz": list(angular_to_ghz(np.array(cfg.bounds)))})
    print(out/f"{cfg.prefix}_protocol.csv")
    return 0


def _cmd_tdvp(cfg, args):
    import numpy as np

    from .bath import discretize
    from .io import write_csv, write_metadata
    from .polaron import (equilibrium_displacements, integrate_tdvp,
                          phase_profile, top_weight_mask)
    from .units import angular_to_ghz

    bath = discretize(cfg.bath, n_modes=cfg.tdvp_n_modes)
    protocol = _protocol_from_config(cfg, args)
    eq = equilibrium_displacements(bath, cfg.omega_q0)
    traj = integrate_tdvp(eq, protocol, cfg.omega_q0,
                          full_nonlinear=cfg.tdvp_full_nonlinear)
    out = Path(cfg.out_dir)
    write_csv(out/f"{cfg.prefix}_tdvp.csv", ["t_ns", "S", "P_plus"],
              np.column_stack([traj.times, traj.total_excitation, traj.p_plus]))
    prof = phase_profile(traj.f[-1], eq.f, bath, cfg.omega_q0)
    mask = top_weight_mask(bath) & prof.defined
    write_csv(out/f"{cfg.prefix}_phase_profile.csv",
              ["omega_k_prime_ghz", "phase_rad"],
              np.column_stack([angular_to_ghz(prof.omega_prime[mask]),
                               prof.phase[mask]]))
    write_metadata(out/f"{cfg.prefix}_tdvp.json", cfg.raw, seed=args.seed,
                   extra={"n_modes": bath.n_modes,
                          "final_S": float(traj.total_excitation[-1]),
                          "final_P_plus": float(traj.p_plus[-1])})
    print(out/f"{cfg.prefix}_tdvp.csv")
    return 0


def _cmd_multilevel(cfg, args):
    import numpy as np

    from .bath import discretize
    from .dynamics import TransmonSpec, transmon_coupling_basis
    from .io import write_metadata
    from .transmon import (population_series, run_multilevel_reset,
                           solve_multilevel_displacements)

    spec = TransmonSpec(d=cfg.levels if cfg.levels >= 2 else 5,
                        omega_q=cfg.omega_q0, alpha_A=cfg.alpha_A)
    svals, _ = transmon_coupling_basis(spec.d)
    pt = _build_pt(cfg, coupling=svals)
    protocol = _protocol_from_config(cfg, args)
    result = run_multilevel_reset(pt, spec, protocol)
    bath = discretize(cfg.bath, n_modes=cfg.tdvp_n_modes)
    mp = solve_multilevel_displacements(spec, bath)
    series = [population_series(mp, k) for k in range(min(spec.d, 4))]
    extra = {"ansatz_populations": series,
             "ansatz_S": mp.total_excitation,
             "final_populations": [float(v) for v in result.populations[-1]]}
    path = _write_trajectory(cfg, result, "multilevel", extra, args.seed)
    print(path)
    return 0


def _cmd_spectrum(args):
    import numpy as np

    from .control import power_spectrum
    from .dynamics import ControlProtocol
    from .io import read_csv, write_csv
    from .units import ghz_to_angular

    _, data = read_csv(args.protocol)
    t = data[:, 0]
    dt = float(t[1] - t[0]) if t.size > 1 else 1.0
    omega = ghz_to_angular(data[:, 1])
    protocol = ControlProtocol(omega=omega, dt=dt,
                               bounds=(omega.min() - 1.0, omega.max() + 1.0))
    freq, power = power_spectrum(protocol)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out/"protocol_spectrum.csv"
    write_csv(path, ["freq_ghz", "power"], np.column_stack([freq, power]))
    print(path)
    return 0


def _cmd_verify(cfg, args):
    import numpy as np

    from . import verify as verify_mod
    from .io import write_metadata

    report = verify_mod.run_all(cfg)
    out = Path(cfg.out_dir)
    with open(out/f"{cfg.prefix}_verify.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    for check in report["checks"]:
        status = "pass" if check["pass"] else "FAIL"
        print(f"[{status}] {check['name']}: measured {check['measured']:.3e} "
              f"(threshold {check['threshold']:.3e})")
    if not report["all_pass"]:
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
