"""Command-line entry point.

Subcommands:
  corrector-check   shell corrector against its diffusive limit
  simulate          one trajectory (stochastic or deterministic)
  scaling-limit     ensemble exceedance probabilities over shell indices
  decay-check       deterministic decay envelope verification
  existence-freq    survival frequency of the uncut noisy system
  energy-check      discrete energy budget closure and refinement rate

Common flags: --config PATH (TOML, defaults apply when omitted), --seed N,
--out DIR, --paths N, --quiet.  Exit status: 0 success, 1 experiment
acceptance failure, 2 usage or configuration error.  All outputs land under
--out; a manifest.json makes every run reproducible.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
import time
from pathlib import Path

from .config import config_as_dict, parse_config_full
from .errors import ConfigError
from .experiments import (calibrate_C1, estimate_r0, run_corrector_study,
                          run_decay_check, run_energy_identity_check,
                          run_global_existence_frequency, run_scaling_limit)
from .fields import initial_state
from .integrator import RunConfig, lattice_for, simulate
from .results_io import Manifest, theta_support_list, write_results

# documented fallback for the decay-threshold constant when no calibration
# is requested; calibrate_c1 = true in the experiment section replaces it
DEFAULT_C1 = 2.0
DEFAULT_NU_FLOOR = 1.0

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vortexnoise",
                                description="pseudo-spectral vorticity runs with transport noise")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("corrector-check", "corrector against its diffusive limit"),
        ("simulate", "integrate one trajectory"),
        ("scaling-limit", "ensemble exceedance probabilities over N"),
        ("decay-check", "deterministic decay envelope"),
        ("existence-freq", "uncut-system survival frequency"),
        ("energy-check", "energy budget closure"),
    ]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", type=Path, default=None, help="TOML config file")
        s.add_argument("--seed", type=int, default=None, help="override the run seed")
        s.add_argument("--out", type=Path, default=None, help="output directory")
        s.add_argument("--paths", type=int, default=None, help="ensemble path count")
        s.add_argument("--quiet", action="store_true", help="suppress the summary line")
    return p


def _load(args) -> tuple[RunConfig, dict]:
    if args.config is not None:
        cfg, sections = parse_config_full(args.config)
    else:
        cfg, sections = RunConfig(), {}
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg, sections


def _manifest(experiment: str, cfg: RunConfig, params: dict, t0: float,
              steps: int = 0, calibrated: dict | None = None,
              theta=None, seeds: dict | None = None) -> Manifest:
    return Manifest(
        experiment=experiment,
        config=config_as_dict(cfg),
        params=params,
        seed_schedule=seeds or {"master": cfg.seed, "path_ids": "0..paths-1"},
        calibrated=calibrated or {},
        theta_support=theta_support_list(theta) if theta is not None else [],
        wall_clock_s=round(time.perf_counter() - t0, 3),
        step_count=steps,
    )


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _cmd_corrector(args, cfg, sections) -> int:
    t0 = time.perf_counter()
    sec = sections.get("corrector", {})
    n_list = [int(n) for n in sec.get("N_list", [2, 4, 8])]
    nu = float(sec.get("nu", cfg.nu))
    kappa = float(sec.get("kappa", cfg.kappa))
    res = run_corrector_study(nu, kappa, n_list)

    errs = [r.rel_l2_error for r in res.rows]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    ray_ok = True
    for r in res.rows:
        if r.N >= 8:
            ray_ok = ray_ok and abs(r.rayleigh_s - 0.6 * nu) <= 0.15 * 0.6 * nu
    passed = decreasing and ray_ok and len(res.rows) == len(n_list)

    out = args.out or Path("results-corrector-check")
    man = _manifest("corrector-check", cfg,
                    {"nu": nu, "kappa": kappa, "N_list": n_list,
                     "field": res.field_note, "max_feasible_N": res.max_feasible_N},
                    t0, calibrated={"limit_coefficient": 0.6 * nu,
                                    "perp_coefficient": 0.4 * nu,
                                    "rayleigh_tolerance": 0.15})
    write_results(out, {"corrector_study": (res.CSV_HEADER, res.csv_rows())}, [], man)
    _say(args, f"corrector-check: errors {['%.4f' % e for e in errs]} "
               f"decreasing={decreasing} rayleigh_ok={ray_ok} -> {out}")
    return EXIT_OK if passed else EXIT_FAIL


def _cmd_simulate(args, cfg, sections) -> int:
    t0 = time.perf_counter()
    sec = sections.get("simulate", {})
    mode = str(sec.get("mode", "stochastic"))
    kind = str(sec.get("init", "mixed"))
    K = float(sec.get("K", 1.0))
    phi0 = initial_state(lattice_for(cfg), kind, K=K, seed=cfg.seed)
    traj = simulate(cfg, phi0, mode=mode)

    rows = [rec.csv_row() for rec in traj.diagnostics]
    snaps = []
    for i, (t, st) in enumerate(traj.snapshots):
        snaps.append((f"snapshot_{i:04d}_xi", st.xi))
        snaps.append((f"snapshot_{i:04d}_eta", st.eta))

    from .integrator import DiagnosticsRecord, _get_stepper
    stepper = _get_stepper(cfg, mode) if mode == "stochastic" else None
    theta = stepper.theta if stepper is not None else None
    man = _manifest("simulate", cfg,
                    {"mode": mode, "init": kind, "K": K,
                     "status": traj.status, "t_star": traj.t_star},
                    t0, steps=len(traj.times) - 1, theta=theta)
    out = args.out or Path("results-simulate")
    write_results(out, {"trajectory": (DiagnosticsRecord.CSV_FIELDS, rows)}, snaps, man)
    _say(args, f"simulate: {traj.status}"
               + (f" at t*={traj.t_star:.4g}" if traj.t_star else "")
               + f", {len(traj.times) - 1} steps -> {out}")
    return EXIT_OK   # blow-up is data, not an error


def _scaling_recipe(K: float, sec: dict, cfg: RunConfig) -> tuple[float, float, dict]:
    """nu and R from the decay-threshold recipe, with provenance."""
    cal: dict = {}
    if "nu" in sec:
        nu = float(sec["nu"])
        cal["nu_source"] = "explicit"
    else:
        if sec.get("calibrate_c1", False):
            cal_cfg = dataclasses.replace(cfg, M=min(cfg.M, 6), dt=max(cfg.dt, 2e-3),
                                          T_end=min(cfg.T_end, 0.6))
            c1 = calibrate_C1(K, cal_cfg)["C1"]
            cal["c1_source"] = "bisection"
        else:
            c1 = float(sec.get("c1", DEFAULT_C1))
            cal["c1_source"] = "config-default"
        nu1 = max(c1 * K / math.sqrt(math.pi), float(sec.get("nu1_floor", 1.0 + 0.6 * DEFAULT_NU_FLOOR)))
        nu = (nu1 - 1.0) / 0.6
        cal.update({"C1": c1, "nu1": nu1, "nu_source": "recipe"})
    R = float(sec.get("R", 2.0 ** 0.25 * K + 1.0))
    cal["R"] = R
    return nu, R, cal


def _cmd_scaling(args, cfg, sections) -> int:
    t0 = time.perf_counter()
    sec = sections.get("scaling", {})
    paths = args.paths if args.paths is not None else int(sec.get("paths", 100))
    if paths < 1:
        print("scaling-limit: --paths must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    K = float(sec.get("K", 1.0))
    n_list = [int(n) for n in sec.get("N_list", [2, 4, 8])]
    eps = sec.get("eps")
    eps = float(eps) if eps not in (None, 0, 0.0) else None
    nu, R, cal = _scaling_recipe(K, sec, cfg)
    if "T" in sec:
        cfg = dataclasses.replace(cfg, T_end=float(sec["T"]))
    if "dt" in sec:
        cfg = dataclasses.replace(cfg, dt=float(sec["dt"]))

    res = run_scaling_limit(K, nu, R, n_list, paths, eps, cfg,
                            init_kind=str(sec.get("init", "mixed")))
    passed = res.monotone_within_bands()

    cal.update({"eps": res.eps, "eps_was_tuned": res.eps_was_tuned})
    n_steps = int(round(cfg.T_end / cfg.dt))
    from .integrator import _get_stepper
    theta = _get_stepper(dataclasses.replace(cfg, N_shell=max(n_list), nu=nu, R=R),
                         "stochastic").theta
    man = _manifest("scaling-limit", cfg,
                    {"K": K, "N_list": n_list, "paths": paths, "nu": nu, "R": R},
                    t0, steps=(len(n_list) * paths + 1) * n_steps,
                    calibrated=cal, theta=theta)
    out = args.out or Path("results-scaling-limit")
    dist_rows = [[N, pid, d] for N in sorted(res.distances)
                 for pid, d in enumerate(res.distances[N])]
    write_results(out, {
        "scaling_limit": (res.CSV_HEADER, res.csv_rows()),
        "distances": (("N", "path", "distance"), dist_rows),
    }, [], man)
    _say(args, "scaling-limit: " + "  ".join(
        f"N={r.N}: p={r.p_hat:.3f}+-{r.half_width:.3f}" for r in res.rows)
        + f"  eps={res.eps:.4g} monotone={passed} -> {out}")
    return EXIT_OK if passed else EXIT_FAIL


def _cmd_decay(args, cfg, sections) -> int:
    t0 = time.perf_counter()
    sec = sections.get("decay", {})
    K = float(sec.get("K", 1.0))
    cal = {}
    if "nu1" in sec:
        nu1 = float(sec["nu1"])
        cal["nu1_source"] = "explicit"
    elif sec.get("calibrate_c1", False):
        cal_cfg = dataclasses.replace(cfg, M=min(cfg.M, 6), dt=max(cfg.dt, 2e-3),
                                      T_end=min(cfg.T_end, 0.6))
        c = calibrate_C1(K, cal_cfg)
        nu1 = max(c["C1"] * K / math.sqrt(math.pi), 1.0)
        cal.update({"C1": c["C1"], "nu1_source": "bisection",
                    "saturated": c["lower_bound_saturated"]})
    else:
        nu1 = max(DEFAULT_C1 * K / math.sqrt(math.pi), cfg.nu1)
        cal["nu1_source"] = "config-default"
    cal["nu1"] = nu1

    rep = run_decay_check(K, cfg, nu1=nu1, init_kind=str(sec.get("init", "stretching")))
    man = _manifest("decay-check", cfg,
                    {"K": K, "lambda": rep.lam, "passed": rep.passed,
                     "first_violation_t": rep.first_violation_t},
                    t0, steps=len(rep.times) - 1, calibrated=cal)
    out = args.out or Path("results-decay-check")
    write_results(out, {"decay_check": (rep.CSV_HEADER, rep.csv_rows())}, [], man)
    _say(args, f"decay-check: K={K} nu1={nu1:.3g} lambda={rep.lam:.3g} "
               f"{'PASS' if rep.passed else 'FAIL'} -> {out}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _cmd_existence(args, cfg, sections) -> int:
    t0 = time.perf_counter()
    sec = sections.get("existence", {})
    paths = args.paths if args.paths is not None else int(sec.get("paths", 50))
    if paths < 1:
        print("existence-freq: --paths must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    K = float(sec.get("K", 1.0))
    nu = float(sec.get("nu", cfg.nu))
    N_shell = int(sec.get("N_shell", cfg.N_shell))
    T_long = float(sec.get("T_long", max(2.0, cfg.T_end)))
    r0 = sec.get("r0")
    cal = {}
    if r0 is None:
        r0 = estimate_r0(dataclasses.replace(cfg, T_end=min(1.0, T_long)))
        cal["r0_source"] = "bisection"
    else:
        r0 = float(r0)
        cal["r0_source"] = "explicit"
    cal["r0"] = r0

    rep = run_global_existence_frequency(K, nu, N_shell, paths, T_long, cfg, r0=r0,
                                         init_kind=str(sec.get("init", "mixed")))
    man = _manifest("existence-freq", cfg,
                    {"K": K, "nu": nu, "N_shell": N_shell, "paths": paths,
                     "T_long": T_long,
                     "fraction_global": rep.fraction_global,
                     "fraction_ball": rep.fraction_ball},
                    t0, steps=paths * int(round(T_long / cfg.dt)), calibrated=cal)
    out = args.out or Path("results-existence-freq")
    write_results(out, {"existence_freq": (rep.CSV_HEADER, rep.csv_rows())}, [], man)
    _say(args, f"existence-freq: global={rep.fraction_global:.2f} "
               f"ball={rep.fraction_ball:.2f} r0={r0:.4g} -> {out}")
    return EXIT_OK


def _cmd_energy(args, cfg, sections) -> int:
    t0 = time.perf_counter()
    sec = sections.get("energy", {})
    K = float(sec.get("K", 1.0))
    kind = str(sec.get("init", "mixed"))
    npaths = int(sec.get("neutrality_paths", 0))
    phi0 = initial_state(lattice_for(cfg), kind, K=K, seed=cfg.seed)
    rep = run_energy_identity_check(cfg, phi0, neutrality_paths=npaths)

    ratio_ok = 1.4 <= rep.ratio <= 2.6
    neutral_ok = npaths == 0 or rep.noise_energy_mean <= 2.0 * rep.noise_energy_se
    passed = ratio_ok and neutral_ok
    man = _manifest("energy-check", cfg,
                    {"K": K, "init": kind,
                     "residual_coarse": rep.residual_coarse,
                     "residual_fine": rep.residual_fine, "ratio": rep.ratio,
                     "noise_energy_mean": rep.noise_energy_mean,
                     "noise_energy_se": rep.noise_energy_se},
                    t0, steps=3 * int(round(cfg.T_end / cfg.dt)))
    out = args.out or Path("results-energy-check")
    write_results(out, {"energy_check": (rep.CSV_HEADER, rep.csv_rows())}, [], man)
    _say(args, f"energy-check: ratio={rep.ratio:.2f} (target 2 +- 30%) "
               f"{'PASS' if passed else 'FAIL'} -> {out}")
    return EXIT_OK if passed else EXIT_FAIL


_COMMANDS = {
    "corrector-check": _cmd_corrector,
    "simulate": _cmd_simulate,
    "scaling-limit": _cmd_scaling,
    "decay-check": _cmd_decay,
    "existence-freq": _cmd_existence,
    "energy-check": _cmd_energy,
}


def cli_dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as ex:
        return EXIT_USAGE if ex.code not in (0, None) else 0
    try:
        cfg, sections = _load(args)
    except ConfigError as ex:
        print(f"configuration error: {ex}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args, cfg, sections)
    except ConfigError as ex:
        print(f"configuration error: {ex}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_FAIL


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
