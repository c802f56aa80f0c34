"""Command-line front end: rates, evolve, oracle-compare, markov, verify, sweep.

Exit codes: 0 success, 2 config error, 3 gate violation, 4 verification
failure.  CSV outputs are byte-deterministic for a fixed config and
build; the JSON summaries carry one volatile field (runtime_seconds).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from .config import ConfigError, ScenarioConfig, load_config
from .kernels import (cancellation_residual, kernel_coefficients,
                      ki_asymptotic_coefficients, lsi_coefficients, markov_limits)
from .oracle import exact_reduced_dynamics, gibbs_expansion_check, projector_algebra_check, trace_distance
from .propagator import StabilityError, lindblad_propagate, propagate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GATE = 3
EXIT_VERIFY = 4

RATES_SCHEMA = "oscbath-rates-1"
TRAJECTORY_SCHEMA = "oscbath-trajectory-1"
COMPARE_SCHEMA = "oscbath-compare-1"


def _fmt(x) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, schema: str, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# schema: {schema}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_json(path: Path, payload: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _say(quiet: bool, message: str):
    if not quiet:
        print(message)


def _record_times(cfg: ScenarioConfig):
    n = cfg.n_steps()
    stride = cfg.stride()
    ks = [k for k in range(n + 1) if k % stride == 0 or k == n]
    return stride, np.array([k * cfg.dt for k in ks])


def cmd_rates(cfg: ScenarioConfig, out_dir: Path, quiet: bool) -> int:
    bath = cfg.bath_spec()
    _, times = _record_times(cfg)
    rows = []
    for t in times:
        c = kernel_coefficients(bath, cfg.omega0, float(t))
        resid = cancellation_residual(bath, cfg.omega0, float(t))
        rows.append((t, c.gamma0.real, c.gamma0.imag, c.gamma0_prime.real,
                     c.gamma0_prime.imag, c.ki_plus.real, c.ki_plus.imag,
                     c.ki_minus.real, c.ki_minus.imag, c.lsi_plus, c.lsi_minus, resid))
    path = out_dir / f"{cfg.output_prefix}_rates.csv"
    _write_csv(path, RATES_SCHEMA,
               ("t", "gamma0_re", "gamma0_im", "gamma0_prime_re", "gamma0_prime_im",
                "ki_plus_re", "ki_plus_im", "ki_minus_re", "ki_minus_im",
                "lsi_plus", "lsi_minus", "cancellation_residual"), rows)
    _say(quiet, f"wrote {path}")
    return EXIT_OK


def _markov_for(cfg: ScenarioConfig):
    pv = cfg.pv_window if cfg.pv_window > 0 else None
    if cfg.ohmic is not None:
        return markov_limits(cfg.ohmic, cfg.omega0, pv, beta=cfg.beta)
    width = cfg.density_width if cfg.density_width > 0 else None
    return markov_limits(cfg.bath_spec(), cfg.omega0, pv, density_width=width)


def _run_trajectory(cfg: ScenarioConfig, mode: str):
    initial = cfg.initial_density()
    stride = cfg.stride()
    tol = cfg.tolerances
    if mode == "lindblad":
        limits = _markov_for(cfg)
        return lindblad_propagate(initial, limits, cfg.omega0, cfg.drive,
                                  cfg.t_max, cfg.dt, record_every=stride,
                                  tail_threshold=tol.tail_threshold,
                                  stability_limit=tol.stability_limit)
    return propagate(initial, cfg.bath_spec(), cfg.omega0, cfg.drive,
                     cfg.t_max, cfg.dt, mode=mode, record_every=stride,
                     tail_threshold=tol.tail_threshold,
                     stability_limit=tol.stability_limit)


def _trajectory_rows(traj):
    return [(t, occ, amp.real, amp.imag, tre, hd, me)
            for t, occ, amp, tre, hd, me in zip(
                traj.times, traj.occupation, traj.amplitude, traj.trace_error,
                traj.herm_defect, traj.min_eigenvalue)]


def cmd_evolve(cfg: ScenarioConfig, out_dir: Path, quiet: bool) -> int:
    start = time.perf_counter()
    try:
        traj = _run_trajectory(cfg, cfg.mode)
    except StabilityError as exc:
        payload = {"status": "gate_violation", "reason": "stability",
                   "detail": str(exc), "suggested_dt": exc.suggested_dt}
        _write_json(out_dir / f"{cfg.output_prefix}_summary.json", payload)
        _say(quiet, f"stability gate: {exc}")
        return EXIT_GATE

    csv_path = out_dir / f"{cfg.output_prefix}_trajectory.csv"
    _write_csv(csv_path, TRAJECTORY_SCHEMA,
               ("t", "occupation", "amp_re", "amp_im", "trace_error",
                "herm_defect", "min_eigenvalue"), _trajectory_rows(traj))
    summary = {
        "status": "gate_violation" if traj.tail_gate_exceeded else "ok",
        "mode": cfg.mode,
        "final_time": float(traj.times[-1]),
        "final_occupation": float(traj.occupation[-1]),
        "final_amplitude": [float(traj.amplitude[-1].real), float(traj.amplitude[-1].imag)],
        "final_min_eigenvalue": float(traj.min_eigenvalue[-1]),
        "max_trace_error": traj.max_trace_error,
        "max_herm_defect": traj.max_herm_defect,
        "max_tail_population": traj.max_tail_population,
        "tail_gate_exceeded": traj.tail_gate_exceeded,
        "nonstandard_initial_state": cfg.initial_state.kind != "gibbs",
        "runtime_seconds": time.perf_counter() - start,
    }
    if traj.tail_gate_exceeded:
        summary["reason"] = "tail_population"
    _write_json(out_dir / f"{cfg.output_prefix}_summary.json", summary)
    _say(quiet, f"wrote {csv_path}")
    return EXIT_GATE if traj.tail_gate_exceeded else EXIT_OK


def cmd_markov(cfg: ScenarioConfig, out_dir: Path, quiet: bool) -> int:
    limits = _markov_for(cfg)
    payload = {
        "delta_omega0": limits.delta_omega0,
        "rate_down": limits.rate_down,
        "rate_up": limits.rate_up,
        "ki_asymptotic_plus": limits.ki_asymptotic_plus,
        "ki_asymptotic_minus": limits.ki_asymptotic_minus,
    }
    path = out_dir / f"{cfg.output_prefix}_markov.json"
    _write_json(path, payload)
    _say(quiet, f"wrote {path}")
    return EXIT_OK


def _oracle_comparison(cfg: ScenarioConfig, mode: str):
    model = cfg.full_model()
    t_max = cfg.oracle.t_max or cfg.t_max
    dt = cfg.oracle.dt or cfg.dt
    n = int(round(t_max / dt))
    stride = cfg.record_every if cfg.record_every > 0 else max(1, n // 60)
    tol = cfg.tolerances
    initial = cfg.initial_density()
    if mode == "lindblad":
        traj = lindblad_propagate(initial, _markov_for(cfg), cfg.omega0, cfg.drive,
                                  t_max, dt, record_every=stride,
                                  tail_threshold=tol.tail_threshold,
                                  stability_limit=tol.stability_limit)
    else:
        traj = propagate(initial, cfg.bath_spec(), cfg.omega0, cfg.drive, t_max, dt,
                         mode=mode, record_every=stride,
                         tail_threshold=tol.tail_threshold,
                         stability_limit=tol.stability_limit)
    exact = exact_reduced_dynamics(model, cfg.drive, t_max, dt, record_every=stride,
                                   tail_threshold=tol.tail_threshold)
    if len(traj.times) != len(exact.times) or np.abs(traj.times - exact.times).max() > 1e-12:
        raise RuntimeError("trajectory grids failed to line up")
    distances = np.array([trace_distance(s, e) for s, e in zip(traj.states, exact.states)])
    return traj.times, distances, model


def cmd_oracle_compare(cfg: ScenarioConfig, out_dir: Path, quiet: bool) -> int:
    start = time.perf_counter()
    times, distances, model = _oracle_comparison(cfg, cfg.mode)
    csv_path = out_dir / f"{cfg.output_prefix}_compare.csv"
    _write_csv(csv_path, COMPARE_SCHEMA, ("t", "trace_distance"),
               list(zip(times, distances)))
    max_td = float(distances.max())
    tol = cfg.tolerances.oracle_trace_distance
    payload = {
        "mode": cfg.mode,
        "total_dimension": model.total_dim,
        "max_trace_distance": max_td,
        "final_trace_distance": float(distances[-1]),
        "tolerance": tol,
        "passed": bool(max_td <= tol),
        "runtime_seconds": time.perf_counter() - start,
    }
    _write_json(out_dir / f"{cfg.output_prefix}_compare.json", payload)
    _say(quiet, f"max trace distance {max_td:.3e} (tolerance {tol:.3e})")
    return EXIT_OK if max_td <= tol else EXIT_VERIFY


def _cancellation_check(cfg: ScenarioConfig, seed: int, corrupt: bool, n_draws: int = 100):
    """Closed-form identity: the asymptotic kernel coefficients negate the
    static shift, mode by mode, for random single-mode baths."""
    from .bath import BathSpec

    rng = np.random.default_rng(seed)
    worst = 0.0
    sign = -1.0 if corrupt else 1.0
    for _ in range(n_draws):
        omega0 = rng.uniform(0.5, 2.0)
        omega_k = rng.uniform(0.2, 3.0)
        beta = rng.uniform(0.3, 4.0)
        v = rng.uniform(0.01, 0.5)
        bath = BathSpec(((omega_k, v),), beta)
        lp, lm = lsi_coefficients(bath, omega0)
        kp, km = ki_asymptotic_coefficients(bath, omega0)
        rp = abs(lp + sign * kp) / max(1.0, abs(lp))
        rm = abs(lm + sign * km) / max(1.0, abs(lm))
        worst = max(worst, rp, rm)
    return worst


def cmd_verify(cfg: ScenarioConfig, out_dir: Path, quiet: bool, seed: int,
               corrupt_cancellation: bool = False) -> int:
    start = time.perf_counter()
    tol = cfg.tolerances
    model = cfg.full_model()
    checks = []

    proj = projector_algebra_check(model, n_probes=20, seed=seed)
    checks.append({
        "name": "projector_identities",
        "residuals": {
            "initial_state": proj.initial_state_residual,
            "idempotency": proj.idempotency_residual,
            "q_trace": proj.q_trace_residual,
            "trace_consistency": proj.trace_consistency_residual,
            "factorized_reduction": proj.factorized_reduction_residual,
        },
        "tolerance": tol.projector_tol,
        "passed": bool(proj.max_residual() < tol.projector_tol
                       and proj.factorized_reduction_residual < 1e-12),
    })

    gibbs = gibbs_expansion_check(model)
    checks.append({
        "name": "thermal_expansion_scaling",
        "residuals": {
            "defect_full": gibbs.defect_full,
            "defect_half": gibbs.defect_half,
            "remainder_ratio": gibbs.remainder_ratio,
            "traceless": gibbs.traceless_residual,
        },
        "tolerance": {"ratio_low": tol.remainder_ratio_low,
                      "ratio_high": tol.remainder_ratio_high,
                      "traceless": tol.traceless_tol},
        "passed": bool(tol.remainder_ratio_low <= gibbs.remainder_ratio
                       <= tol.remainder_ratio_high
                       and gibbs.traceless_residual < tol.traceless_tol),
    })

    cancel = _cancellation_check(cfg, seed, corrupt_cancellation)
    checks.append({
        "name": "cancellation_identity",
        "residuals": {"max_relative": cancel},
        "tolerance": tol.cancellation_tol,
        "passed": bool(cancel <= tol.cancellation_tol),
    })

    _, distances, _ = _oracle_comparison(cfg, "full")
    max_td = float(distances.max())
    checks.append({
        "name": "oracle_agreement",
        "residuals": {"max_trace_distance": max_td},
        "tolerance": tol.oracle_trace_distance,
        "passed": bool(max_td <= tol.oracle_trace_distance),
    })

    all_passed = all(c["passed"] for c in checks)
    payload = {
        "passed": all_passed,
        "checks": checks,
        "seed": seed,
        "runtime_seconds": time.perf_counter() - start,
    }
    _write_json(out_dir / f"{cfg.output_prefix}_verify.json", payload)
    for c in checks:
        _say(quiet, f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['residuals']}")
    return EXIT_OK if all_passed else EXIT_VERIFY


def _sweep_worker(item):
    scenario_path, out_dir = item
    code = main(["evolve", "--config", scenario_path, "--out", out_dir, "--quiet"])
    return scenario_path, code


def cmd_sweep(sweep_path: Path, out_dir: Path, quiet: bool) -> int:
    try:
        with open(sweep_path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read sweep file {sweep_path}: {exc}") from None
    if not isinstance(raw, dict) or "scenarios" not in raw:
        raise ConfigError("sweep file needs a 'scenarios' list")
    unknown = set(raw) - {"scenarios", "workers"}
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in sweep file")
    scenarios = raw["scenarios"]
    if not isinstance(scenarios, list) or not scenarios:
        raise ConfigError("'scenarios' must be a non-empty list of paths")
    workers = int(raw.get("workers", 2))
    base = sweep_path.parent

    items = []
    for s in scenarios:
        path = Path(s)
        if not path.is_absolute():
            path = base / path
        sub = out_dir / path.stem
        sub.mkdir(parents=True, exist_ok=True)
        items.append((str(path), str(sub)))

    results = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for scenario, code in pool.map(_sweep_worker, items):
            results.append({"scenario": scenario, "exit_code": code})
            _say(quiet, f"{scenario}: exit {code}")
    _write_json(out_dir / "sweep_index.json", {"results": results})
    return max((r["exit_code"] for r in results), default=EXIT_OK)


def _build_parser():
    parser = argparse.ArgumentParser(prog="oscbath",
                                     description="Damped driven oscillator in a boson "
                                                 "bath: kernel tables, propagation, and "
                                                 "verification against an exact oracle.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
            ("rates", "tabulate generator coefficients over the time grid"),
            ("evolve", "integrate the master equation and write the trajectory"),
            ("oracle-compare", "compare the master equation with exact full-space dynamics"),
            ("markov", "compute the long-time limits (shift, rates, kernel asymptotes)"),
            ("verify", "run the structural verification suite"),
            ("sweep", "run several evolve scenarios in parallel workers")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        if name in ("evolve", "oracle-compare"):
            p.add_argument("--mode", default=None,
                           help="override the scenario mode "
                                "(full | lindblad | nz-only | no-correlations)")
        if name == "verify":
            p.add_argument("--seed", type=int, default=None,
                           help="seed for random probe operators")
            p.add_argument("--corrupt-cancellation", action="store_true",
                           help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "sweep":
            return cmd_sweep(Path(args.config), out_dir, args.quiet)
        cfg = load_config(args.config)
        if getattr(args, "mode", None):
            if args.mode not in ("full", "lindblad", "nz-only", "no-correlations"):
                raise ConfigError(f"unknown mode override {args.mode!r}")
            object.__setattr__(cfg, "mode", args.mode)
        if args.command == "rates":
            return cmd_rates(cfg, out_dir, args.quiet)
        if args.command == "evolve":
            return cmd_evolve(cfg, out_dir, args.quiet)
        if args.command == "markov":
            return cmd_markov(cfg, out_dir, args.quiet)
        if args.command == "oracle-compare":
            return cmd_oracle_compare(cfg, out_dir, args.quiet)
        if args.command == "verify":
            seed = args.seed if args.seed is not None else cfg.seed
            return cmd_verify(cfg, out_dir, args.quiet, seed,
                              corrupt_cancellation=args.corrupt_cancellation)
        raise RuntimeError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
