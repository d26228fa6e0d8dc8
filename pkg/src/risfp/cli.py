"""Command-line entry point.

Subcommands
-----------
run-scenario   execute a Monte-Carlo sweep from [scenario], emit CSV + manifest
run-once       one channel draw, one optimizer run; writes trace.csv + solution.json
estimate       LS channel-estimation trials; per-user squared errors as CSV
oracle         brute-force phase grid search vs. the optimizer on a desk-scale setup
bench          per-iteration timing over an N sweep, optionally comparing backends

Common flags: --config PATH, --out DIR, --seed U64, --trials INT, --quiet.
RIS_FP_THREADS caps Monte-Carlo worker parallelism; RISFP_BACKEND forces
the compiled or pure-python kernel backend.

Config file schema (INI; values in watts unless suffixed dB/dBW/dBm):

[system]    num_bs_antennas, num_ris_elements, num_users, transmit_power,
            noise_power, rician_factor_G, rician_factor_h,
            pathloss_intercept_db, pathloss_slope_db, bs_position,
            ris_position, user_positions, user_disk_center,
            user_disk_radius, element_spacing_ratio, rng_seed
[optimizer] tol, max_iters, init, inner_sweeps, backend
[estimation] pilot_length, pilot_power, uplink_noise_power, pilot_symbols
[scenario]  name, sweep, values, trials, algorithms, metric, slot_length,
            random_phase_draws
[oracle]    levels, precoder
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, baselines, core, ops
from .channel import draw_channels
from .configio import ConfigError, load_config
from .estimation import dft_pilot_plan, estimate_cascaded, expected_ls_error
from .experiments import run_scenario
from .optimizer import run_algorithm1, run_algorithm2

log = logging.getLogger("risfp")

LOG2 = float(np.log(2.0))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.system = replace(cfg.system, rng_seed=args.seed)
        if cfg.scenario is not None:
            cfg.scenario = replace(
                cfg.scenario, config=replace(cfg.scenario.config, rng_seed=args.seed),
                seed=args.seed,
            )
    if args.trials is not None and cfg.scenario is not None:
        cfg.scenario = replace(cfg.scenario, trials=args.trials)
    return cfg


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_run_once(args) -> int:
    cfg = _load(args)
    sysc = cfg.system
    opt = cfg.optimizer
    out = _out_dir(args)

    estimated = args.estimated
    if estimated and not cfg.has_estimation_section:
        log.error("--estimated requested but the config has no [estimation] section")
        return 2
    if estimated:
        pilot_length = cfg.estimation.pilot_length or sysc.num_ris_elements
        if pilot_length < sysc.num_ris_elements:
            log.error(
                "infeasible config: pilot_length %d < num_ris_elements %d",
                pilot_length, sysc.num_ris_elements,
            )
            return 2

    rng = np.random.default_rng(sysc.rng_seed)
    channels = draw_channels(sysc, rng)
    H = channels.stacked_cascaded()

    if estimated:
        sigma_n = cfg.estimation.uplink_noise_power
        plan = dft_pilot_plan(
            sysc.num_ris_elements,
            pilot_length,
            pilot_power=cfg.estimation.pilot_power,
            uplink_noise_power=sysc.noise_power if sigma_n is None else sigma_n,
            symbols=cfg.estimation.pilot_symbols,
            rng=rng,
        )
        est = estimate_cascaded(channels, plan, rng)
        state, trace, realized = run_algorithm2(
            est.stacked(), H, sysc,
            init=opt.init, tol=opt.tol, max_iters=opt.max_iters,
            n_sweeps=opt.inner_sweeps, backend=opt.backend, rng=rng,
        )
        sinr = realized.sinr
    else:
        state, trace = run_algorithm1(
            H, sysc,
            init=opt.init, tol=opt.tol, max_iters=opt.max_iters,
            n_sweeps=opt.inner_sweeps, backend=opt.backend, rng=rng,
        )
        sinr = ops.sinr_per_user(state.W, ops.effective_channels(H, state.phi), sysc.noise_power)

    trace.write_csv(out / "trace.csv")
    rates = np.log1p(sinr)
    solution = {
        "W_real": state.W.real.tolist(),
        "W_imag": state.W.imag.tolist(),
        "phi_phase_rad": np.angle(state.phi).tolist(),
        "per_user_sinr": sinr.tolist(),
        "per_user_rate_nats": rates.tolist(),
        "per_user_rate_bits": (rates / LOG2).tolist(),
        "sum_rate_nats": float(rates.sum()),
        "sum_rate_bits": float(rates.sum() / LOG2),
        "dual_lambda": state.lam,
        "iterations": state.iteration,
        "terminated_by": trace.terminated_by,
        "estimated_csi": bool(estimated),
    }
    _write_json(out / "solution.json", solution)
    log.info(
        "run-once: %d iterations (%s), sum rate %.6f nats",
        state.iteration, trace.terminated_by, float(rates.sum()),
    )
    return 0


def cmd_run_scenario(args) -> int:
    cfg = _load(args)
    if cfg.scenario is None:
        log.error("config has no [scenario] section")
        return 2
    out = _out_dir(args)
    table = run_scenario(cfg.scenario, workers=args.workers)
    csv_path = out / f"{cfg.scenario.name}.csv"
    table.write_csv(csv_path)
    table.write_manifest(out / f"{cfg.scenario.name}.manifest.json")
    log.info("wrote %s (%d rows)", csv_path, len(table.rows))
    if table.interrupted:
        log.error("interrupted; partial results flushed to %s", csv_path)
        return 130
    if table.failures:
        _write_json(out / f"{cfg.scenario.name}.failures.json", {"failures": table.failures})
        log.error("%d trial failures recorded", len(table.failures))
        return 1
    return 0


def cmd_estimate(args) -> int:
    cfg = _load(args)
    sysc = cfg.system
    est = cfg.estimation
    out = _out_dir(args)
    pilot_length = est.pilot_length or sysc.num_ris_elements
    if pilot_length < sysc.num_ris_elements:
        log.error(
            "infeasible config: pilot_length %d < num_ris_elements %d",
            pilot_length, sysc.num_ris_elements,
        )
        return 2
    sigma_n = sysc.noise_power if est.uplink_noise_power is None else est.uplink_noise_power
    plan = dft_pilot_plan(
        sysc.num_ris_elements, pilot_length,
        pilot_power=est.pilot_power, uplink_noise_power=sigma_n,
    )
    trials = args.trials or 100
    rng = np.random.default_rng(sysc.rng_seed)
    rows = []
    for trial in range(trials):
        channels = draw_channels(sysc, rng)
        result = estimate_cascaded(channels, plan, rng)
        for k, err in enumerate(result.per_user_sq_error):
            rows.append((trial, k, float(err)))
    path = out / "estimation.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["trial", "user", "sq_error", "pilot_length", "pilot_power", "uplink_noise_power"]
        )
        for trial, k, err in rows:
            writer.writerow([trial, k, repr(err), plan.length, repr(plan.pilot_power),
                             repr(plan.uplink_noise_power)])
    analytic = expected_ls_error(plan, sysc.num_bs_antennas)
    empirical = float(np.mean([r[2] for r in rows]))
    _write_json(out / "estimation_summary.json", {
        "analytic_mean_sq_error": analytic,
        "empirical_mean_sq_error": empirical,
        "trials": trials,
        "pilot_length": plan.length,
    })
    log.info("estimate: empirical %.6e vs analytic %.6e", empirical, analytic)
    return 0


def cmd_oracle(args) -> int:
    cfg = _load(args)
    sysc = cfg.system
    out = _out_dir(args)
    rng = np.random.default_rng(sysc.rng_seed)
    channels = draw_channels(sysc, rng)
    H = channels.stacked_cascaded()
    phi_star, oracle_rate = baselines.grid_search_phases(
        H, cfg.oracle_precoder, cfg.oracle_levels, sysc.noise_power, sysc.transmit_power
    )
    state, trace = run_algorithm1(
        H, sysc, tol=cfg.optimizer.tol, max_iters=cfg.optimizer.max_iters,
        backend=cfg.optimizer.backend,
    )
    fp_rate = float(trace.objective_f1[-1])
    _write_json(out / "oracle.json", {
        "grid_levels": cfg.oracle_levels,
        "oracle_precoder": cfg.oracle_precoder,
        "oracle_rate_nats": oracle_rate,
        "oracle_phi_phase_rad": np.angle(phi_star).tolist(),
        "fp_rate_nats": fp_rate,
        "fp_minus_oracle": fp_rate - oracle_rate,
    })
    log.info("oracle: grid %.6f vs fp %.6f nats", oracle_rate, fp_rate)
    return 0


def cmd_bench(args) -> int:
    cfg = _load(args)
    sysc = cfg.system
    out = _out_dir(args)
    sizes = [int(v) for v in (args.sizes or "64,128,256,512").replace(",", " ").split()]
    if not sizes:
        log.error("empty N sweep")
        return 2
    iters = max(args.iterations, 20)
    warmup = 5
    backends = (
        list(core.available_backends()) if args.backend == "both" else [args.backend]
    )
    rows = []
    for backend in backends:
        if backend not in core.available_backends() and backend != "auto":
            log.error("backend %s unavailable", backend)
            return 2
        for n in sizes:
            c = replace(sysc, num_ris_elements=n)
            rng = np.random.default_rng(c.rng_seed)
            H = draw_channels(c, rng).stacked_cascaded()
            # fixed iteration count: tol=-1 disables the threshold stop
            _, trace = run_algorithm1(
                H, c, tol=-1.0, max_iters=iters + warmup, backend=backend
            )
            per_iter = float(np.mean(trace.wall_time[warmup:]))
            rows.append((backend, n, per_iter, len(trace)))
            log.info("bench backend=%s N=%d: %.3e s/iteration", backend, n, per_iter)
    path = out / "bench.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["backend", "num_ris_elements", "mean_iteration_seconds", "iterations"])
        for backend, n, dt, its in rows:
            writer.writerow([backend, n, repr(dt), its])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risfp",
        description="RIS-aided multi-user downlink: FP joint beamforming/reflecting simulator",
    )
    parser.add_argument("--version", action="version", version=f"risfp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override rng seed")
        p.add_argument("--trials", type=int, default=None, help="override trial count")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    p = sub.add_parser("run-scenario", help="Monte-Carlo sweep -> CSV + manifest")
    common(p)
    p.add_argument("--workers", type=int, default=None,
                   help="trial parallelism (default: RIS_FP_THREADS or 1)")
    p.set_defaults(fn=cmd_run_scenario)

    p = sub.add_parser("run-once", help="single draw + optimizer run -> trace.csv, solution.json")
    common(p)
    p.add_argument("--estimated", action="store_true",
                   help="estimate the cascaded channels first (needs [estimation])")
    p.set_defaults(fn=cmd_run_once)

    p = sub.add_parser("estimate", help="LS estimation error trials -> estimation.csv")
    common(p)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("oracle", help="desk-scale grid-search oracle vs optimizer")
    common(p)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("bench", help="per-iteration timing over an N sweep")
    common(p)
    p.add_argument("--sizes", default=None, help="comma-separated N values")
    p.add_argument("--iterations", type=int, default=25, help="timed iterations per size")
    p.add_argument("--backend", default="auto", choices=["auto", "cython", "python", "both"])
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.fn(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except KeyboardInterrupt:
        log.error("interrupted; partial results flushed where applicable")
        return 130


if __name__ == "__main__":
    sys.exit(main())
