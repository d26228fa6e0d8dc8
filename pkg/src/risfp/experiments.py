"""Seeded Monte-Carlo scenario runner.

A scenario sweeps one variable (RIS size, user count, Rician factor,
transmit power, pilot length, RIS distance, or slot length), runs the
requested algorithms on ``trials`` independent channel draws per sweep
value, and aggregates the chosen metric into a result table.  Trial RNG
streams are derived from (seed, trial index), so channel draws are shared
across sweep values (paired comparisons) and adding or removing
algorithms never perturbs them.
"""

from __future__ import annotations

import csv
import json
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__, baselines
from .channel import SystemConfig, draw_channels
from .estimation import dft_pilot_plan, estimate_cascaded
from .optimizer import run_algorithm1, run_algorithm2

__all__ = [
    "ScenarioSpec",
    "ResultRow",
    "ResultTable",
    "effective_sum_rate",
    "run_scenario",
    "ris_placement_sweep",
    "ALGORITHMS",
]

# stable ids so per-algorithm rng streams survive changes to the requested set
ALGORITHMS = {
    "fp-perfect": 1,
    "fp-estimated": 2,
    "zf-random": 3,
    "mmse-random": 4,
    "grid-oracle": 5,
}

SWEEP_VARIABLES = (
    "num_ris_elements",
    "num_users",
    "rician_factor",
    "transmit_power",
    "pilot_length",
    "ris_distance",
    "slot_length",
)


@dataclass
class ScenarioSpec:
    """One Monte-Carlo study: base system, sweep, algorithms, budget."""

    config: SystemConfig = field(default_factory=SystemConfig)
    name: str = "scenario"
    sweep: str = "num_ris_elements"
    values: tuple = (20, 30, 40, 50, 60)
    trials: int = 200
    algorithms: tuple[str, ...] = ("fp-perfect",)
    seed: int = 0
    metric: str = "sum_rate"          # sum_rate | effective_rate
    # estimated-CSI settings (fp-estimated)
    pilot_length: int | None = None   # default: num RIS elements
    pilot_power: float = 7.0
    uplink_noise_power: float | None = None   # default: downlink noise power
    slot_length: int = 512            # Upsilon, effective-rate denominator
    # optimizer settings
    tol: float = 1e-3
    max_iters: int = 100
    # baseline settings
    random_phase_draws: int = 100
    oracle_levels: int = 16
    oracle_precoder: str = "mmse"

    def validate(self) -> None:
        self.config.validate()
        if self.sweep not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable {self.sweep!r} (have {SWEEP_VARIABLES})")
        if len(self.values) == 0:
            raise ValueError("sweep values must be nonempty")
        diffs = np.diff(np.asarray(self.values, dtype=float))
        if diffs.size and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("sweep values must be strictly monotone")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {alg!r} (have {sorted(ALGORITHMS)})")
        if self.metric not in ("sum_rate", "effective_rate"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric == "effective_rate" and self.slot_length <= 0:
            raise ValueError("slot_length must be > 0")


@dataclass
class ResultRow:
    sweep_value: float
    algorithm: str
    mean: float
    std_error: float                  # sample std / sqrt(trials)
    mean_iterations: float
    mean_wall_time: float
    n_trials: int
    n_failed: int
    minimum: float
    maximum: float


@dataclass
class ResultTable:
    spec: ScenarioSpec
    rows: list[ResultRow]
    failures: list[dict] = field(default_factory=list)
    interrupted: bool = False

    def row(self, sweep_value, algorithm: str) -> ResultRow:
        for r in self.rows:
            if r.sweep_value == sweep_value and r.algorithm == algorithm:
                return r
        raise KeyError((sweep_value, algorithm))

    def means(self, algorithm: str) -> np.ndarray:
        return np.asarray([r.mean for r in self.rows if r.algorithm == algorithm])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                [
                    "sweep_variable",
                    "sweep_value",
                    "algorithm",
                    "mean_nats",
                    "mean_bits",
                    "std_error",
                    "mean_iterations",
                    "mean_wall_time",
                    "n_trials",
                    "n_failed",
                ]
            )
            for r in self.rows:
                writer.writerow(
                    [
                        self.spec.sweep,
                        repr(float(r.sweep_value)),
                        r.algorithm,
                        repr(r.mean),
                        repr(float(r.mean / np.log(2.0))),
                        repr(r.std_error),
                        repr(r.mean_iterations),
                        repr(r.mean_wall_time),
                        r.n_trials,
                        r.n_failed,
                    ]
                )

    def write_manifest(self, path) -> None:
        spec_dict = asdict(self.spec)
        manifest = {
            "provenance": f"risfp {__version__} / numpy {np.__version__} / {platform.platform()}",
            "seed": self.spec.seed,
            "spec": spec_dict,
            "n_failures": len(self.failures),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def effective_sum_rate(rate: float, pilot_length: float, slot_length: float) -> float:
    """Rate discounted by the pilot fraction: (Upsilon - L) / Upsilon * rate."""
    if slot_length <= 0:
        raise ValueError("slot_length must be > 0")
    if pilot_length < 0 or pilot_length > slot_length:
        raise ValueError(
            f"pilot length {pilot_length} must lie in [0, slot_length={slot_length}]"
        )
    return (slot_length - pilot_length) / slot_length * rate


def _apply_sweep(spec: ScenarioSpec, value) -> tuple[SystemConfig, int | None, float]:
    """Config, pilot length, and slot length at one sweep point."""
    cfg = spec.config
    pilot_length = spec.pilot_length
    slot = spec.slot_length
    if spec.sweep == "num_ris_elements":
        cfg = replace(cfg, num_ris_elements=int(value))
    elif spec.sweep == "num_users":
        cfg = replace(cfg, num_users=int(value), user_positions=None)
    elif spec.sweep == "rician_factor":
        cfg = replace(cfg, rician_factor_G=float(value), rician_factor_h=float(value))
    elif spec.sweep == "transmit_power":
        cfg = replace(cfg, transmit_power=float(value))
    elif spec.sweep == "pilot_length":
        pilot_length = int(value)
    elif spec.sweep == "ris_distance":
        cfg = replace(cfg, ris_position=(float(value), cfg.ris_position[1]))
    elif spec.sweep == "slot_length":
        slot = int(value)
    else:
        raise ValueError(f"unknown sweep variable {spec.sweep!r}")
    if pilot_length is None:
        pilot_length = cfg.num_ris_elements
    return cfg, pilot_length, slot


def _run_trial(spec: ScenarioSpec, value, trial: int) -> list[tuple]:
    """All requested algorithms for one (sweep value, trial) cell."""
    cfg, pilot_length, slot = _apply_sweep(spec, value)
    channel_rng = np.random.default_rng([spec.seed, 101, trial])
    channels = draw_channels(cfg, channel_rng)
    H = channels.stacked_cascaded()
    p_t, noise = cfg.transmit_power, cfg.noise_power
    value_index = list(spec.values).index(value)

    results = []
    for alg in spec.algorithms:
        alg_rng = np.random.default_rng([spec.seed, 202, trial, ALGORITHMS[alg], value_index])
        t0 = time.perf_counter()
        try:
            iterations = 0.0
            if alg == "fp-perfect":
                _, trace = run_algorithm1(H, cfg, tol=spec.tol, max_iters=spec.max_iters)
                rate = float(trace.objective_f1[-1])
                iterations = float(len(trace))
            elif alg == "fp-estimated":
                if pilot_length < cfg.num_ris_elements:
                    raise ValueError(
                        f"pilot length {pilot_length} < num RIS elements {cfg.num_ris_elements}"
                    )
                sigma_n = (
                    noise if spec.uplink_noise_power is None else spec.uplink_noise_power
                )
                plan = dft_pilot_plan(
                    cfg.num_ris_elements,
                    pilot_length,
                    pilot_power=spec.pilot_power,
                    uplink_noise_power=sigma_n,
                )
                est = estimate_cascaded(channels, plan, alg_rng)
                _, trace, realized = run_algorithm2(
                    est.stacked(), H, cfg, tol=spec.tol, max_iters=spec.max_iters
                )
                rate = realized.sum_rate
                iterations = float(len(trace))
            elif alg in ("zf-random", "mmse-random"):
                precoder = "zf" if alg == "zf-random" else "mmse"
                rate = baselines.random_phase_rate(
                    H, precoder, p_t, noise, alg_rng, draws=spec.random_phase_draws
                )
            elif alg == "grid-oracle":
                _, rate = baselines.grid_search_phases(
                    H, spec.oracle_precoder, spec.oracle_levels, noise, p_t
                )
            else:
                raise ValueError(f"unknown algorithm {alg!r}")
            if spec.metric == "effective_rate":
                used = pilot_length if alg == "fp-estimated" else 0
                rate = effective_sum_rate(rate, used, slot)
            results.append((alg, rate, iterations, time.perf_counter() - t0, None))
        except Exception as exc:  # recorded, the sweep continues
            results.append((alg, np.nan, 0.0, time.perf_counter() - t0, repr(exc)))
    return results


def _worker(args):
    spec, value, trial = args
    return value, trial, _run_trial(spec, value, trial)


def run_scenario(spec: ScenarioSpec, workers: int | None = None) -> ResultTable:
    """Execute the scenario; deterministic for a fixed (spec, seed).

    ``workers`` defaults to the RIS_FP_THREADS environment variable (1 if
    unset).  Parallel execution partitions trials but aggregates in a
    fixed order, so results match the sequential run exactly.
    """
    spec.validate()
    if workers is None:
        workers = int(os.environ.get("RIS_FP_THREADS", "1"))
    jobs = [(spec, value, t) for value in spec.values for t in range(spec.trials)]
    per_cell: dict[tuple, list] = {}
    interrupted = False
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for value, trial, res in pool.map(_worker, jobs, chunksize=8):
                    per_cell[(value, trial)] = res
        else:
            for job in jobs:
                value, trial, res = _worker(job)
                per_cell[(value, trial)] = res
    except KeyboardInterrupt:
        # aggregate whatever completed so partial results can be flushed
        interrupted = True

    rows: list[ResultRow] = []
    failures: list[dict] = []
    for value in spec.values:
        by_alg: dict[str, list[tuple]] = {alg: [] for alg in spec.algorithms}
        attempted = 0
        for trial in range(spec.trials):
            cell = per_cell.get((value, trial))
            if cell is None:
                continue
            attempted += 1
            for alg, rate, iters, dt, err in cell:
                if err is None:
                    by_alg[alg].append((rate, iters, dt))
                else:
                    failures.append(
                        {"sweep_value": value, "trial": trial, "algorithm": alg, "error": err}
                    )
        for alg in spec.algorithms:
            good = by_alg[alg]
            n_ok = len(good)
            n_fail = attempted - n_ok
            if n_ok == 0:
                rows.append(
                    ResultRow(value, alg, np.nan, np.nan, np.nan, np.nan, 0, n_fail,
                              np.nan, np.nan)
                )
                continue
            rates = np.asarray([g[0] for g in good])
            rows.append(
                ResultRow(
                    sweep_value=value,
                    algorithm=alg,
                    mean=float(rates.mean()),
                    std_error=float(rates.std(ddof=1) / np.sqrt(n_ok)) if n_ok > 1 else 0.0,
                    mean_iterations=float(np.mean([g[1] for g in good])),
                    mean_wall_time=float(np.mean([g[2] for g in good])),
                    n_trials=n_ok,
                    n_failed=n_fail,
                    minimum=float(rates.min()),
                    maximum=float(rates.max()),
                )
            )
    return ResultTable(spec=spec, rows=rows, failures=failures, interrupted=interrupted)


def ris_placement_sweep(spec: ScenarioSpec, workers: int | None = None) -> ResultTable:
    """Sweep the RIS position along the BS-user axis (sweep = ris_distance)."""
    if spec.sweep != "ris_distance":
        spec = replace(spec, sweep="ris_distance")
    return run_scenario(spec, workers=workers)
