"""Block-coordinate ascent driver for the joint beamforming/reflecting design.

``run_algorithm1`` alternates the four closed-form updates (alpha, beta,
W with its dual bisection, epsilon) and one guarded Gauss-Seidel phase
sweep per outer iteration, stopping when the surrogate objective improves
by at most ``tol`` or after ``max_iters`` iterations.  ``run_algorithm2``
runs the identical loop on estimated cascaded channels and additionally
scores the produced (W, phi) against the true channels.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import core, ops
from .channel import SystemConfig

__all__ = [
    "OptimizerState",
    "ConvergenceTrace",
    "RealizedPerformance",
    "initial_state",
    "run_algorithm1",
    "run_algorithm2",
]


@dataclass
class OptimizerState:
    """One iterate of the optimizer: decision variables plus auxiliaries."""

    W: np.ndarray                    # (M, K)
    phi: np.ndarray                  # (N,)
    alpha: np.ndarray                # (K,) real >= 0
    beta: np.ndarray                 # (K,) complex
    epsilon: np.ndarray              # (K,) complex
    lam: float                       # dual variable of the power constraint
    iteration: int

    def validate(self, transmit_power: float) -> None:
        if np.max(np.abs(np.abs(self.phi) - 1.0), initial=0.0) > 1e-10:
            raise ValueError("phi is not unit modulus")
        power = float(np.sum(np.abs(self.W) ** 2))
        if power > transmit_power * (1.0 + 1e-8):
            raise ValueError(f"transmit power {power} exceeds budget {transmit_power}")
        if np.any(self.alpha < 0):
            raise ValueError("alpha must be nonnegative")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")


@dataclass
class ConvergenceTrace:
    """Per-iteration objectives and timing of one optimizer run."""

    objective_f1: np.ndarray         # sum rate [nats]
    objective_f1a: np.ndarray        # surrogate value
    objective_f3: np.ndarray         # accepted phase-subproblem objective
    phi_accepted: np.ndarray         # bool, sweep candidate accepted
    wall_time: np.ndarray            # seconds per iteration
    terminated_by: str               # "threshold" or "max_iters"

    def __len__(self) -> int:
        return len(self.objective_f1a)

    def validate(self, step_tol: float = 1e-9) -> None:
        diffs = np.diff(self.objective_f1a)
        if diffs.size and float(diffs.min()) < -step_tol:
            raise ValueError(f"f1a trace decreased by {-float(diffs.min()):.3e}")

    def to_csv_rows(self) -> list[tuple]:
        return [
            (i + 1, self.objective_f1[i], self.objective_f1a[i], self.wall_time[i])
            for i in range(len(self))
        ]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iteration", "f1", "f1a", "wall_time"])
            for row in self.to_csv_rows():
                writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


@dataclass
class RealizedPerformance:
    """Designed (W, phi) applied to the true channels (estimated-CSI runs)."""

    sinr: np.ndarray                 # (K,)
    per_user_rate: np.ndarray        # (K,) nats
    sum_rate: float                  # nats
    per_iteration: np.ndarray = field(default_factory=lambda: np.empty(0))


def initial_state(
    H: np.ndarray,
    cfg: SystemConfig,
    kind: str = "matched-filter",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Feasible (phi0, W0).

    ``matched-filter``: phi0 all ones, W0 columns along h_k(phi0) with
    equal per-user power summing to P_T.  ``random``: uniform phases and
    a matched filter against them (needs ``rng``).
    """
    K, M, N = H.shape
    if kind == "matched-filter":
        phi0 = np.ones(N, dtype=complex)
    elif kind == "random":
        if rng is None:
            raise ValueError("random init requires an rng")
        phi0 = np.exp(2j * np.pi * rng.random(N))
    else:
        raise ValueError(f"unknown init kind {kind!r}")
    h = ops.effective_channels(H, phi0)
    W0 = np.zeros((M, K), dtype=complex)
    per_user = cfg.transmit_power / K
    for k in range(K):
        norm = np.linalg.norm(h[k])
        if norm > 0:
            W0[:, k] = np.sqrt(per_user) * h[k] / norm
    return phi0, W0


def _prepare(H, cfg, init, rng):
    H = np.ascontiguousarray(np.asarray(H, dtype=complex))
    if H.ndim != 3:
        H = np.ascontiguousarray(np.stack(list(H)))
    K, M, N = H.shape
    if isinstance(init, str) or init is None:
        phi0, W0 = initial_state(H, cfg, init or "matched-filter", rng)
    else:
        phi0, W0 = init
        phi0 = np.asarray(phi0, dtype=complex)
        W0 = np.asarray(W0, dtype=complex)
        if np.max(np.abs(np.abs(phi0) - 1.0)) > 1e-10:
            raise ValueError("initial phi violates the unit-modulus constraint")
        if float(np.sum(np.abs(W0) ** 2)) > cfg.transmit_power * (1.0 + 1e-8):
            raise ValueError("initial W violates the power constraint")
    return H, phi0.copy(), W0.copy()


def _run_fp_loop(
    H_design: np.ndarray,
    cfg: SystemConfig,
    init,
    tol: float,
    max_iters: int,
    n_sweeps: int,
    backend: str | None,
    rng: np.random.Generator | None,
    record: list | None,
    H_eval: np.ndarray | None = None,
):
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not tol >= 0 and tol != -1.0:
        raise ValueError("tol must be >= 0 (or -1 to disable early stopping)")
    H, phi, W = _prepare(H_design, cfg, init, rng)
    K, M, N = H.shape
    if record is not None:
        backend = "python"  # only the numpy backend exposes internals
    mod = core.get_backend(backend)
    ws = mod.make_workspace(K, M, N)
    p_t, noise = cfg.transmit_power, cfg.noise_power

    # alpha^0 = gamma(W0, phi0) makes the initial surrogate equal the sum rate
    f1a_prev = ops.sum_rate(W, ops.effective_channels(H, phi), noise)

    f1_tr, f1a_tr, f3_tr, acc_tr, dt_tr = [], [], [], [], []
    realized_tr = [] if H_eval is not None else None
    terminated = "max_iters"
    for _ in range(max_iters):
        t0 = time.perf_counter()
        f1, f1a, f3_old, f3_new, accepted, lam = mod.fp_iteration(
            ws, H, phi, W, p_t, noise, n_sweeps, record
        )
        dt_tr.append(time.perf_counter() - t0)
        f1_tr.append(f1)
        f1a_tr.append(f1a)
        f3_tr.append(f3_new if accepted else f3_old)
        acc_tr.append(accepted)
        if realized_tr is not None:
            realized_tr.append(ops.sum_rate(W, ops.effective_channels(H_eval, phi), noise))
        if tol >= 0 and f1a - f1a_prev <= tol:
            terminated = "threshold"
            break
        f1a_prev = f1a

    aux = mod.final_auxiliaries(ws)
    state = OptimizerState(
        W=W,
        phi=phi,
        alpha=aux["alpha"],
        beta=aux["beta"],
        epsilon=aux["epsilon"],
        lam=aux["lam"],
        iteration=len(f1_tr),
    )
    trace = ConvergenceTrace(
        objective_f1=np.asarray(f1_tr),
        objective_f1a=np.asarray(f1a_tr),
        objective_f3=np.asarray(f3_tr),
        phi_accepted=np.asarray(acc_tr, dtype=bool),
        wall_time=np.asarray(dt_tr),
        terminated_by=terminated,
    )
    realized = None
    if H_eval is not None:
        h_true = ops.effective_channels(H_eval, phi)
        sinr = ops.sinr_per_user(W, h_true, noise)
        realized = RealizedPerformance(
            sinr=sinr,
            per_user_rate=np.log1p(sinr),
            sum_rate=float(np.log1p(sinr).sum()),
            per_iteration=np.asarray(realized_tr),
        )
    return state, trace, realized


def run_algorithm1(
    H,
    cfg: SystemConfig,
    init=None,
    tol: float = 1e-3,
    max_iters: int = 100,
    n_sweeps: int = 1,
    backend: str | None = None,
    rng: np.random.Generator | None = None,
    record: list | None = None,
) -> tuple[OptimizerState, ConvergenceTrace]:
    """Joint design against the given cascaded channels (perfect CSI).

    ``H`` is a (K, M, N) stack or a list of K cascaded matrices.  ``init``
    may be None / "matched-filter" / "random" or an explicit (phi0, W0)
    pair satisfying the constraints.  Pass ``tol=-1`` to always run
    ``max_iters`` iterations (used for benchmarking).
    """
    state, trace, _ = _run_fp_loop(
        H, cfg, init, tol, max_iters, n_sweeps, backend, rng, record
    )
    return state, trace


def run_algorithm2(
    H_estimated,
    H_true,
    cfg: SystemConfig,
    init=None,
    tol: float = 1e-3,
    max_iters: int = 100,
    n_sweeps: int = 1,
    backend: str | None = None,
    rng: np.random.Generator | None = None,
    record: list | None = None,
) -> tuple[OptimizerState, ConvergenceTrace, RealizedPerformance]:
    """Identical loop driven by estimated channels, scored on the true ones.

    The design trajectory depends only on ``H_estimated`` (with equal
    inputs it reproduces :func:`run_algorithm1` bit for bit); the realized
    SINR / sum rate applies the designed (W, phi) to ``H_true``.
    """
    H_est = np.ascontiguousarray(np.asarray(H_estimated, dtype=complex))
    if H_est.ndim != 3:
        H_est = np.ascontiguousarray(np.stack(list(H_estimated)))
    H_tru = np.ascontiguousarray(np.asarray(H_true, dtype=complex))
    if H_tru.ndim != 3:
        H_tru = np.ascontiguousarray(np.stack(list(H_true)))
    if H_est.shape != H_tru.shape:
        raise ValueError(
            f"estimated/true channel shapes differ: {H_est.shape} vs {H_tru.shape}"
        )
    state, trace, realized = _run_fp_loop(
        H_est, cfg, init, tol, max_iters, n_sweeps, backend, rng, record, H_eval=H_tru
    )
    return state, trace, realized
