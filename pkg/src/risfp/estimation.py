"""Uplink LS estimation of the cascaded user-RIS-BS channels.

Each user sends L pilot symbols while the surface cycles through the
columns of an N x L DFT beamforming matrix Psi; the BS observes
Y_k = H_k X + N with X = P_k Psi diag(S) known, and estimates
Hhat_k = Y_k X^+ with X^+ = X^H (X X^H)^{-1}.  The estimation error is
-N X^+, so its mean squared Frobenius norm is M sigma_n^2 Tr[(X X^H)^{-1}]
(= M sigma_n^2 N / (P_k^2 L) for the DFT construction).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet

__all__ = [
    "PilotPlan",
    "EstimationResult",
    "dft_pilot_matrix",
    "dft_pilot_plan",
    "simulate_uplink_pilots",
    "ls_estimate",
    "expected_ls_error",
    "estimate_cascaded",
]


def dft_pilot_matrix(num_elements: int, length: int) -> np.ndarray:
    """N x L matrix with entry (n, l) = exp(2 pi j n l / L); rows orthogonal.

    Requires L >= N so the LS pseudo-inverse has full rank
    (Psi Psi^H = L I_N).
    """
    if length < num_elements:
        raise ValueError(f"pilot length {length} must be >= num_elements {num_elements}")
    n = np.arange(num_elements)[:, np.newaxis]
    l = np.arange(length)[np.newaxis, :]
    return np.exp(2j * np.pi * n * l / length)


@dataclass
class PilotPlan:
    """Pilot schedule of one user: RIS beams, symbols, power and noise."""

    length: int                       # L
    pilot_power: float                # P_k, amplitude factor on X
    Psi: np.ndarray = field(repr=False)   # (N, L)
    symbols: np.ndarray = field(repr=False)  # (L,), unit modulus
    uplink_noise_power: float = 1e-13     # sigma_n^2

    @property
    def num_elements(self) -> int:
        return self.Psi.shape[0]

    @property
    def X(self) -> np.ndarray:
        """Equivalent training matrix P_k Psi diag(S), shape (N, L)."""
        return self.pilot_power * self.Psi * self.symbols[np.newaxis, :]

    def validate(self, dft: bool = True) -> None:
        n, l = self.Psi.shape
        if self.length != l:
            raise ValueError("length field does not match Psi")
        if l < n:
            raise ValueError(f"pilot length {l} must be >= num RIS elements {n}")
        if self.symbols.shape != (l,):
            raise ValueError("symbols must have length L")
        if np.max(np.abs(np.abs(self.symbols) - 1.0)) > 1e-12:
            raise ValueError("pilot symbols must be unit modulus")
        if dft:
            gram = self.Psi @ self.Psi.conj().T
            if np.linalg.norm(gram - l * np.eye(n)) > 1e-9 * l * np.sqrt(n):
                raise ValueError("Psi rows are not orthogonal with Psi Psi^H = L I")


def dft_pilot_plan(
    num_elements: int,
    length: int,
    pilot_power: float = 1.0,
    uplink_noise_power: float = 1e-13,
    symbols: str | np.ndarray = "ones",
    rng: np.random.Generator | None = None,
) -> PilotPlan:
    """DFT-based plan; symbols 'ones' (default), 'qpsk' (needs rng), or explicit."""
    psi = dft_pilot_matrix(num_elements, length)
    if isinstance(symbols, str):
        if symbols == "ones":
            s = np.ones(length, dtype=complex)
        elif symbols == "qpsk":
            if rng is None:
                raise ValueError("qpsk symbols require an rng")
            s = np.exp(1j * (np.pi / 4 + np.pi / 2 * rng.integers(0, 4, size=length)))
        else:
            raise ValueError(f"unknown symbol kind {symbols!r}")
    else:
        s = np.asarray(symbols, dtype=complex)
    plan = PilotPlan(
        length=length,
        pilot_power=pilot_power,
        Psi=psi,
        symbols=s,
        uplink_noise_power=uplink_noise_power,
    )
    plan.validate()
    return plan


def simulate_uplink_pilots(
    H_k: np.ndarray, plan: PilotPlan, rng: np.random.Generator
) -> np.ndarray:
    """Received pilots Y_k = H_k X + N, noise i.i.d. CN(0, sigma_n^2)."""
    if H_k.shape[1] != plan.num_elements:
        raise ValueError(
            f"H_k has {H_k.shape[1]} columns but the plan covers {plan.num_elements} elements"
        )
    m, l = H_k.shape[0], plan.length
    sigma = np.sqrt(plan.uplink_noise_power / 2.0)
    noise = sigma * (rng.standard_normal((m, l)) + 1j * rng.standard_normal((m, l)))
    return H_k @ plan.X + noise


def ls_estimate(Y_k: np.ndarray, plan: PilotPlan) -> np.ndarray:
    """Hhat_k = Y_k X^+ with X^+ = X^H (X X^H)^{-1}."""
    x = plan.X
    return Y_k @ x.conj().T @ np.linalg.inv(x @ x.conj().T)


def expected_ls_error(plan: PilotPlan, num_bs_antennas: int) -> float:
    """Analytic E||H_k - Hhat_k||_F^2 = M sigma_n^2 Tr[(X X^H)^{-1}].

    Computed from the actual X; equals M sigma_n^2 N / (P_k^2 L) for the
    DFT plan.
    """
    x = plan.X
    tr = np.trace(np.linalg.inv(x @ x.conj().T)).real
    return float(num_bs_antennas * plan.uplink_noise_power * tr)


@dataclass
class EstimationResult:
    """LS estimates for all users plus their realized squared errors."""

    H_hat: list[np.ndarray]
    per_user_sq_error: np.ndarray     # ||H_k - Hhat_k||_F^2
    pilot_plan: PilotPlan

    def validate(self) -> None:
        for k, h in enumerate(self.H_hat):
            if not np.all(np.isfinite(h)):
                raise ValueError(f"estimate of user {k} contains non-finite entries")

    def stacked(self) -> np.ndarray:
        return np.ascontiguousarray(np.stack(self.H_hat))

    def write_csv(self, path) -> None:
        plan = self.pilot_plan
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["user", "sq_error", "pilot_length", "pilot_power", "uplink_noise_power"]
            )
            for k, err in enumerate(self.per_user_sq_error):
                writer.writerow(
                    [k, repr(float(err)), plan.length, repr(plan.pilot_power),
                     repr(plan.uplink_noise_power)]
                )


def estimate_cascaded(
    channels: ChannelSet | list[np.ndarray] | np.ndarray,
    plan: PilotPlan,
    rng: np.random.Generator,
) -> EstimationResult:
    """Independent per-user pilot round trips (orthogonal pilot slots)."""
    if isinstance(channels, ChannelSet):
        cascaded = channels.cascaded
    else:
        cascaded = list(channels)
    h_hat = []
    errors = []
    for H_k in cascaded:
        y = simulate_uplink_pilots(H_k, plan, rng)
        est = ls_estimate(y, plan)
        h_hat.append(est)
        errors.append(float(np.linalg.norm(H_k - est) ** 2))
    return EstimationResult(
        H_hat=h_hat, per_user_sq_error=np.asarray(errors), pilot_plan=plan
    )
