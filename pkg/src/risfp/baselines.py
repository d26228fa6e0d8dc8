"""Reference precoding/reflecting schemes and a brute-force phase oracle.

ZF / regularized-MMSE / matched-filter transmit precoders paired with
random or all-ones reflection stand in for solver-backed comparison
schemes; the exhaustive grid search over quantized phases is a desk-scale
verification oracle, not a practical design.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops

__all__ = [
    "BaselineScheme",
    "apply_power_policy",
    "zf_precoder",
    "mmse_precoder",
    "matched_filter_precoder",
    "get_precoder",
    "random_phase_vector",
    "random_phase_rate",
    "grid_search_phases",
    "GRID_MAX_CANDIDATES",
]

GRID_MAX_CANDIDATES = 10_000_000
_GRID_MAX_ELEMENTS = 8


def zf_precoder(h: np.ndarray, p_t: float) -> np.ndarray:
    """Zero-forcing directions with equal per-user power summing to P_T.

    ``h`` is (K, M) with rows h_k; requires K <= M and a full-rank stacked
    channel.  Columns satisfy h_i^H w_k = 0 for i != k.
    """
    K, M = h.shape
    if K > M:
        raise ValueError(f"ZF needs K <= M, got K={K}, M={M}")
    Hs = h.T  # (M, K), column k is h_k
    if np.linalg.matrix_rank(Hs) < K:
        raise np.linalg.LinAlgError("stacked channel matrix is rank deficient")
    directions = np.linalg.solve((Hs.conj().T @ Hs).T, Hs.T).T  # Hs (Hs^H Hs)^{-1}
    norms = np.linalg.norm(directions, axis=0)
    return directions / norms * np.sqrt(p_t / K)


def mmse_precoder(h: np.ndarray, p_t: float, noise_power: float) -> np.ndarray:
    """Regularized ZF with regularizer K sigma_0^2 / P_T, scaled to power P_T."""
    K, M = h.shape
    A = h.T @ h.conj() + (K * noise_power / p_t) * np.eye(M)
    directions = np.linalg.solve(A, h.T)  # columns A^{-1} h_k
    total = float(np.sum(np.abs(directions) ** 2))
    return directions * np.sqrt(p_t / total)


def matched_filter_precoder(h: np.ndarray, p_t: float) -> np.ndarray:
    """Columns along h_k with equal per-user power."""
    K = h.shape[0]
    W = h.T.copy()
    norms = np.linalg.norm(W, axis=0)
    norms[norms == 0] = 1.0
    return W / norms * np.sqrt(p_t / K)


def get_precoder(name: str):
    """Precoder factory taking (h, p_t, noise_power) -> W."""
    if callable(name):
        return name
    table = {
        "zf": lambda h, p_t, noise: zf_precoder(h, p_t),
        "mmse": mmse_precoder,
        "mf": lambda h, p_t, noise: matched_filter_precoder(h, p_t),
    }
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown precoder {name!r} (have zf, mmse, mf)") from None


def apply_power_policy(W: np.ndarray, p_t: float, policy: str) -> np.ndarray:
    """Rescale precoder columns: 'equal' per-user shares, 'full' total only."""
    if policy == "equal":
        norms = np.linalg.norm(W, axis=0)
        norms[norms == 0] = 1.0
        return W / norms * np.sqrt(p_t / W.shape[1])
    if policy == "full":
        total = float(np.sum(np.abs(W) ** 2))
        if total == 0.0:
            return W
        return W * np.sqrt(p_t / total)
    raise ValueError(f"unknown power policy {policy!r} (have equal, full)")


@dataclass
class BaselineScheme:
    """A precoder/reflector pairing usable as a comparison curve."""

    precoder: str = "mmse"            # zf | mmse | mf
    reflector: str = "random"         # random | ones | grid
    power_policy: str = "full"        # equal | full
    grid_levels: int = 16

    def validate_for(self, num_ris_elements: int) -> None:
        get_precoder(self.precoder)
        if self.reflector not in ("random", "ones", "grid"):
            raise ValueError(f"unknown reflector {self.reflector!r}")
        if self.power_policy not in ("equal", "full"):
            raise ValueError(f"unknown power policy {self.power_policy!r}")
        if self.reflector == "grid":
            if num_ris_elements > _GRID_MAX_ELEMENTS:
                raise ValueError(
                    f"grid search limited to N <= {_GRID_MAX_ELEMENTS}, got {num_ris_elements}"
                )
            if self.grid_levels ** num_ris_elements > GRID_MAX_CANDIDATES:
                raise ValueError(
                    f"grid search limited to Q^N <= {GRID_MAX_CANDIDATES:.0e} candidates"
                )

    def design(
        self,
        H: np.ndarray,
        p_t: float,
        noise_power: float,
        rng: np.random.Generator | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Pick the reflection per the scheme and precode against it -> (phi, W)."""
        H = np.asarray(H)
        n = H.shape[-1]
        self.validate_for(n)
        if self.reflector == "ones":
            phi = np.ones(n, dtype=complex)
        elif self.reflector == "random":
            if rng is None:
                raise ValueError("random reflector requires an rng")
            phi = random_phase_vector(n, rng)
        else:
            phi, _ = grid_search_phases(
                H, self.precoder, self.grid_levels, noise_power, p_t
            )
        h = ops.effective_channels(H, phi)
        W = get_precoder(self.precoder)(h, p_t, noise_power)
        return phi, apply_power_policy(W, p_t, self.power_policy)


def random_phase_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-modulus vector with i.i.d. uniform phases."""
    return np.exp(2j * np.pi * rng.random(n))


def _rate_for_phi(H: np.ndarray, phi: np.ndarray, precoder, p_t: float, noise: float) -> float:
    h = ops.effective_channels(H, phi)
    W = precoder(h, p_t, noise)
    return ops.sum_rate(W, h, noise)


def random_phase_rate(
    H: np.ndarray,
    precoder,
    p_t: float,
    noise_power: float,
    rng: np.random.Generator,
    draws: int = 100,
) -> float:
    """Mean sum rate of the precoder over random reflection draws."""
    precoder = get_precoder(precoder)
    H = np.asarray(H)
    n = H.shape[-1]
    total = 0.0
    for _ in range(draws):
        total += _rate_for_phi(H, random_phase_vector(n, rng), precoder, p_t, noise_power)
    return total / draws


def grid_search_phases(
    H: np.ndarray,
    precoder,
    levels: int,
    noise_power: float,
    p_t: float,
    max_candidates: int = GRID_MAX_CANDIDATES,
) -> tuple[np.ndarray, float]:
    """Exhaustive search over phi_n in {exp(2 pi j q / Q)}; returns (phi*, rate*).

    Deterministic; ties resolved toward the lexicographically smallest
    index vector.  Single-user instances evaluate in vectorized chunks
    (there the rate is monotone in ||h(phi)||, whatever the precoder);
    multi-user instances re-run the precoder per candidate.
    """
    H = np.asarray(H)
    K, M, N = H.shape
    if N > _GRID_MAX_ELEMENTS:
        raise ValueError(f"instance too large: N={N} > {_GRID_MAX_ELEMENTS}")
    n_cand = levels ** N
    if n_cand > max_candidates:
        raise ValueError(f"instance too large: {levels}^{N} > {max_candidates}")
    precoder = get_precoder(precoder)
    roots = np.exp(2j * np.pi * np.arange(levels) / levels)

    if K == 1:
        # rate = log(1 + P_T ||h||^2 / sigma^2): maximize ||H phi|| in chunks
        best_norm2 = -1.0
        best_index = 0
        chunk = 1 << 16
        Ht = H[0].T  # (N, M)
        for start in range(0, n_cand, chunk):
            idx = np.arange(start, min(start + chunk, n_cand))
            digits = (idx[:, np.newaxis] // levels ** np.arange(N - 1, -1, -1)) % levels
            cand = roots[digits]  # (chunk, N), row-major lexicographic order
            norms = np.abs(cand @ Ht) ** 2  # (chunk, M)
            tot = norms.sum(axis=1)
            j = int(np.argmax(tot))
            if tot[j] > best_norm2:
                best_norm2 = float(tot[j])
                best_index = int(idx[j])
        digits = (best_index // levels ** np.arange(N - 1, -1, -1)) % levels
        phi = roots[digits]
        h = ops.effective_channels(H, phi)
        W = precoder(h, p_t, noise_power)
        return phi, ops.sum_rate(W, h, noise_power)

    best_rate = -np.inf
    best_phi = None
    for index in np.ndindex(*(levels,) * N):
        phi = roots[np.asarray(index)]
        rate = _rate_for_phi(H, phi, precoder, p_t, noise_power)
        if rate > best_rate:
            best_rate = rate
            best_phi = phi
    return best_phi, float(best_rate)
