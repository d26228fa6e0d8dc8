"""Closed-form block updates for the fractional-programming optimizer.

Notation used throughout (all arrays complex128 unless noted):

* ``H`` -- (K, M, N) stack of cascaded matrices H_k = G diag(h_{r,k});
* ``phi`` -- (N,) unit-modulus reflection vector;
* ``h`` -- (K, M) effective user channels, row k is h_k = H_k phi, so the
  received scalar of beam i at user k is h_k^H w_i = phi^H H_k^H w_i
  (the reflection coefficients enter conjugated relative to the
  diag(phi) product form -- a pure relabeling, phases are free);
* ``W`` -- (M, K) beamforming matrix, column k serves user k;
* ``b`` -- (K, K, N) with b[k, i] = H_k^H w_i, the per-element coupling
  vectors of the reflection subproblem;
* ``alpha, beta, eps`` -- the auxiliary variables of the Lagrangian-dual
  and quadratic transforms (alpha real >= 0, beta/eps complex, length K).

The sum rate is f1 = sum_k log(1 + gamma_k) in nats; its surrogate is
f1a = sum log(1 + alpha_k) - sum alpha_k + sum (1 + alpha_k) gamma_k / (1 + gamma_k).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "effective_user_channel",
    "effective_channels",
    "cross_gains",
    "sinr_per_user",
    "sum_rate",
    "eval_f1a",
    "eval_f2b",
    "eval_f2b_lagrangian",
    "update_alpha",
    "update_beta",
    "update_w",
    "b_tensor",
    "eval_f3",
    "update_epsilon",
    "compute_UV",
    "eval_f3a",
    "eval_f3b",
    "update_phi_sweep",
    "PHASE_TIE_TOL",
    "POWER_REL_TOL",
]

# |B2| at or below this is treated as "objective locally flat": keep phi_n.
PHASE_TIE_TOL = 1e-14
# relative tolerance of the dual bisection on the transmit power
POWER_REL_TOL = 1e-8
_BISECT_MAX_ITERS = 100


def effective_user_channel(H_k: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Effective channel of one user, h_k = H_k phi (so h_k^H = phi^H H_k^H)."""
    if H_k.shape[1] != phi.shape[0]:
        raise ValueError(f"shape mismatch: H_k is {H_k.shape}, phi has length {phi.shape[0]}")
    return H_k @ phi


def effective_channels(H: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """All effective channels as rows of a (K, M) array."""
    H = np.asarray(H)
    if H.shape[-1] != phi.shape[0]:
        raise ValueError(f"shape mismatch: H is {H.shape}, phi has length {phi.shape[0]}")
    return H @ phi


def cross_gains(W: np.ndarray, h: np.ndarray) -> np.ndarray:
    """g[k, i] = h_k^H w_i, shape (K, K)."""
    return h.conj() @ W


def sinr_per_user(W: np.ndarray, h: np.ndarray, noise_power: float) -> np.ndarray:
    """gamma_k = |h_k^H w_k|^2 / (sum_{i != k} |h_k^H w_i|^2 + sigma_0^2)."""
    g2 = np.abs(cross_gains(W, h)) ** 2
    sig = np.diag(g2).copy()
    interf = g2.sum(axis=1) - sig
    return sig / (interf + noise_power)


def sum_rate(W: np.ndarray, h: np.ndarray, noise_power: float) -> float:
    """f1 = sum_k log(1 + gamma_k), natural log."""
    return float(np.log1p(sinr_per_user(W, h, noise_power)).sum())


def eval_f1a(
    alpha: np.ndarray,
    W: np.ndarray,
    phi: np.ndarray,
    H: np.ndarray,
    noise_power: float,
) -> float:
    """Dual-transform surrogate of the sum rate at (alpha, W, phi)."""
    gamma = sinr_per_user(W, effective_channels(H, phi), noise_power)
    return float(
        np.log1p(alpha).sum() - alpha.sum() + ((1.0 + alpha) * gamma / (1.0 + gamma)).sum()
    )


def eval_f2b(
    W: np.ndarray,
    beta: np.ndarray,
    h: np.ndarray,
    alpha: np.ndarray,
    noise_power: float,
) -> float:
    """Quadratic-transform surrogate of the beamforming subproblem."""
    g = cross_gains(W, h)
    at = np.sqrt(1.0 + alpha)
    lin = 2.0 * np.real(at * beta.conj() * np.diag(g)).sum()
    quad = (np.abs(beta) ** 2 * ((np.abs(g) ** 2).sum(axis=1) + noise_power)).sum()
    return float(lin - quad)


def eval_f2b_lagrangian(
    W: np.ndarray,
    beta: np.ndarray,
    h: np.ndarray,
    alpha: np.ndarray,
    noise_power: float,
    lam: float,
    p_t: float,
) -> float:
    """f2b minus the power-constraint penalty lam (sum ||w_k||^2 - P_T)."""
    return eval_f2b(W, beta, h, alpha, noise_power) - lam * (
        float(np.sum(np.abs(W) ** 2)) - p_t
    )


def update_alpha(gamma: np.ndarray) -> np.ndarray:
    """Optimal dual-transform auxiliaries: alpha_k = gamma_k."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("gamma must be nonnegative")
    return gamma.copy()


def update_beta(
    W: np.ndarray, h: np.ndarray, alpha: np.ndarray, noise_power: float
) -> np.ndarray:
    """beta_k = sqrt(1 + alpha_k) h_k^H w_k / (sum_i |h_k^H w_i|^2 + sigma_0^2)."""
    g = cross_gains(W, h)
    denom = (np.abs(g) ** 2).sum(axis=1) + noise_power
    return np.sqrt(1.0 + alpha) * np.diag(g) / denom


def _power_profile(s: np.ndarray, g2: np.ndarray, lam: float, s_tol: float) -> float:
    """sum_k c_k ||(A + lam I)^{-1} h_k||^2 in the eigenbasis of A.

    ``g2[m, k]`` already carries the weight c_k = (1 + alpha_k) |beta_k|^2.
    At lam = 0 the pseudo-inverse convention drops eigendirections with
    s_m <= s_tol (the right-hand sides have no component there).
    """
    if lam == 0.0:
        live = s > s_tol
        if not np.any(live):
            return 0.0
        return float((g2[live] / (s[live, None] ** 2)).sum())
    return float((g2 / ((s[:, None] + lam) ** 2)).sum())


def update_w(
    beta: np.ndarray, alpha: np.ndarray, h: np.ndarray, p_t: float
) -> tuple[np.ndarray, float]:
    """Beamforming update with the dual variable of the power constraint.

    w_k = sqrt(1 + alpha_k) beta_k (sum_i |beta_i|^2 h_i h_i^H + lam I)^{-1} h_k,
    lam the smallest nonnegative value with sum ||w_k||^2 <= P_T.  If the
    unconstrained solution already fits, lam = 0 (minimum-norm solve when
    the Gram matrix is singular); otherwise lam is found by bisection on
    the strictly decreasing power profile, to relative accuracy 1e-8.
    """
    if not p_t > 0:
        raise ValueError("p_t must be > 0")
    K, M = h.shape[0], h.shape[1]
    at = np.sqrt(1.0 + alpha)
    absb2 = np.abs(beta) ** 2
    if np.all(absb2 * at == 0.0):
        return np.zeros((M, K), dtype=complex), 0.0

    A = (h.T * absb2) @ h.conj()  # sum_i |beta_i|^2 h_i h_i^H, (M, M)
    s, Q = np.linalg.eigh(A)
    s = np.maximum(s, 0.0)
    s_tol = s.max(initial=0.0) * M * np.finfo(float).eps
    qh = Q.conj().T @ h.T  # (M, K): column k is Q^H h_k
    c = (1.0 + alpha) * absb2
    g2 = c[np.newaxis, :] * np.abs(qh) ** 2  # (M, K)

    lam = 0.0
    if _power_profile(s, g2, 0.0, s_tol) > p_t:
        hi = float(np.max(absb2 * (np.abs(h) ** 2).sum(axis=1)) * np.sqrt(K / p_t))
        if not hi > 0.0:
            hi = 1.0
        while _power_profile(s, g2, hi, s_tol) >= p_t:
            hi *= 2.0
        lo = 0.0
        lam = hi
        for _ in range(_BISECT_MAX_ITERS):
            mid = 0.5 * (lo + hi)
            p_mid = _power_profile(s, g2, mid, s_tol)
            if abs(p_mid - p_t) <= POWER_REL_TOL * p_t:
                lam = mid
                break
            if p_mid > p_t:
                lo = mid
            else:
                hi = mid
                lam = mid

    if lam == 0.0:
        live = s > s_tol
        coef = np.zeros_like(qh)
        coef[live] = qh[live] / s[live, None]
    else:
        coef = qh / (s[:, None] + lam)
    W = Q @ coef * (at * beta)[np.newaxis, :]
    return W, lam


def b_tensor(H: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Coupling vectors b[k, i] = H_k^H w_i, shape (K, K, N)."""
    # (K, N, M) @ (M, K) -> (K, N, K) -> transpose to (K, K, N)
    return np.transpose(np.conj(np.transpose(H, (0, 2, 1))) @ W, (0, 2, 1))


def _phase_gains(phi: np.ndarray, b: np.ndarray) -> np.ndarray:
    """z[k, i] = phi^H b[k, i] (equals h_k^H w_i when b comes from W, phi)."""
    return b @ phi.conj()


def eval_f3(phi: np.ndarray, b: np.ndarray, alpha: np.ndarray, noise_power: float) -> float:
    """Reflection objective sum_k (1+alpha_k) |phi^H b_kk|^2 / (sum_i |phi^H b_ik|^2 + sigma_0^2)."""
    z = _phase_gains(phi, b)
    denom = (np.abs(z) ** 2).sum(axis=1) + noise_power
    num = (1.0 + alpha) * np.abs(np.diagonal(z)) ** 2
    return float((num / denom).sum())


def update_epsilon(
    phi: np.ndarray, b: np.ndarray, alpha: np.ndarray, noise_power: float
) -> np.ndarray:
    """eps_k = sqrt(1 + alpha_k) phi^H b_kk / (sum_i |phi^H b_ik|^2 + sigma_0^2)."""
    z = _phase_gains(phi, b)
    denom = (np.abs(z) ** 2).sum(axis=1) + noise_power
    return np.sqrt(1.0 + alpha) * np.diagonal(z) / denom


def compute_UV(
    epsilon: np.ndarray, alpha: np.ndarray, b: np.ndarray, noise_power: float
) -> tuple[np.ndarray, np.ndarray, float]:
    """Quadratic form of the reflection surrogate: f3b = -phi^H U phi + 2 Re(phi^H V) - C.

    U = sum_k |eps_k|^2 sum_i b_ik b_ik^H (Hermitian PSD), V = sum_k
    sqrt(1+alpha_k) eps_k^* b_kk, C = sigma_0^2 sum_k |eps_k|^2.
    """
    K, _, N = b.shape
    d = np.abs(epsilon) ** 2
    cols = b.reshape(K * K, N)
    weights = np.repeat(d, K)
    U = (cols.T * weights) @ cols.conj()
    V = (np.sqrt(1.0 + alpha) * epsilon.conj()) @ b[np.arange(K), np.arange(K)]
    C = float(d.sum()) * noise_power
    return U, V, C


def eval_f3a(
    phi: np.ndarray,
    epsilon: np.ndarray,
    b: np.ndarray,
    alpha: np.ndarray,
    noise_power: float,
) -> float:
    """Quadratic-transform surrogate of the reflection subproblem."""
    z = _phase_gains(phi, b)
    at = np.sqrt(1.0 + alpha)
    lin = 2.0 * np.real(at * epsilon.conj() * np.diagonal(z)).sum()
    quad = (np.abs(epsilon) ** 2 * ((np.abs(z) ** 2).sum(axis=1) + noise_power)).sum()
    return float(lin - quad)


def eval_f3b(phi: np.ndarray, U: np.ndarray, V: np.ndarray, C: float) -> float:
    """-phi^H U phi + 2 Re(phi^H V) - C."""
    return float(-np.real(phi.conj() @ U @ phi) + 2.0 * np.real(phi.conj() @ V) - C)


def update_phi_sweep(
    phi: np.ndarray, U: np.ndarray, V: np.ndarray, tie_tol: float = PHASE_TIE_TOL
) -> np.ndarray:
    """One Gauss-Seidel sweep of the per-element phase updates.

    For n = 1..N: B2 = v_n - sum_{q != n} u_{nq} phi_q (already-updated
    entries feed later ones), then phi_n <- B2 / |B2|.  When |B2| <=
    tie_tol the objective is locally flat in phi_n and the previous value
    is kept.  Each elementary step never decreases the quadratic
    surrogate; the updated copy is returned.
    """
    phi = phi.copy()
    n_elems = phi.shape[0]
    for n in range(n_elems):
        b2 = V[n] - (U[n] @ phi - U[n, n] * phi[n])
        mag = abs(b2)
        if mag > tie_tol:
            phi[n] = b2 / mag
    return phi
