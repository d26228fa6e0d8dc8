"""Pure-numpy backend for the per-iteration hot path.

Functionally identical to the compiled backend but assembled from the
block-update functions in :mod:`risfp.ops`; roughly an order of magnitude
slower per iteration at small sizes because of interpreter overhead.
"""

from __future__ import annotations

import numpy as np

from .. import ops

BACKEND_NAME = "python"


def make_workspace(num_users: int, num_bs_antennas: int, num_ris_elements: int) -> dict:
    """Scratch state; this backend only uses it to hand back auxiliaries."""
    return {"dims": (num_users, num_bs_antennas, num_ris_elements)}


def final_auxiliaries(ws: dict) -> dict:
    """alpha/beta/epsilon/gamma/lam of the most recent iteration."""
    return {
        "alpha": ws["alpha"].copy(),
        "beta": ws["beta"].copy(),
        "epsilon": ws["epsilon"].copy(),
        "gamma": ws["gamma"].copy(),
        "lam": ws["lam"],
    }


def sweep_lowrank(
    phi: np.ndarray,
    cols: np.ndarray,
    weights: np.ndarray,
    v: np.ndarray,
    n_sweeps: int = 1,
    tie_tol: float = ops.PHASE_TIE_TOL,
) -> np.ndarray:
    """Gauss-Seidel phase sweep against U = cols diag(weights) cols^H.

    ``cols`` is (N, J); running coupling sums y_j = cols[:, j]^H phi are
    maintained incrementally so one full sweep costs O(N J) instead of
    the O(N^2) of the dense update.
    """
    n_elems, n_cols = cols.shape
    phi_l = phi.tolist()
    v_l = v.tolist()
    w_l = [float(w) for w in weights]
    cols_l = cols.tolist()
    y_l = (cols.conj().T @ phi).tolist()
    rng_j = range(n_cols)
    for _ in range(n_sweeps):
        for n in range(n_elems):
            row = cols_l[n]
            acc = 0j
            diag = 0.0
            for j in rng_j:
                cnj = row[j]
                acc += w_l[j] * cnj * y_l[j]
                diag += w_l[j] * (cnj.real * cnj.real + cnj.imag * cnj.imag)
            b2 = v_l[n] - acc + diag * phi_l[n]
            mag = abs(b2)
            if mag > tie_tol:
                new = b2 / mag
                delta = new - phi_l[n]
                phi_l[n] = new
                for j in rng_j:
                    y_l[j] += row[j].conjugate() * delta
    return np.asarray(phi_l, dtype=complex)


def fp_iteration(
    ws: dict,
    H: np.ndarray,
    phi: np.ndarray,
    W: np.ndarray,
    p_t: float,
    noise_power: float,
    n_sweeps: int = 1,
    record: list | None = None,
) -> tuple[float, float, float, float, bool, float]:
    """One full block-coordinate iteration, updating phi and W in place.

    Returns (f1, f1a, f3_old, f3_new, accepted, lam): the post-iteration
    sum rate, the surrogate value at this iteration's alpha, the phase
    guard objectives before/after the sweep with the acceptance flag, and
    the dual variable of the power constraint.
    """
    K = H.shape[0]
    h = ops.effective_channels(H, phi)
    gamma = ops.sinr_per_user(W, h, noise_power)
    alpha = ops.update_alpha(gamma)
    beta = ops.update_beta(W, h, alpha, noise_power)
    W_new, lam = ops.update_w(beta, alpha, h, p_t)
    W[...] = W_new

    b = ops.b_tensor(H, W)
    eps = ops.update_epsilon(phi, b, alpha, noise_power)
    f3_old = ops.eval_f3(phi, b, alpha, noise_power)

    d = np.abs(eps) ** 2
    cols = np.ascontiguousarray(b.reshape(K * K, -1).T)  # (N, K^2)
    weights = np.repeat(d, K)
    v = (np.sqrt(1.0 + alpha) * eps.conj()) @ b[np.arange(K), np.arange(K)]
    phi_cand = sweep_lowrank(phi, cols, weights, v, n_sweeps=n_sweeps)
    f3_new = ops.eval_f3(phi_cand, b, alpha, noise_power)
    accepted = bool(f3_new >= f3_old)
    if accepted:
        phi[...] = phi_cand

    h_post = ops.effective_channels(H, phi)
    gamma_post = ops.sinr_per_user(W, h_post, noise_power)
    f1 = float(np.log1p(gamma_post).sum())
    f1a = float(
        np.log1p(alpha).sum()
        - alpha.sum()
        + ((1.0 + alpha) * gamma_post / (1.0 + gamma_post)).sum()
    )

    ws["alpha"] = alpha
    ws["beta"] = beta
    ws["epsilon"] = eps
    ws["gamma"] = gamma_post
    ws["lam"] = float(lam)
    if record is not None:
        record.append(
            {
                "f1": f1,
                "f1a": f1a,
                "f3_old": f3_old,
                "f3_new": f3_new,
                "accepted": accepted,
                "lam": float(lam),
                "alpha": alpha,
                "beta": beta,
                "epsilon": eps,
                "gamma": gamma_post,
                "h": h,
                "b": b,
                "phi_candidate": phi_cand,
                "phi": phi.copy(),
                "W": W.copy(),
            }
        )
    return f1, f1a, f3_old, f3_new, accepted, float(lam)
