# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled backend for the per-iteration hot path.

Mirrors :mod:`risfp.core._fp_py` operation for operation; the dual
bisection of the beamforming step runs in the eigenbasis of the channel
Gram matrix, diagonalized by a complex Jacobi sweep so no LAPACK call
sits on the per-iteration path.
"""

import numpy as np

from libc.math cimport fabs, hypot, log1p, sqrt

BACKEND_NAME = "cython"

ctypedef double complex zdbl

cdef double PHASE_TIE_TOL = 1e-14
cdef double POWER_REL_TOL = 1e-8
cdef double EPS = 2.220446049250313e-16
cdef int BISECT_MAX_ITERS = 100


cdef class Workspace:
    """Preallocated scratch arrays for one problem size (K, M, N)."""
    cdef public int K, M, N
    cdef zdbl[:, ::1] h, g, A, Q, qh, z, y
    cdef zdbl[:, :, ::1] b
    cdef zdbl[::1] v, phi_cand, beta, eps
    cdef double[:, ::1] g2
    cdef double[::1] gamma, alpha, hnorm2, s
    cdef public double lam

    def __init__(self, int num_users, int num_bs_antennas, int num_ris_elements):
        cdef int k = num_users, m = num_bs_antennas, n = num_ris_elements
        self.K, self.M, self.N = k, m, n
        self.h = np.empty((k, m), dtype=complex)
        self.g = np.empty((k, k), dtype=complex)
        self.A = np.empty((m, m), dtype=complex)
        self.Q = np.empty((m, m), dtype=complex)
        self.qh = np.empty((m, k), dtype=complex)
        self.z = np.empty((k, k), dtype=complex)
        self.y = np.empty((k, k), dtype=complex)
        self.b = np.empty((k, k, n), dtype=complex)
        self.v = np.empty(n, dtype=complex)
        self.phi_cand = np.empty(n, dtype=complex)
        self.beta = np.empty(k, dtype=complex)
        self.eps = np.empty(k, dtype=complex)
        self.g2 = np.empty((m, k), dtype=float)
        self.gamma = np.empty(k, dtype=float)
        self.alpha = np.empty(k, dtype=float)
        self.hnorm2 = np.empty(k, dtype=float)
        self.s = np.empty(m, dtype=float)
        self.lam = 0.0


def make_workspace(int num_users, int num_bs_antennas, int num_ris_elements):
    return Workspace(num_users, num_bs_antennas, num_ris_elements)


def final_auxiliaries(Workspace ws):
    """alpha/beta/epsilon/gamma/lam of the most recent iteration."""
    return {
        "alpha": np.asarray(ws.alpha).copy(),
        "beta": np.asarray(ws.beta).copy(),
        "epsilon": np.asarray(ws.eps).copy(),
        "gamma": np.asarray(ws.gamma).copy(),
        "lam": ws.lam,
    }


cdef void _jacobi_eigh(zdbl[:, ::1] A, zdbl[:, ::1] Q, double[::1] s, int m) noexcept:
    """Eigendecomposition of Hermitian A (contents destroyed): A = Q diag(s) Q^H."""
    cdef int p, q, r, sweep
    cdef double app, aqq, absapq, tau, t, cth, sth, offmax, diagmax, mag
    cdef zdbl apq, ph, tp, tq
    for p in range(m):
        for q in range(m):
            Q[p, q] = 1.0 if p == q else 0.0
    if m == 1:
        s[0] = A[0, 0].real
        return
    for sweep in range(60):
        offmax = 0.0
        diagmax = 0.0
        for p in range(m):
            mag = fabs(A[p, p].real)
            if mag > diagmax:
                diagmax = mag
            for q in range(p + 1, m):
                mag = hypot(A[p, q].real, A[p, q].imag)
                if mag > offmax:
                    offmax = mag
        if offmax <= 1e-15 * diagmax + 1e-300:
            break
        for p in range(m):
            for q in range(p + 1, m):
                apq = A[p, q]
                absapq = hypot(apq.real, apq.imag)
                if absapq <= 1e-18 * diagmax + 1e-300:
                    continue
                app = A[p, p].real
                aqq = A[q, q].real
                tau = (aqq - app) / (2.0 * absapq)
                if tau >= 0.0:
                    t = 1.0 / (tau + sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + sqrt(1.0 + tau * tau))
                cth = 1.0 / sqrt(1.0 + t * t)
                sth = t * cth
                ph = apq / absapq
                # A <- G^H A G with G = [[c, s ph], [-s conj(ph), c]] on (p, q)
                for r in range(m):
                    tp = A[r, p]
                    tq = A[r, q]
                    A[r, p] = cth * tp - sth * ph.conjugate() * tq
                    A[r, q] = sth * ph * tp + cth * tq
                for r in range(m):
                    tp = A[p, r]
                    tq = A[q, r]
                    A[p, r] = cth * tp - sth * ph * tq
                    A[q, r] = sth * ph.conjugate() * tp + cth * tq
                for r in range(m):
                    tp = Q[r, p]
                    tq = Q[r, q]
                    Q[r, p] = cth * tp - sth * ph.conjugate() * tq
                    Q[r, q] = sth * ph * tp + cth * tq
    for p in range(m):
        s[p] = A[p, p].real


cdef double _power_profile(double[::1] s, double[:, ::1] g2, double lam,
                           double s_tol, int m, int k) noexcept:
    cdef int i, j
    cdef double acc = 0.0, d
    if lam == 0.0:
        for i in range(m):
            if s[i] > s_tol:
                d = s[i] * s[i]
                for j in range(k):
                    acc += g2[i, j] / d
    else:
        for i in range(m):
            d = (s[i] + lam) * (s[i] + lam)
            for j in range(k):
                acc += g2[i, j] / d
    return acc


def sweep_lowrank(zdbl[::1] phi, zdbl[:, ::1] cols, double[::1] weights,
                  zdbl[::1] v, int n_sweeps=1, double tie_tol=PHASE_TIE_TOL):
    """Gauss-Seidel phase sweep against U = cols diag(weights) cols^H; O(N J)."""
    cdef int n_elems = cols.shape[0]
    cdef int n_cols = cols.shape[1]
    out_arr = np.empty(n_elems, dtype=complex)
    y_arr = np.empty(n_cols, dtype=complex)
    cdef zdbl[::1] out = out_arr
    cdef zdbl[::1] y = y_arr
    cdef int n, j, it
    cdef zdbl acc, b2, new, delta, cnj
    cdef double diag, mag
    for n in range(n_elems):
        out[n] = phi[n]
    for j in range(n_cols):
        acc = 0
        for n in range(n_elems):
            acc = acc + cols[n, j].conjugate() * out[n]
        y[j] = acc
    for it in range(n_sweeps):
        for n in range(n_elems):
            acc = 0
            diag = 0.0
            for j in range(n_cols):
                cnj = cols[n, j]
                acc = acc + weights[j] * cnj * y[j]
                diag += weights[j] * (cnj.real * cnj.real + cnj.imag * cnj.imag)
            b2 = v[n] - acc + diag * out[n]
            mag = hypot(b2.real, b2.imag)
            if mag > tie_tol:
                new = b2 / mag
                delta = new - out[n]
                out[n] = new
                for j in range(n_cols):
                    y[j] = y[j] + cols[n, j].conjugate() * delta
    return out_arr


def fp_iteration(Workspace ws, zdbl[:, :, ::1] H, zdbl[::1] phi, zdbl[:, ::1] W,
                 double p_t, double noise_power, int n_sweeps=1, record=None):
    """One full block-coordinate iteration, updating phi and W in place.

    Returns (f1, f1a, f3_old, f3_new, accepted, lam); semantics identical
    to the pure-python backend.
    """
    if record is not None:
        raise ValueError("recording internals requires the python backend")
    cdef int K = H.shape[0]
    cdef int M = H.shape[1]
    cdef int N = H.shape[2]
    if ws.K != K or ws.M != M or ws.N != N:
        raise ValueError("workspace dimensions do not match the channel stack")
    if phi.shape[0] != N or W.shape[0] != M or W.shape[1] != K:
        raise ValueError("phi/W shapes do not match the channel stack")

    cdef int k, i, m, n, r, it
    cdef zdbl acc, w_mi, b2, new, delta, cnj, phn
    cdef double tot, sig, p2, at_k, s_max, s_tol, c_k, hi, lo, mid, pm, lam
    cdef double f3_old, f3_new, f1, f1a, denom, diag, mag, gpost
    cdef bint all_zero, accepted

    # effective channels h[k, m] = sum_n H[k, m, n] phi[n]
    for k in range(K):
        for m in range(M):
            acc = 0
            for n in range(N):
                acc = acc + H[k, m, n] * phi[n]
            ws.h[k, m] = acc

    # cross gains, SINR, alpha, beta
    for k in range(K):
        for i in range(K):
            acc = 0
            for m in range(M):
                acc = acc + ws.h[k, m].conjugate() * W[m, i]
            ws.g[k, i] = acc
    for k in range(K):
        tot = noise_power
        sig = 0.0
        for i in range(K):
            p2 = ws.g[k, i].real * ws.g[k, i].real + ws.g[k, i].imag * ws.g[k, i].imag
            tot += p2
            if i == k:
                sig = p2
        ws.gamma[k] = sig / (tot - sig)
        ws.alpha[k] = ws.gamma[k]
        at_k = sqrt(1.0 + ws.alpha[k])
        ws.beta[k] = at_k * ws.g[k, k] / tot
        tot = 0.0
        for m in range(M):
            tot += ws.h[k, m].real * ws.h[k, m].real + ws.h[k, m].imag * ws.h[k, m].imag
        ws.hnorm2[k] = tot

    # beamforming update in the eigenbasis of A = sum_i |beta_i|^2 h_i h_i^H
    all_zero = True
    for k in range(K):
        p2 = ws.beta[k].real * ws.beta[k].real + ws.beta[k].imag * ws.beta[k].imag
        if p2 * (1.0 + ws.alpha[k]) != 0.0:
            all_zero = False
    lam = 0.0
    if all_zero:
        for m in range(M):
            for k in range(K):
                W[m, k] = 0
    else:
        for m in range(M):
            for r in range(M):
                acc = 0
                for i in range(K):
                    p2 = ws.beta[i].real * ws.beta[i].real + ws.beta[i].imag * ws.beta[i].imag
                    acc = acc + p2 * ws.h[i, m] * ws.h[i, r].conjugate()
                ws.A[m, r] = acc
        _jacobi_eigh(ws.A, ws.Q, ws.s, M)
        s_max = 0.0
        for m in range(M):
            if ws.s[m] < 0.0:
                ws.s[m] = 0.0
            if ws.s[m] > s_max:
                s_max = ws.s[m]
        s_tol = s_max * M * EPS
        for m in range(M):
            for k in range(K):
                acc = 0
                for r in range(M):
                    acc = acc + ws.Q[r, m].conjugate() * ws.h[k, r]
                ws.qh[m, k] = acc
                c_k = (1.0 + ws.alpha[k]) * (
                    ws.beta[k].real * ws.beta[k].real + ws.beta[k].imag * ws.beta[k].imag
                )
                ws.g2[m, k] = c_k * (acc.real * acc.real + acc.imag * acc.imag)

        if _power_profile(ws.s, ws.g2, 0.0, s_tol, M, K) > p_t:
            hi = 0.0
            for i in range(K):
                p2 = ws.beta[i].real * ws.beta[i].real + ws.beta[i].imag * ws.beta[i].imag
                pm = p2 * ws.hnorm2[i]
                if pm > hi:
                    hi = pm
            hi = hi * sqrt(K / p_t)
            if not hi > 0.0:
                hi = 1.0
            while _power_profile(ws.s, ws.g2, hi, s_tol, M, K) >= p_t:
                hi *= 2.0
            lo = 0.0
            lam = hi
            for it in range(BISECT_MAX_ITERS):
                mid = 0.5 * (lo + hi)
                pm = _power_profile(ws.s, ws.g2, mid, s_tol, M, K)
                if fabs(pm - p_t) <= POWER_REL_TOL * p_t:
                    lam = mid
                    break
                if pm > p_t:
                    lo = mid
                else:
                    hi = mid
                    lam = mid

        # coefficients (Q^H h_k) / (s + lam), pseudo-inverse style at lam = 0
        for m in range(M):
            for k in range(K):
                if lam == 0.0:
                    if ws.s[m] > s_tol:
                        ws.qh[m, k] = ws.qh[m, k] / ws.s[m]
                    else:
                        ws.qh[m, k] = 0
                else:
                    ws.qh[m, k] = ws.qh[m, k] / (ws.s[m] + lam)
        for m in range(M):
            for k in range(K):
                acc = 0
                for r in range(M):
                    acc = acc + ws.Q[m, r] * ws.qh[r, k]
                at_k = sqrt(1.0 + ws.alpha[k])
                W[m, k] = at_k * ws.beta[k] * acc
    ws.lam = lam

    # coupling vectors b[k, i, n] = sum_m conj(H[k, m, n]) W[m, i]
    for k in range(K):
        for i in range(K):
            for n in range(N):
                ws.b[k, i, n] = 0
        for m in range(M):
            for i in range(K):
                w_mi = W[m, i]
                for n in range(N):
                    ws.b[k, i, n] = ws.b[k, i, n] + H[k, m, n].conjugate() * w_mi

    # epsilon and the pre-sweep guard objective
    f3_old = 0.0
    for k in range(K):
        denom = noise_power
        for i in range(K):
            acc = 0
            for n in range(N):
                acc = acc + ws.b[k, i, n] * phi[n].conjugate()
            ws.z[k, i] = acc
            denom += acc.real * acc.real + acc.imag * acc.imag
        at_k = sqrt(1.0 + ws.alpha[k])
        ws.eps[k] = at_k * ws.z[k, k] / denom
        f3_old += (1.0 + ws.alpha[k]) * (
            ws.z[k, k].real * ws.z[k, k].real + ws.z[k, k].imag * ws.z[k, k].imag
        ) / denom

    # linear term V and the Gauss-Seidel sweep on a candidate copy
    for n in range(N):
        acc = 0
        for k in range(K):
            at_k = sqrt(1.0 + ws.alpha[k])
            acc = acc + at_k * ws.eps[k].conjugate() * ws.b[k, k, n]
        ws.v[n] = acc
        ws.phi_cand[n] = phi[n]
    # running sums y[k, i] = b[k, i]^H phi_cand (conjugate of the z gains)
    for k in range(K):
        for i in range(K):
            ws.y[k, i] = ws.z[k, i].conjugate()
    for it in range(n_sweeps):
        for n in range(N):
            acc = 0
            diag = 0.0
            for k in range(K):
                c_k = ws.eps[k].real * ws.eps[k].real + ws.eps[k].imag * ws.eps[k].imag
                for i in range(K):
                    cnj = ws.b[k, i, n]
                    acc = acc + c_k * cnj * ws.y[k, i]
                    diag += c_k * (cnj.real * cnj.real + cnj.imag * cnj.imag)
            b2 = ws.v[n] - acc + diag * ws.phi_cand[n]
            mag = hypot(b2.real, b2.imag)
            if mag > PHASE_TIE_TOL:
                new = b2 / mag
                delta = new - ws.phi_cand[n]
                ws.phi_cand[n] = new
                for k in range(K):
                    for i in range(K):
                        ws.y[k, i] = ws.y[k, i] + ws.b[k, i, n].conjugate() * delta

    # guard: accept the candidate only if it does not decrease f3
    f3_new = 0.0
    for k in range(K):
        denom = noise_power
        sig = 0.0
        for i in range(K):
            acc = 0
            for n in range(N):
                acc = acc + ws.b[k, i, n] * ws.phi_cand[n].conjugate()
            p2 = acc.real * acc.real + acc.imag * acc.imag
            denom += p2
            if i == k:
                sig = p2
        f3_new += (1.0 + ws.alpha[k]) * sig / denom
    accepted = f3_new >= f3_old
    if accepted:
        for n in range(N):
            phi[n] = ws.phi_cand[n]

    # post-iteration objectives at the (possibly) new phi and the new W
    for k in range(K):
        for m in range(M):
            acc = 0
            for n in range(N):
                acc = acc + H[k, m, n] * phi[n]
            ws.h[k, m] = acc
    f1 = 0.0
    f1a = 0.0
    for k in range(K):
        tot = noise_power
        sig = 0.0
        for i in range(K):
            acc = 0
            for m in range(M):
                acc = acc + ws.h[k, m].conjugate() * W[m, i]
            p2 = acc.real * acc.real + acc.imag * acc.imag
            tot += p2
            if i == k:
                sig = p2
        gpost = sig / (tot - sig)
        ws.gamma[k] = gpost
        f1 += log1p(gpost)
        f1a += log1p(ws.alpha[k]) - ws.alpha[k] + (1.0 + ws.alpha[k]) * gpost / (1.0 + gpost)

    return f1, f1a, f3_old, f3_new, accepted, lam
