"""Shared helpers: random instances and complex finite differences."""

import numpy as np
import pytest


def rand_phases(rng, n):
    return np.exp(2j * np.pi * rng.random(n))


def rand_complex(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def rand_cascaded(rng, num_users, num_bs, num_elems, scale=1.0):
    """Synthetic (K, M, N) channel stack at O(scale) magnitudes."""
    return rand_complex(rng, (num_users, num_bs, num_elems), scale)


def wirtinger_fd(fun, x, delta):
    """Central-difference gradient d/dRe + j d/dIm of a real function.

    Exact (up to roundoff) for functions quadratic in x; both parts vanish
    at a stationary point.
    """
    x = np.asarray(x)
    g = np.zeros(x.shape, dtype=complex)
    for idx in np.ndindex(*x.shape):
        for unit in (1.0, 1j):
            step = np.zeros(x.shape, dtype=complex)
            step[idx] = delta * unit
            diff = (fun(x + step) - fun(x - step)) / (2.0 * delta)
            g[idx] += diff if unit == 1.0 else 1j * diff
    return g


def rel_grad_norm(grad, x, f_value):
    """Dimensionless stationarity measure ||g|| ||x|| / |f|."""
    return float(
        np.linalg.norm(grad) * max(np.linalg.norm(x), 1e-300) / max(abs(f_value), 1e-300)
    )


def angle_dist(a, b):
    """Absolute angular distance mod 2 pi."""
    d = np.angle(np.exp(1j * (np.asarray(a) - np.asarray(b))))
    return np.abs(d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
