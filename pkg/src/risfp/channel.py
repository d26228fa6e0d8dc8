"""Geometry-dependent Rician channel synthesis for a RIS-aided downlink.

One base station with a uniform linear array (ULA) of M antennas serves K
single-antenna users through an N-element reflecting surface; the direct
BS-user links are assumed blocked.  The RIS-BS matrix G and the per-user
RIS-user vectors h_{r,k} are drawn from a Rician mixture of a ULA
line-of-sight outer product and an i.i.d. CN(0, 1) scattered part, scaled
by the amplitude (square-root) of a log-distance pathloss law.  The
per-user cascaded matrices H_k = G diag(h_{r,k}) are what the optimizer
and the estimator actually consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "SystemConfig",
    "ChannelSet",
    "ula_response",
    "pathloss_db",
    "pathloss_amplitude",
    "draw_user_positions",
    "draw_channels",
]


@dataclass
class SystemConfig:
    """Static description of one simulated system.

    Powers are linear watts, Rician factors linear ratios, positions in
    meters.  ``user_positions`` may be left ``None``, in which case users
    are placed uniformly at random in a disk of ``user_disk_radius``
    around ``user_disk_center`` on every channel draw.
    """

    num_bs_antennas: int = 4
    num_ris_elements: int = 36
    num_users: int = 3
    transmit_power: float = 10.0          # P_T [W]
    noise_power: float = 1e-12            # sigma_0^2 [W], -90 dBm
    rician_factor_G: float = 10.0         # linear
    rician_factor_h: float | tuple[float, ...] = 10.0   # linear, scalar or per user
    pathloss_intercept_db: float = 35.6
    pathloss_slope_db: float = 22.0       # dB per decade
    bs_position: tuple[float, float] = (0.0, 0.0)
    ris_position: tuple[float, float] = (200.0, 0.0)
    user_positions: tuple[tuple[float, float], ...] | None = None
    user_disk_center: tuple[float, float] = (200.0, 50.0)
    user_disk_radius: float = 30.0
    element_spacing_ratio: float = 0.5    # d / lambda
    rng_seed: int = 0

    # short aliases, the math below reads like the formulas
    @property
    def M(self) -> int:
        return self.num_bs_antennas

    @property
    def N(self) -> int:
        return self.num_ris_elements

    @property
    def K(self) -> int:
        return self.num_users

    def rician_factors_h(self) -> np.ndarray:
        """Per-user RIS-user Rician factors as a length-K array."""
        f = self.rician_factor_h
        if np.isscalar(f):
            return np.full(self.K, float(f))
        arr = np.asarray(f, dtype=float)
        if arr.shape != (self.K,):
            raise ValueError(
                f"rician_factor_h must be scalar or length K={self.K}, got shape {arr.shape}"
            )
        return arr

    def validate(self) -> None:
        if self.num_bs_antennas < 1:
            raise ValueError("num_bs_antennas must be >= 1")
        if self.num_ris_elements < 1:
            raise ValueError("num_ris_elements must be >= 1")
        if self.num_users < 1:
            raise ValueError("num_users must be >= 1")
        if not self.transmit_power > 0:
            raise ValueError("transmit_power must be > 0")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be > 0")
        if self.rician_factor_G < 0:
            raise ValueError("rician_factor_G must be >= 0")
        if np.any(self.rician_factors_h() < 0):
            raise ValueError("rician_factor_h must be >= 0")
        if not self.element_spacing_ratio > 0:
            raise ValueError("element_spacing_ratio must be > 0")
        if self.user_positions is not None and len(self.user_positions) != self.K:
            raise ValueError(
                f"user_positions must have exactly K={self.K} entries, "
                f"got {len(self.user_positions)}"
            )

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


@dataclass
class ChannelSet:
    """One channel realization.

    G is the M x N RIS-BS matrix (BS-side view; G^H maps the BS signal to
    the RIS aperture), h_r[k] the length-N RIS-user vector of user k, and
    cascaded[k] = G diag(h_r[k]) the M x N cascaded matrix.
    """

    G: np.ndarray
    h_r: list[np.ndarray] = field(repr=False)
    cascaded: list[np.ndarray] = field(repr=False)

    @property
    def num_users(self) -> int:
        return len(self.h_r)

    def stacked_cascaded(self) -> np.ndarray:
        """Cascaded matrices as one contiguous (K, M, N) array."""
        return np.ascontiguousarray(np.stack(self.cascaded))

    def validate(self, rtol: float = 1e-12) -> None:
        if not np.all(np.isfinite(self.G)):
            raise ValueError("G contains non-finite entries")
        for k, (h, H) in enumerate(zip(self.h_r, self.cascaded)):
            if not (np.all(np.isfinite(h)) and np.all(np.isfinite(H))):
                raise ValueError(f"channel of user {k} contains non-finite entries")
            ref = self.G * h[np.newaxis, :]
            err = np.linalg.norm(H - ref)
            if err > rtol * max(np.linalg.norm(ref), 1e-300):
                raise ValueError(f"cascaded[{k}] inconsistent with G diag(h_r[{k}])")


def ula_response(num_elems: int, angle: float, spacing_ratio: float = 0.5) -> np.ndarray:
    """Array response of a ULA: element m is exp(j 2 pi (d/lambda) m sin(angle)).

    The first element is exactly 1.
    """
    if num_elems < 1:
        raise ValueError("num_elems must be >= 1")
    m = np.arange(num_elems)
    return np.exp(2j * np.pi * spacing_ratio * math.sin(angle) * m)


def pathloss_db(distance: float, intercept_db: float = 35.6, slope_db: float = 22.0) -> float:
    """Log-distance pathloss, default 35.6 + 22 log10(d) dB."""
    if not distance > 0:
        raise ValueError(f"distance must be > 0, got {distance}")
    return intercept_db + slope_db * math.log10(distance)


def pathloss_amplitude(distance: float, intercept_db: float = 35.6, slope_db: float = 22.0) -> float:
    """Amplitude factor 10^(-PL_dB / 20) applied to the normalized fading term."""
    return 10.0 ** (-pathloss_db(distance, intercept_db, slope_db) / 20.0)


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1): two independent N(0, 1/2) draws for real/imag."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / math.sqrt(2.0)


def draw_user_positions(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Uniform positions in the configured disk, shape (K, 2)."""
    r = cfg.user_disk_radius * np.sqrt(rng.random(cfg.K))
    theta = 2.0 * np.pi * rng.random(cfg.K)
    cx, cy = cfg.user_disk_center
    return np.column_stack((cx + r * np.cos(theta), cy + r * np.sin(theta)))


def draw_channels(cfg: SystemConfig, rng: np.random.Generator | None = None) -> ChannelSet:
    """Draw one Rician realization of (G, {h_r,k}) and build the cascaded matrices.

    G^H = d_G (sqrt(F_G/(F_G+1)) a_N^H(eta) a_M(rho) + sqrt(1/(F_G+1)) Gtilde^H)
    with Gtilde^H i.i.d. CN(0, 1); h_{r,k}^H analogous with LoS a_N(iota_k).
    The angular parameters eta, rho, iota_k are uniform on [0, 2 pi) per
    realization.  Deterministic for a fixed rng state.
    """
    cfg.validate()
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)

    M, N, K = cfg.M, cfg.N, cfg.K
    spacing = cfg.element_spacing_ratio

    if cfg.user_positions is None:
        users = draw_user_positions(cfg, rng)
    else:
        users = np.asarray(cfg.user_positions, dtype=float)

    bs = np.asarray(cfg.bs_position, dtype=float)
    ris = np.asarray(cfg.ris_position, dtype=float)
    d_g = pathloss_amplitude(
        float(np.linalg.norm(ris - bs)), cfg.pathloss_intercept_db, cfg.pathloss_slope_db
    )

    eta = 2.0 * np.pi * rng.random()
    rho = 2.0 * np.pi * rng.random()
    iota = 2.0 * np.pi * rng.random(K)

    f_g = cfg.rician_factor_G
    los_g = math.sqrt(f_g / (f_g + 1.0))
    nlos_g = math.sqrt(1.0 / (f_g + 1.0))
    # LoS outer product a_N^H(eta) a_M(rho) is N x M
    g_bar_h = np.outer(ula_response(N, eta, spacing).conj(), ula_response(M, rho, spacing))
    g_h = d_g * (los_g * g_bar_h + nlos_g * _complex_normal(rng, (N, M)))
    G = g_h.conj().T  # (M, N)

    f_h = cfg.rician_factors_h()
    h_r: list[np.ndarray] = []
    cascaded: list[np.ndarray] = []
    for k in range(K):
        d_rk = pathloss_amplitude(
            float(np.linalg.norm(users[k] - ris)),
            cfg.pathloss_intercept_db,
            cfg.pathloss_slope_db,
        )
        los = math.sqrt(f_h[k] / (f_h[k] + 1.0))
        nlos = math.sqrt(1.0 / (f_h[k] + 1.0))
        h_row = d_rk * (los * ula_response(N, iota[k], spacing) + nlos * _complex_normal(rng, N))
        h = h_row.conj()  # column-sense vector; h_row is h_{r,k}^H
        h_r.append(h)
        cascaded.append(G * h[np.newaxis, :])

    return ChannelSet(G=G, h_r=h_r, cascaded=cascaded)
