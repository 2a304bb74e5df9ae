"""Network geometry, large-scale fading and imperfect-CSIT channel generation.

The propagation model combines a three-slope distance-dependent path loss
with log-normal shadowing.  Small-scale fading is i.i.d. unit-variance
circularly symmetric Gaussian.  Channel estimates carry a Gaussian error
controlled by a single quality parameter ``sigma_e``: the estimate of a
coefficient with gain ``zeta`` is distributed CN(0, zeta) while the error
component is CN(0, sigma_e^2 * zeta), and the exact reconstruction

    g_hat = sqrt(1 - sigma_e^2) * g_true + g_err

holds entry by entry on every realization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BOLTZMANN_J_PER_K = 1.381e-23


@dataclass(frozen=True)
class NetworkGeometry:
    """AP and user drop inside a square service area (positions in metres)."""

    ap_positions: np.ndarray    # (M, 2)
    user_positions: np.ndarray  # (K, 2)
    area_side: float
    h_ap: float = 15.0
    h_u: float = 1.65
    carrier_freq_mhz: float = 1900.0

    @property
    def n_aps(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def n_users(self) -> int:
        return self.user_positions.shape[0]

    def distances(self) -> np.ndarray:
        """(M, K) horizontal AP-to-user distances in metres."""
        diff = self.ap_positions[:, None, :] - self.user_positions[None, :, :]
        return np.linalg.norm(diff, axis=2)

    def co_located(self) -> "NetworkGeometry":
        """Same users, but all antennas stacked at the area centre.

        Used for the single-site baseline that contrasts with the
        distributed deployment.
        """
        centre = np.full_like(np.asarray(self.ap_positions, dtype=float),
                              self.area_side / 2.0)
        return NetworkGeometry(centre, np.array(self.user_positions, dtype=float),
                               self.area_side, self.h_ap, self.h_u,
                               self.carrier_freq_mhz)


@dataclass(frozen=True)
class LargeScaleCoefficients:
    """Linear-scale power gains plus their dB decomposition."""

    zeta: np.ndarray          # (M, K), zeta = 10**((path_loss_db + shadow_db)/10)
    path_loss_db: np.ndarray  # (M, K)
    shadow_db: np.ndarray     # (M, K)


@dataclass(frozen=True)
class ChannelRealization:
    """True channel, its estimate and the estimation error for one block."""

    g_true: np.ndarray  # (M, K) complex
    g_hat: np.ndarray
    g_err: np.ndarray
    sigma_e: float

    @property
    def epsilon(self) -> float:
        """Scaling 1/sqrt(1 - sigma_e^2) linking true and estimated channels."""
        return 1.0 / math.sqrt(1.0 - self.sigma_e ** 2)


def place_network(m: int, k: int, area_side: float, rng: np.random.Generator,
                  h_ap: float = 15.0, h_u: float = 1.65,
                  carrier_freq_mhz: float = 1900.0) -> NetworkGeometry:
    """Drop M APs and K users i.i.d. uniform over the square.

    Requires the under-loaded regime M > K >= 1.
    """
    if k < 1:
        raise ValueError(f"need at least one user, got K={k}")
    if m <= k:
        raise ValueError(f"under-loaded regime requires M > K, got M={m}, K={k}")
    if area_side <= 0:
        raise ValueError(f"area side must be positive, got {area_side}")
    ap = rng.uniform(0.0, area_side, size=(m, 2))
    ue = rng.uniform(0.0, area_side, size=(k, 2))
    return NetworkGeometry(ap, ue, float(area_side), float(h_ap), float(h_u),
                           float(carrier_freq_mhz))


def attenuation_constant(freq_mhz: float, h_ap: float, h_u: float) -> float:
    """Fixed attenuation (dB) of the three-slope path-loss model (Hata-style)."""
    if freq_mhz <= 0 or h_ap <= 0 or h_u < 0:
        raise ValueError("frequency and AP height must be positive, user height non-negative")
    lf = math.log10(freq_mhz)
    return (46.3 + 33.9 * lf - 13.82 * math.log10(h_ap)
            - (1.1 * lf - 0.7) * h_u + (1.56 * lf - 0.8))


def path_loss(d, attenuation_db: float, d0: float = 10.0, d1: float = 50.0):
    """Three-slope path loss in dB (continuous at both breakpoints).

    35 dB/decade beyond ``d1``, 20 dB/decade between ``d0`` and ``d1``,
    constant below ``d0``.  Accepts scalars or arrays of distances.
    """
    if not 0 < d0 < d1:
        raise ValueError(f"breakpoints must satisfy 0 < d0 < d1, got d0={d0}, d1={d1}")
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distances must be non-negative")
    near = -attenuation_db - 15.0 * np.log10(d1) - 20.0 * math.log10(d0)
    mid = -attenuation_db - 15.0 * np.log10(d1) - 20.0 * np.log10(np.maximum(d, d0))
    far = -attenuation_db - 35.0 * np.log10(np.maximum(d, d0))
    out = np.where(d > d1, far, np.where(d > d0, mid, near))
    return float(out) if out.ndim == 0 else out


def large_scale(geometry: NetworkGeometry, sigma_shadow_db: float,
                rng: np.random.Generator, d0: float = 10.0, d1: float = 50.0,
                per_user_shadow: bool = False) -> LargeScaleCoefficients:
    """Path loss plus log-normal shadowing, returned as linear power gains.

    ``per_user_shadow`` draws one shadowing value per user shared by all
    antennas, the physical model for co-located arrays; by default each
    AP-user link shadows independently.
    """
    if sigma_shadow_db < 0:
        raise ValueError("shadowing standard deviation must be non-negative")
    att = attenuation_constant(geometry.carrier_freq_mhz, geometry.h_ap, geometry.h_u)
    pl_db = path_loss(geometry.distances(), att, d0, d1)
    if per_user_shadow:
        shadow_db = np.broadcast_to(
            sigma_shadow_db * rng.standard_normal(size=(1, pl_db.shape[1])),
            pl_db.shape).copy()
    else:
        shadow_db = sigma_shadow_db * rng.standard_normal(size=pl_db.shape)
    zeta = 10.0 ** ((pl_db + shadow_db) / 10.0)
    return LargeScaleCoefficients(zeta, pl_db, shadow_db)


def complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Unit-variance circularly symmetric complex Gaussian samples."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def draw_channel(zeta, sigma_e: float, rng: np.random.Generator) -> ChannelRealization:
    """One coherence-block channel draw with its imperfect estimate.

    ``zeta`` may be a LargeScaleCoefficients bundle or a raw (M, K) gain array.
    """
    if not 0.0 <= sigma_e < 1.0:
        raise ValueError(f"sigma_e must lie in [0, 1), got {sigma_e}")
    gains = zeta.zeta if isinstance(zeta, LargeScaleCoefficients) else np.asarray(zeta, dtype=float)
    amp = np.sqrt(gains)
    h = complex_normal(rng, gains.shape)
    h_err = complex_normal(rng, gains.shape)
    g_true = amp * h
    g_err = sigma_e * amp * h_err
    g_hat = amp * (math.sqrt(1.0 - sigma_e ** 2) * h + sigma_e * h_err)
    return ChannelRealization(g_true, g_hat, g_err, float(sigma_e))


def draw_error_matrices(zeta, sigma_e: float, n: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Stack of ``n`` estimation-error matrices, entries CN(0, sigma_e^2 zeta).

    Returns shape (n, M, K).  Used to average rates over the error
    distribution conditioned on one channel estimate.
    """
    gains = zeta.zeta if isinstance(zeta, LargeScaleCoefficients) else np.asarray(zeta, dtype=float)
    h = complex_normal(rng, (n,) + gains.shape)
    return sigma_e * np.sqrt(gains) * h


def true_channel_from_estimate(g_hat: np.ndarray, g_err: np.ndarray,
                               sigma_e: float) -> np.ndarray:
    """Invert the estimate model: g_true = (g_hat - g_err)/sqrt(1 - sigma_e^2)."""
    return (g_hat - g_err) / math.sqrt(1.0 - sigma_e ** 2)


def noise_variance(t0_kelvin: float, bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise power T0 * k_B * B * NF in Watts."""
    if t0_kelvin <= 0 or bandwidth_hz <= 0:
        raise ValueError("temperature and bandwidth must be positive")
    return t0_kelvin * BOLTZMANN_J_PER_K * bandwidth_hz * 10.0 ** (noise_figure_db / 10.0)


def snr_db(g_true: np.ndarray, pt: float, sigma_w2: float) -> float:
    """Transmit SNR: Pt * ||G||_F^2 / (M K sigma_w^2), in dB."""
    m, k = g_true.shape
    gain = float(np.sum(np.abs(g_true) ** 2))
    return 10.0 * math.log10(pt * gain / (m * k * sigma_w2))


def pt_for_snr(g_true: np.ndarray, target_snr_db: float, sigma_w2: float) -> float:
    """Inverse of :func:`snr_db`: power budget hitting a target SNR."""
    m, k = g_true.shape
    gain = float(np.sum(np.abs(g_true) ** 2))
    return 10.0 ** (target_snr_db / 10.0) * m * k * sigma_w2 / gain
