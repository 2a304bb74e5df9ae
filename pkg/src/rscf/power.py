"""Power allocation across common and private streams.

A fraction ``delta`` of the budget goes to the common streams (split
equally across clusters by default) and the rest is spread uniformly over
the private streams.  The fraction itself is picked by an exhaustive grid
search that maximises the average sum rate under one shared set of
estimation-error draws, so candidates are compared under common random
numbers and the winner can never fall below the no-split point delta=0.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import channel as chan
from . import rates
from .clustering import ClusterPartition
from .precoding import PrecoderSet


@dataclass(frozen=True)
class PowerAllocation:
    """Amplitudes of the common and private streams.

    sum(a_c^2) = delta * pt and sum(a_p^2) = (1 - delta) * pt.
    """

    a_c: np.ndarray  # (N_c,) sqrt-Watt amplitudes; empty when no common streams
    a_p: np.ndarray  # (K,)
    delta: float
    pt: float


def uniform_private(pt: float, delta: float, k: int) -> np.ndarray:
    """Equal private amplitudes a_k = sqrt((1 - delta) Pt / K)."""
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if k < 1:
        raise ValueError(f"need at least one user, got {k}")
    return np.full(k, math.sqrt((1.0 - delta) * pt / k))


def equal_split(pt: float, delta: float, n_c: int, k: int) -> PowerAllocation:
    """Common power split equally across clusters, private streams uniform."""
    a_c = (np.full(n_c, math.sqrt(delta * pt / n_c)) if n_c and delta > 0.0
           else np.zeros(n_c))
    return PowerAllocation(a_c, uniform_private(pt, delta, k), float(delta), float(pt))


def no_split(pt: float, k: int, n_c: int = 0) -> PowerAllocation:
    """All power on private streams (conventional, non-rate-split operation)."""
    return PowerAllocation(np.zeros(n_c), uniform_private(pt, 0.0, k), 0.0, float(pt))


def delta_grid(mu: float) -> list[float]:
    """Search grid {0, mu, 2 mu, ...} capped strictly below 1.

    The all-common endpoint delta=1 would leave zero private power, so a
    grid whose step divides 1 has its endpoint clamped to 1-mu.
    """
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"grid step must lie in (0, 1], got {mu}")
    n = int(math.floor((1.0 + 1e-12) / mu))
    values = []
    for i in range(n + 1):
        v = i * mu
        if v >= 1.0 - 1e-12:
            v = 1.0 - mu
        values.append(round(v, 12))
    return sorted(set(values))


def allocate_common(g_hat: np.ndarray, zeta, sigma_e: float,
                    partition: ClusterPartition, precoders: PrecoderSet,
                    sigma_w2: float, pt: float, mu: float, n_err: int,
                    rng: np.random.Generator,
                    mode: str = "equal_split") -> tuple[PowerAllocation, rates.AsrResult]:
    """Grid search for the common-power fraction maximising the average sum rate.

    One stack of estimation-error draws is sampled up front and reused for
    every candidate, so the comparison is noise-free across the grid.  In
    ``equal_split`` mode a single fraction is scanned and divided equally
    across clusters; ``per_cluster_exhaustive`` scans a separate fraction
    per cluster (only for up to two clusters, falling back to equal split
    beyond that).  Ties go to the smallest fraction.
    """
    if mode not in ("equal_split", "per_cluster_exhaustive"):
        raise ValueError(f"unknown power mode {mode!r}")
    n_c = partition.n_clusters
    k = g_hat.shape[1]
    err = chan.draw_error_matrices(zeta, sigma_e, n_err, rng)
    bundle = rates.project_streams(g_hat, err, precoders, partition)

    if mode == "per_cluster_exhaustive" and n_c <= 2:
        grid = delta_grid(mu)
        candidates = []
        for combo in itertools.product(grid, repeat=n_c):
            total = round(sum(combo), 12)
            if total < 1.0 - 1e-12:
                candidates.append((total, combo))
        candidates.sort()
        allocations = [
            PowerAllocation(np.sqrt(np.asarray(combo) * pt),
                            uniform_private(pt, total, k), total, pt)
            for total, combo in candidates
        ]
    else:
        allocations = [equal_split(pt, d, n_c, k) for d in delta_grid(mu)]

    best_alloc = None
    best_asr = None
    for alloc in allocations:
        asr = rates.asr_from_bundle(bundle, partition, alloc, sigma_w2, sigma_e)
        if best_asr is None or asr.s_a > best_asr.s_a:
            best_alloc, best_asr = alloc, asr
    return best_alloc, best_asr
