"""Common and private precoders for the clustered cell-free downlink.

The common precoder of each cluster is the leading right singular vector
of that cluster's reduced channel, so one multicast beam per cluster.
Private precoders come in matched-filter, zero-forcing and regularised
(MMSE) flavours, each either computed on the full sparse channel or per
cluster with reduced-size inversions and an index mapping back to users.

Every private construction records the factors needed to evaluate its
SINRs in closed form later: the Gram-inverse ``lam`` and a per-column
scale such that ``private[:, r] = col_scale[r] * conj(g_bar) @ lam[:, r]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .clustering import ClusterPartition, SparseChannel

COND_LIMIT = 1e12

LABEL_MF_SP = "MF-SP"
LABEL_ZF_SP = "ZF-SP"
LABEL_MMSE_SP = "MMSE-SP"
LABEL_RU_ZF_RD = "RU-ZF-RD"
LABEL_RU_MMSE_RD = "RU-MMSE-RD"


class RankDeficientChannelError(ValueError):
    """Gram matrix too ill-conditioned to invert reliably."""


class EmptyClusterError(ValueError):
    """A cluster ended up with an all-zero reduced channel."""


@dataclass(frozen=True)
class SvdCache:
    """Leading singular triplets of the per-cluster reduced channels.

    ``v1[i]`` is cluster i's unit-norm beam (length M), ``psi1[i]`` the top
    singular value, and ``u1[i][q]`` the leading left-singular coefficient
    of the cluster's q-th user (ascending user order), so that the masked
    row of user k in cluster i satisfies  g_bar_k^T v1[i] = u1 * psi1.
    """

    v1: np.ndarray            # (N_c, M)
    psi1: np.ndarray          # (N_c,)
    u1: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class PrecoderSet:
    """Common beams (one per cluster) plus private columns (one per user)."""

    label: str
    common: np.ndarray   # (M, N_c); (M, 0) when no common streams are sent
    private: np.ndarray  # (M, K)
    beta: float | np.ndarray
    lam: np.ndarray | None = None        # (K, K) Gram inverse (block structured)
    col_scale: np.ndarray | None = None  # (K,) per-column scale on conj(g_bar) @ lam


def _empty_common(m: int) -> np.ndarray:
    return np.zeros((m, 0), dtype=complex)


def attach_common(pset: PrecoderSet, common: np.ndarray) -> PrecoderSet:
    return replace(pset, common=common)


def dense_channel(g_hat: np.ndarray) -> SparseChannel:
    """Wrap an unmasked channel estimate as a single-cluster sparse channel."""
    g = np.asarray(g_hat)
    return SparseChannel(g, (g.T.copy(),))


def _check_condition(gram: np.ndarray, context: str) -> None:
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise RankDeficientChannelError(
            f"rank-deficient channel {context}: condition {cond:.3e} exceeds {COND_LIMIT:.0e}")


def common_precoder(sparse: SparseChannel,
                    partition: ClusterPartition) -> tuple[np.ndarray, SvdCache]:
    """One unit-norm SVD beam per cluster, with the cached singular triplets.

    The phase of each beam is pinned so its largest-magnitude entry is
    real positive, keeping results identical across linear-algebra
    backends.
    """
    if partition.n_clusters == 0:
        raise ValueError("partition has no clusters")
    m = sparse.g_bar.shape[0]
    v1 = np.zeros((partition.n_clusters, m), dtype=complex)
    psi1 = np.zeros(partition.n_clusters)
    u1 = []
    for i, reduced in enumerate(sparse.reduced):
        if not np.any(reduced):
            raise EmptyClusterError(f"empty cluster channel (cluster {i})")
        uu, ss, vh = np.linalg.svd(reduced, full_matrices=False)
        vec = vh[0].conj()
        coeff = uu[:, 0]
        pivot = vec[int(np.argmax(np.abs(vec)))]
        phase = pivot / abs(pivot)
        v1[i] = vec * phase.conjugate()
        u1.append(coeff * phase.conjugate())
        psi1[i] = ss[0]
    return v1.T.copy(), SvdCache(v1, psi1, tuple(u1))


def normalize_private_budget(pset: PrecoderSet, a_p: np.ndarray) -> PrecoderSet:
    """Rescale the private matrix so sum(a_k^2 ||p_k||^2) equals sum(a_k^2).

    Aggregate (one-scale) normalisation: column norm ratios are kept, so
    streams with stronger channels still carry more transmit power.
    """
    a2 = np.asarray(a_p, dtype=float) ** 2
    weighted = float(np.sum(a2 * np.sum(np.abs(pset.private) ** 2, axis=0)))
    if weighted <= 0.0:
        raise ValueError("cannot budget-normalise an all-zero private precoder")
    scale = math.sqrt(float(a2.sum()) / weighted)
    return replace(pset, private=scale * pset.private,
                   col_scale=None if pset.col_scale is None else scale * pset.col_scale)


def normalize_private_columns(pset: PrecoderSet) -> PrecoderSet:
    """Rescale every private column to unit norm.

    This is the transmit composition used throughout the experiments: the
    amplitude matrix alone carries the power, each stream transmits
    exactly its amplitude squared, and uniform amplitudes mean uniform
    per-stream power.  ``beta`` keeps the construction's own printed
    normalisation for reference.
    """
    norms = np.linalg.norm(pset.private, axis=0)
    if np.any(norms == 0.0):
        raise ValueError("cannot column-normalise a precoder with an all-zero column")
    return replace(pset, private=pset.private / norms,
                   col_scale=None if pset.col_scale is None else pset.col_scale / norms)


def mf_sp(sparse: SparseChannel, a_p: np.ndarray | None = None) -> PrecoderSet:
    """Matched filter on the sparse channel: the conjugate of each column.

    When the private amplitudes ``a_p`` are given, the budget
    normalisation of :func:`normalize_private_budget` is applied; bare
    conjugation otherwise.
    """
    g_bar = sparse.g_bar
    k = g_bar.shape[1]
    pset = PrecoderSet(LABEL_MF_SP, _empty_common(g_bar.shape[0]),
                       g_bar.conj().copy(), beta=1.0,
                       lam=np.eye(k, dtype=complex),
                       col_scale=np.ones(k))
    return pset if a_p is None else normalize_private_budget(pset, a_p)


def zf_sp(sparse: SparseChannel, pt: float) -> PrecoderSet:
    """Zero-forcing pseudoinverse of the sparse channel, trace-normalised to Pt."""
    g_bar = sparse.g_bar
    k = g_bar.shape[1]
    gram = g_bar.T @ g_bar.conj()
    _check_condition(gram, "(sparse zero-forcing)")
    lam = np.linalg.inv(gram)
    f = g_bar.conj() @ lam
    beta = math.sqrt(pt / float(np.sum(np.abs(f) ** 2)))
    return PrecoderSet(LABEL_ZF_SP, _empty_common(g_bar.shape[0]), beta * f,
                       beta=beta, lam=lam, col_scale=np.full(k, beta))


def mmse_sp(sparse: SparseChannel, pt: float, sigma_w2: float) -> PrecoderSet:
    """Regularised inverse on the sparse channel, trace-normalised to Pt.

    Regulariser K * sigma_w^2 / Pt with K the total user count.
    """
    if pt <= 0:
        raise ValueError(f"power budget must be positive, got {pt}")
    g_bar = sparse.g_bar
    k = g_bar.shape[1]
    gram = g_bar.T @ g_bar.conj() + (k * sigma_w2 / pt) * np.eye(k)
    lam = np.linalg.inv(gram)
    f = g_bar.conj() @ lam
    beta = math.sqrt(pt / float(np.sum(np.abs(f) ** 2)))
    return PrecoderSet(LABEL_MMSE_SP, _empty_common(g_bar.shape[0]), beta * f,
                       beta=beta, lam=lam, col_scale=np.full(k, beta))


def ru_zf_rd(sparse: SparseChannel, partition: ClusterPartition) -> PrecoderSet:
    """Per-cluster zero-forcing with reduced-size inversions.

    Column k of the result is the mapped column of its cluster's
    pseudoinverse; no global normalisation is applied.
    """
    m, k_total = sparse.g_bar.shape
    private = np.zeros((m, k_total), dtype=complex)
    lam = np.zeros((k_total, k_total), dtype=complex)
    for i, (users, reduced) in enumerate(zip(partition.user_sets, sparse.reduced)):
        gram = reduced @ reduced.conj().T
        _check_condition(gram, f"in cluster {i}")
        lam_i = np.linalg.inv(gram)
        cols = list(users)
        private[:, cols] = reduced.conj().T @ lam_i
        lam[np.ix_(cols, cols)] = lam_i
    return PrecoderSet(LABEL_RU_ZF_RD, _empty_common(m), private, beta=1.0,
                       lam=lam, col_scale=np.ones(k_total))


def ru_mmse_rd(sparse: SparseChannel, partition: ClusterPartition,
               pt: float, sigma_w2: float) -> PrecoderSet:
    """Per-cluster regularised inverses with per-cluster power scaling.

    Cluster i inverts a |K_i| x |K_i| matrix regularised by
    K |K_i| sigma_w^2 / Pt and scales its columns so the cluster carries
    Pt / K per stream.
    """
    if pt <= 0:
        raise ValueError(f"power budget must be positive, got {pt}")
    m, k_total = sparse.g_bar.shape
    private = np.zeros((m, k_total), dtype=complex)
    lam = np.zeros((k_total, k_total), dtype=complex)
    col_scale = np.ones(k_total)
    betas = np.zeros(partition.n_clusters)
    for i, (users, reduced) in enumerate(zip(partition.user_sets, sparse.reduced)):
        ki = len(users)
        gram = reduced @ reduced.conj().T + (k_total * ki * sigma_w2 / pt) * np.eye(ki)
        lam_i = np.linalg.inv(gram)
        p_bar = reduced.conj().T @ lam_i
        beta_i = math.sqrt(pt / (k_total * float(np.sum(np.abs(p_bar) ** 2))))
        cols = list(users)
        private[:, cols] = beta_i * p_bar
        lam[np.ix_(cols, cols)] = lam_i
        col_scale[cols] = beta_i
        betas[i] = beta_i
    return PrecoderSet(LABEL_RU_MMSE_RD, _empty_common(m), private,
                       beta=betas, lam=lam, col_scale=col_scale)


def network_wide(g_hat: np.ndarray, kind: str, pt: float | None = None,
                 sigma_w2: float | None = None,
                 a_p: np.ndarray | None = None) -> PrecoderSet:
    """Unmasked baseline precoders on the dense channel estimate."""
    dense = dense_channel(g_hat)
    if kind == "mf":
        return mf_sp(dense, a_p)
    if kind == "zf":
        return zf_sp(dense, pt)
    if kind == "mmse":
        return mmse_sp(dense, pt, sigma_w2)
    raise ValueError(f"unknown precoder kind {kind!r}; expected mf, zf or mmse")


def precoder_dump(pset: PrecoderSet) -> dict:
    """JSON-friendly dump for cross-implementation diffing.

    Matrices are row-major lists of [re, im] pairs.
    """
    def encode(matrix: np.ndarray) -> list:
        return [[[float(v.real), float(v.imag)] for v in row] for row in matrix]

    beta = pset.beta
    return {
        "label": pset.label,
        "common": encode(pset.common),
        "private": encode(pset.private),
        "beta": [float(b) for b in np.atleast_1d(beta)],
    }


def flop_estimate(partition: ClusterPartition | None, m: int, k: int, kind: str) -> int:
    """Complex multiply-add count for building one private (or SVD) precoder.

    Clustered inversion-based constructions cost the sum of cubed cluster
    sizes; network-wide ones add the dense product terms on top of the
    K^3 inversion.  With cluster sizes held fixed the clustered count per
    AP stays constant as the network grows.
    """
    if kind not in ("mf", "zf", "mmse", "svd"):
        raise ValueError(f"unknown precoder kind {kind!r}")
    if partition is None:
        if kind == "mf":
            return m * k
        if kind == "svd":
            return m * k * k
        return k ** 3 + 2 * m * k * k
    sizes = [(len(u), len(a)) for u, a in zip(partition.user_sets, partition.ap_sets)]
    if kind == "mf":
        return sum(na * nu for nu, na in sizes)
    if kind == "svd":
        return sum(na * nu * nu for nu, na in sizes)
    return sum(nu ** 3 for nu, _ in sizes)
