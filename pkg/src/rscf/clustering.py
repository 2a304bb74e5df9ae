"""AP selection and user/AP clustering for the clustered cell-free downlink.

Serving APs are picked per user from the large-scale gains, either by the
above-the-mean threshold rule or by keeping a fixed number of strongest
APs.  Users are then grouped greedily: a user joins the first cluster with
which it shares at least ``n_a`` candidate APs, otherwise it opens a new
cluster.  Each cluster keeps a binary test vector, the elementwise AND of
its members' selection columns.  Finally every AP is assigned to at most
one cluster so the cluster AP sets are pairwise disjoint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import LargeScaleCoefficients


@dataclass(frozen=True)
class SelectionMatrix:
    """Binary (M, K) matrix; entry (m, k) = 1 when AP m is a candidate for user k."""

    j: np.ndarray


@dataclass(frozen=True)
class ClusterPartition:
    """Disjoint user groups, their serving AP sets and final test vectors."""

    user_sets: tuple[tuple[int, ...], ...]  # ascending user indices per cluster
    ap_sets: tuple[tuple[int, ...], ...]    # pairwise disjoint AP indices
    test_vectors: np.ndarray                # (N_c, M) binary

    @property
    def n_clusters(self) -> int:
        return len(self.user_sets)

    def cluster_of_users(self, n_users: int) -> np.ndarray:
        """Vector mapping each user index to its cluster index."""
        out = np.full(n_users, -1, dtype=int)
        for i, users in enumerate(self.user_sets):
            out[list(users)] = i
        return out


@dataclass(frozen=True)
class SparseChannel:
    """Estimated channel masked to the cluster structure.

    ``g_bar[m, k]`` keeps the estimate only when AP m serves user k's
    cluster, and ``reduced[i]`` stacks cluster i's masked user rows as a
    (|K_i|, M) matrix (users in ascending index order).
    """

    g_bar: np.ndarray
    reduced: tuple[np.ndarray, ...]


def _gains(zeta) -> np.ndarray:
    return zeta.zeta if isinstance(zeta, LargeScaleCoefficients) else np.asarray(zeta, dtype=float)


def select_aps_threshold(zeta) -> SelectionMatrix:
    """Keep the links whose gain exceeds the mean over all M*K links.

    A user whose column ends up empty falls back to its single strongest
    AP (lowest index on ties) so that nobody is left unserved.
    """
    z = _gains(zeta)
    mu = z.mean()
    j = (z > mu).astype(int)
    for k in np.flatnonzero(j.sum(axis=0) == 0):
        j[int(np.argmax(z[:, k])), k] = 1
    return SelectionMatrix(j)


def select_aps_topn(zeta, n_s: int) -> SelectionMatrix:
    """Keep the n_s strongest APs per user (lowest AP index on ties)."""
    z = _gains(zeta)
    m = z.shape[0]
    if not 1 <= n_s <= m:
        raise ValueError(f"n_s must lie in [1, {m}], got {n_s}")
    j = np.zeros_like(z, dtype=int)
    for k in range(z.shape[1]):
        order = np.argsort(-z[:, k], kind="stable")
        j[order[:n_s], k] = 1
    return SelectionMatrix(j)


def default_shared_ap_threshold(selection: SelectionMatrix) -> int:
    """Default n_a: half the mean selected-AP count per user, rounded up."""
    per_user = selection.j.sum(axis=0)
    return max(1, math.ceil(per_user.mean() / 2.0))


def _assign_aps(test_vectors, user_sets, zeta) -> tuple[tuple[int, ...], ...]:
    """Resolve AP ownership so cluster AP sets are disjoint.

    An AP claimed by several test vectors goes to the cluster whose users
    it serves best (largest summed gain; lowest cluster index on ties).
    APs claimed by no test vector stay unassigned and transmit nothing.
    """
    z = _gains(zeta)
    ap_sets: list[list[int]] = [[] for _ in user_sets]
    for m in range(z.shape[0]):
        claimants = [i for i, tv in enumerate(test_vectors) if tv[m]]
        if not claimants:
            continue
        scores = [float(z[m, list(user_sets[i])].sum()) for i in claimants]
        ap_sets[claimants[int(np.argmax(scores))]].append(m)
    return tuple(tuple(a) for a in ap_sets)


def design_clusters(selection: SelectionMatrix, n_a: int, zeta) -> ClusterPartition:
    """Greedy cluster formation from the selection matrix.

    User 0 seeds the first cluster with its own column as test vector.
    Each later user joins the first cluster (in creation order) with which
    it shares at least ``n_a`` candidate APs, refining that cluster's test
    vector by AND; otherwise it opens a new cluster.
    """
    if n_a < 1:
        raise ValueError(f"n_a must be at least 1, got {n_a}")
    j = selection.j
    k_total = j.shape[1]
    user_sets: list[list[int]] = [[0]]
    test_vectors: list[np.ndarray] = [j[:, 0].copy()]
    for k in range(1, k_total):
        joined = False
        for i, tv in enumerate(test_vectors):
            if int(j[:, k] @ tv) >= n_a:
                test_vectors[i] = tv * j[:, k]
                user_sets[i].append(k)
                joined = True
                break
        if not joined:
            user_sets.append([k])
            test_vectors.append(j[:, k].copy())
    return ClusterPartition(
        tuple(tuple(u) for u in user_sets),
        _assign_aps(test_vectors, user_sets, zeta),
        np.array(test_vectors, dtype=int),
    )


def design_clusters_fixed(selection: SelectionMatrix, n_c: int, zeta) -> ClusterPartition:
    """Cluster into exactly ``n_c`` groups.

    Seeds are the n_c users sharing the fewest candidate APs (greedy:
    least-overlapping pair first, then the user minimising its worst
    overlap with the chosen seeds).  Remaining users join the cluster of
    maximum overlap; new clusters are never opened.
    """
    j = selection.j
    k_total = j.shape[1]
    if not 1 <= n_c <= k_total:
        raise ValueError(f"n_c must lie in [1, {k_total}], got {n_c}")
    overlap = j.T @ j
    if n_c == 1:
        seeds = [0]
    else:
        pairs = [(int(overlap[a, b]), a, b)
                 for a in range(k_total) for b in range(a + 1, k_total)]
        _, a, b = min(pairs)
        seeds = [a, b]
        while len(seeds) < n_c:
            rest = [u for u in range(k_total) if u not in seeds]
            u = min(rest, key=lambda u: (max(int(overlap[u, s]) for s in seeds), u))
            seeds.append(u)
    seeds = sorted(seeds[:n_c])

    user_sets: list[list[int]] = [[s] for s in seeds]
    test_vectors: list[np.ndarray] = [j[:, s].copy() for s in seeds]
    for k in range(k_total):
        if k in seeds:
            continue
        shared = [int(j[:, k] @ tv) for tv in test_vectors]
        # ties prefer the smaller cluster (then the lower index), which
        # keeps the partition balanced when selections are near-uniform
        i = min(range(len(shared)),
                key=lambda i: (-shared[i], len(user_sets[i]), i))
        user_sets[i].append(k)
        # A zero-overlap join would zero the test vector and strand the
        # cluster's APs; keep the previous vector in that case.
        if shared[i] > 0:
            test_vectors[i] = test_vectors[i] * j[:, k]
    user_sets = [sorted(u) for u in user_sets]
    return ClusterPartition(
        tuple(tuple(u) for u in user_sets),
        _assign_aps(test_vectors, user_sets, zeta),
        np.array(test_vectors, dtype=int),
    )


def single_cluster(m: int, k: int) -> ClusterPartition:
    """Trivial partition: every user and every AP in one cluster."""
    return ClusterPartition(
        (tuple(range(k)),),
        (tuple(range(m)),),
        np.ones((1, m), dtype=int),
    )


def sparse_channel(g_hat: np.ndarray, partition: ClusterPartition) -> SparseChannel:
    """Mask the channel estimate to the cluster support and slice per cluster."""
    g_bar = np.zeros_like(np.asarray(g_hat))
    for users, aps in zip(partition.user_sets, partition.ap_sets):
        if users and aps:
            idx = np.ix_(list(aps), list(users))
            g_bar[idx] = g_hat[idx]
    reduced = tuple(g_bar.T[list(users), :].copy() for users in partition.user_sets)
    return SparseChannel(g_bar, reduced)


def cluster_report(partition: ClusterPartition) -> list[dict]:
    """JSON-friendly summary of a partition."""
    return [
        {
            "cluster_index": i,
            "users": list(partition.user_sets[i]),
            "aps": list(partition.ap_sets[i]),
            "test_vector": [int(v) for v in partition.test_vectors[i]],
        }
        for i in range(partition.n_clusters)
    ]
