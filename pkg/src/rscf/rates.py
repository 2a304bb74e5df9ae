"""SINR and rate evaluation for the rate-splitting cell-free downlink.

Three independent evaluation routes are provided for the same quantities:

* generic per-user SINRs computed from the estimate/error split of the
  channel, with the power-loss terms of imperfect CSIT in the denominator;
* a reference oracle that assembles the same SINRs from the true-channel
  received-power decomposition (never touching the estimate projections in
  the interference terms);
* closed forms that use the cached SVD triplets and Gram-inverse columns
  of each precoder construction instead of the precoding matrices.

All three agree to tight relative tolerance on every construction, which
is the main correctness check of the simulator.  Rates are log2(1+SINR)
in bits/s/Hz; the sum rate adds the per-cluster minimum common rate to
the sum of private rates.  Averages over estimation-error draws (with the
estimate held fixed) and over channel realizations provide the average
and ergodic sum rates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import channel as chan
from .clustering import ClusterPartition, SparseChannel
from .precoding import (LABEL_MF_SP, LABEL_MMSE_SP, LABEL_RU_MMSE_RD,
                        LABEL_RU_ZF_RD, LABEL_ZF_SP, PrecoderSet, SvdCache)

if TYPE_CHECKING:
    from .power import PowerAllocation

CLOSED_FORM_KINDS = (LABEL_MF_SP, LABEL_ZF_SP, LABEL_MMSE_SP,
                     LABEL_RU_ZF_RD, LABEL_RU_MMSE_RD)


@dataclass(frozen=True)
class RateInputs:
    """Everything needed to evaluate the SINRs of one configuration."""

    realization: chan.ChannelRealization
    sparse: SparseChannel
    partition: ClusterPartition
    precoders: PrecoderSet
    svd_cache: SvdCache | None
    power: "PowerAllocation"
    sigma_w2: float


@dataclass(frozen=True)
class RateReport:
    """Instantaneous per-user rates and the min-based sum rate."""

    common_rate_per_user: np.ndarray    # (K,)
    min_common_per_cluster: np.ndarray  # (N_c,)
    private_rate_per_user: np.ndarray   # (K,)
    sum_rate: float


@dataclass(frozen=True)
class AsrResult:
    """Rates averaged over estimation-error draws for one channel estimate."""

    s_a: float
    mean_cr: np.ndarray  # (K,)
    mean_pr: np.ndarray  # (K,)
    min_cr: np.ndarray   # (N_c,) per-cluster minima of mean_cr


@dataclass(frozen=True)
class RealizationRates:
    """Per-realization record consumed by the ergodic aggregation."""

    mean_cr: np.ndarray
    mean_pr: np.ndarray
    cluster_of: np.ndarray


@dataclass(frozen=True)
class EsrResult:
    """Ergodic rates over channel realizations.

    Two common-rate estimators are reported: the per-realization min-sum
    averaged over realizations (always defined) and the min of per-user
    means (defined only when the partition is identical across records;
    preferred when available since expectation and min do not commute).
    """

    esr: float
    ecr: float
    epr: float
    stderr: float
    ecr_mean_of_mins: float
    ecr_min_of_means: float | None


def _clamped_ratio(num: float, den: float) -> float:
    # The CSIT power-loss terms can push a sampled denominator negative;
    # SINR is a power ratio, so such draws clamp to zero rate.
    if den <= 0.0:
        return 0.0
    return max(num, 0.0) / den


def _cluster_and_position(partition: ClusterPartition, k: int) -> tuple[int, int]:
    for i, users in enumerate(partition.user_sets):
        if k in users:
            return i, users.index(k)
    raise ValueError(f"user {k} is not in any cluster")


def sinr_common_generic(k: int, inputs: RateInputs) -> float:
    """SINR of user k decoding its cluster's common stream.

    Interference terms are evaluated through the estimate/error split
    (g_hat - g_err), which is the true channel divided by epsilon; the
    noise is scaled by 1/epsilon^2 accordingly.
    """
    i, _ = _cluster_and_position(inputs.partition, k)
    real = inputs.realization
    eps = real.epsilon
    g_hat_k = real.g_hat[:, k]
    g_err_k = real.g_err[:, k]
    e_k = g_hat_k - g_err_k
    a_c = np.asarray(inputs.power.a_c, dtype=float)
    a_p = np.asarray(inputs.power.a_p, dtype=float)
    pc, pp = inputs.precoders.common, inputs.precoders.private
    if pc.shape[1] == 0 or a_c.size == 0:
        return 0.0
    hat_own = g_hat_k @ pc[:, i]
    til_own = g_err_k @ pc[:, i]
    num = a_c[i] ** 2 * abs(hat_own) ** 2
    d_term = a_c[i] ** 2 * (abs(til_own) ** 2 - 2.0 * (hat_own.conjugate() * til_own).real)
    e_common = np.abs(e_k @ pc) ** 2
    common_int = float(np.sum(a_c ** 2 * e_common)) - a_c[i] ** 2 * e_common[i]
    private_int = float(np.sum(a_p ** 2 * np.abs(e_k @ pp) ** 2))
    den = d_term + common_int + private_int + inputs.sigma_w2 / eps ** 2
    return _clamped_ratio(num, den)


def sinr_private_generic(k: int, inputs: RateInputs) -> float:
    """SINR of user k decoding its private stream after removing its common one."""
    i, _ = _cluster_and_position(inputs.partition, k)
    real = inputs.realization
    eps = real.epsilon
    g_hat_k = real.g_hat[:, k]
    g_err_k = real.g_err[:, k]
    e_k = g_hat_k - g_err_k
    a_c = np.asarray(inputs.power.a_c, dtype=float)
    a_p = np.asarray(inputs.power.a_p, dtype=float)
    pc, pp = inputs.precoders.common, inputs.precoders.private
    hat_own = g_hat_k @ pp[:, k]
    til_own = g_err_k @ pp[:, k]
    num = a_p[k] ** 2 * abs(hat_own) ** 2
    d_term = a_p[k] ** 2 * (abs(til_own) ** 2 - 2.0 * (hat_own.conjugate() * til_own).real)
    if pc.shape[1] and a_c.size:
        e_common = np.abs(e_k @ pc) ** 2
        common_int = float(np.sum(a_c ** 2 * e_common)) - a_c[i] ** 2 * e_common[i]
    else:
        common_int = 0.0
    e_private = np.abs(e_k @ pp) ** 2
    private_int = float(np.sum(a_p ** 2 * e_private)) - a_p[k] ** 2 * e_private[k]
    den = d_term + common_int + private_int + inputs.sigma_w2 / eps ** 2
    return _clamped_ratio(num, den)


def sinr_common_oracle(k: int, inputs: RateInputs) -> float:
    """Reference route: same SINR assembled from true-channel stream powers.

    Every interference term is a received power |g_true^T p|^2 scaled by
    1/epsilon^2, and the useful power is recovered by subtracting the
    CSIT power-loss term from the decoded stream's true received power.
    """
    i, _ = _cluster_and_position(inputs.partition, k)
    real = inputs.realization
    eps2 = real.epsilon ** 2
    g_k = real.g_true[:, k]
    a_c = np.asarray(inputs.power.a_c, dtype=float)
    a_p = np.asarray(inputs.power.a_p, dtype=float)
    pc, pp = inputs.precoders.common, inputs.precoders.private
    if pc.shape[1] == 0 or a_c.size == 0:
        return 0.0
    powers_c = a_c ** 2 * np.abs(g_k @ pc) ** 2
    powers_p = a_p ** 2 * np.abs(g_k @ pp) ** 2
    hat_own = real.g_hat[:, k] @ pc[:, i]
    til_own = real.g_err[:, k] @ pc[:, i]
    d_term = a_c[i] ** 2 * (abs(til_own) ** 2 - 2.0 * (hat_own.conjugate() * til_own).real)
    num = powers_c[i] / eps2 - d_term
    other = float(powers_c.sum() - powers_c[i] + powers_p.sum()) / eps2
    den = d_term + other + inputs.sigma_w2 / eps2
    return _clamped_ratio(num, den)


def sinr_private_oracle(k: int, inputs: RateInputs) -> float:
    """True-channel-power route for the private SINR."""
    i, _ = _cluster_and_position(inputs.partition, k)
    real = inputs.realization
    eps2 = real.epsilon ** 2
    g_k = real.g_true[:, k]
    a_c = np.asarray(inputs.power.a_c, dtype=float)
    a_p = np.asarray(inputs.power.a_p, dtype=float)
    pc, pp = inputs.precoders.common, inputs.precoders.private
    powers_p = a_p ** 2 * np.abs(g_k @ pp) ** 2
    if pc.shape[1] and a_c.size:
        powers_c = a_c ** 2 * np.abs(g_k @ pc) ** 2
        common_int = float(powers_c.sum() - powers_c[i])
    else:
        common_int = 0.0
    hat_own = real.g_hat[:, k] @ pp[:, k]
    til_own = real.g_err[:, k] @ pp[:, k]
    d_term = a_p[k] ** 2 * (abs(til_own) ** 2 - 2.0 * (hat_own.conjugate() * til_own).real)
    num = powers_p[k] / eps2 - d_term
    other = (common_int + float(powers_p.sum() - powers_p[k])) / eps2
    den = d_term + other + inputs.sigma_w2 / eps2
    return _clamped_ratio(num, den)


def _closed_form_projections(k: int, inputs: RateInputs) -> tuple[np.ndarray, np.ndarray]:
    """Private-column projections of user k via the Gram-inverse cache.

    Returns (hat_p, til_p): the estimate and error channels of user k
    projected through every private column, computed as rows through
    conj(g_bar) and the cached lam instead of the precoder matrix.  Exact
    construction identities replace the own-cluster entries where the
    construction guarantees them.
    """
    ps = inputs.precoders
    i, _ = _cluster_and_position(inputs.partition, k)
    users_i = list(inputs.partition.user_sets[i])
    g_bar_conj = inputs.sparse.g_bar.conj()
    rh = inputs.realization.g_hat[:, k] @ g_bar_conj
    rt = inputs.realization.g_err[:, k] @ g_bar_conj
    hat_p = (rh @ ps.lam) * ps.col_scale
    til_p = (rt @ ps.lam) * ps.col_scale
    if ps.label in (LABEL_ZF_SP, LABEL_RU_ZF_RD):
        # within the own cluster the pseudoinverse gives exactly scale * delta
        hat_p[users_i] = 0.0
        hat_p[k] = ps.col_scale[k]
    elif ps.label == LABEL_MF_SP:
        hat_p[k] = ps.col_scale[k] * float(np.sum(np.abs(inputs.sparse.g_bar[:, k]) ** 2))
    return hat_p, til_p


def sinr_closed_form(k: int, inputs: RateInputs, kind: str, stream: str) -> float:
    """Closed-form SINR from the cached SVD triplets and Gram inverses.

    ``kind`` must match the construction the precoder set was built with;
    ``stream`` is "common" or "private".
    """
    if kind not in CLOSED_FORM_KINDS:
        raise ValueError(f"no closed form for kind {kind!r}; expected one of {CLOSED_FORM_KINDS}")
    ps = inputs.precoders
    if ps.label != kind:
        raise ValueError(f"precoder set was built as {ps.label!r}, requested {kind!r}")
    if ps.lam is None or ps.col_scale is None:
        raise ValueError("precoder set carries no closed-form cache")
    if stream not in ("common", "private"):
        raise ValueError(f"stream must be 'common' or 'private', got {stream!r}")

    i, pos = _cluster_and_position(inputs.partition, k)
    real = inputs.realization
    eps = real.epsilon
    a_c = np.asarray(inputs.power.a_c, dtype=float)
    a_p = np.asarray(inputs.power.a_p, dtype=float)
    noise = inputs.sigma_w2 / eps ** 2

    pc = ps.common
    if pc.shape[1] and a_c.size:
        hat_c = real.g_hat[:, k] @ pc
        til_c = real.g_err[:, k] @ pc
        e_c2 = np.abs(hat_c - til_c) ** 2
        common_int = float(np.sum(a_c ** 2 * e_c2)) - a_c[i] ** 2 * e_c2[i]
    else:
        til_c = None
        common_int = 0.0

    hat_p, til_p = _closed_form_projections(k, inputs)
    e_p2 = np.abs(hat_p - til_p) ** 2
    private_all = float(np.sum(a_p ** 2 * e_p2))

    if stream == "private":
        num = a_p[k] ** 2 * abs(hat_p[k]) ** 2
        d_term = a_p[k] ** 2 * (abs(til_p[k]) ** 2
                                - 2.0 * (np.conjugate(hat_p[k]) * til_p[k]).real)
        den = d_term + common_int + (private_all - a_p[k] ** 2 * e_p2[k]) + noise
        return _clamped_ratio(num, den)

    if inputs.svd_cache is None:
        raise ValueError("common-stream closed form needs the SVD cache")
    if pc.shape[1] == 0 or a_c.size == 0:
        return 0.0
    psi = inputs.svd_cache.psi1[i]
    u_k1 = inputs.svd_cache.u1[i][pos]
    num = a_c[i] ** 2 * psi ** 2 * abs(u_k1) ** 2
    d_term = a_c[i] ** 2 * (abs(til_c[i]) ** 2
                            - 2.0 * psi * (np.conjugate(u_k1) * til_c[i]).real)
    den = d_term + common_int + private_all + noise
    return _clamped_ratio(num, den)


def instantaneous_rates(inputs: RateInputs) -> RateReport:
    """Per-user rates of one draw and the min-based sum rate."""
    k_total = inputs.realization.g_hat.shape[1]
    cr = np.array([math.log2(1.0 + sinr_common_generic(k, inputs)) for k in range(k_total)])
    pr = np.array([math.log2(1.0 + sinr_private_generic(k, inputs)) for k in range(k_total)])
    min_cr = np.array([cr[list(users)].min() for users in inputs.partition.user_sets])
    return RateReport(cr, min_cr, pr, float(min_cr.sum() + pr.sum()))


# ---------------------------------------------------------------------------
# Vectorised evaluation over estimation-error draws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectionBundle:
    """Estimate and per-draw error projections through one precoder set."""

    hat_c: np.ndarray      # (K, N_c)
    hat_p: np.ndarray      # (K, K)
    til_c: np.ndarray      # (n, K, N_c)
    til_p: np.ndarray      # (n, K, K)
    cluster_of: np.ndarray  # (K,)


def project_streams(g_hat: np.ndarray, err_stack: np.ndarray,
                    precoders: PrecoderSet,
                    partition: ClusterPartition) -> ProjectionBundle:
    pc, pp = precoders.common, precoders.private
    err_rows = err_stack.transpose(0, 2, 1)
    return ProjectionBundle(
        hat_c=g_hat.T @ pc,
        hat_p=g_hat.T @ pp,
        til_c=err_rows @ pc,
        til_p=err_rows @ pp,
        cluster_of=partition.cluster_of_users(g_hat.shape[1]),
    )


def rate_components_over_draws(bundle: ProjectionBundle, a_c: np.ndarray,
                               a_p: np.ndarray, sigma_w2: float,
                               eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-draw per-user common and private rates, shapes (n, K) each.

    Matches the scalar evaluators exactly; the draw axis is vectorised and
    reductions run in fixed index order.
    """
    n, k_total, n_c = bundle.til_c.shape
    users = np.arange(k_total)
    i_of = bundle.cluster_of
    ac2 = np.asarray(a_c, dtype=float) ** 2
    ap2 = np.asarray(a_p, dtype=float) ** 2
    noise = sigma_w2 / eps ** 2

    e_p = bundle.hat_p[None, :, :] - bundle.til_p
    pint_all = np.einsum("r,nkr->nk", ap2, np.abs(e_p) ** 2)
    own_e_p2 = np.abs(e_p[:, users, users]) ** 2
    pint_excl = pint_all - ap2[None, :] * own_e_p2

    if n_c and ac2.size:
        e_c = bundle.hat_c[None, :, :] - bundle.til_c
        cint_all = np.einsum("j,nkj->nk", ac2, np.abs(e_c) ** 2)
        own_e_c2 = np.abs(e_c[:, users, i_of]) ** 2
        cint = cint_all - ac2[i_of][None, :] * own_e_c2
        hat_own_c = bundle.hat_c[users, i_of]
        til_own_c = bundle.til_c[:, users, i_of]
        num_c = ac2[i_of] * np.abs(hat_own_c) ** 2
        d_c = ac2[i_of][None, :] * (np.abs(til_own_c) ** 2
                                    - 2.0 * (np.conj(hat_own_c)[None, :] * til_own_c).real)
        den_c = d_c + cint + pint_all + noise
        gamma_c = np.where(den_c > 0.0,
                           np.maximum(num_c[None, :], 0.0) / np.where(den_c > 0.0, den_c, 1.0),
                           0.0)
    else:
        cint = 0.0
        gamma_c = np.zeros((n, k_total))

    hat_own_p = bundle.hat_p[users, users]
    til_own_p = bundle.til_p[:, users, users]
    num_p = ap2 * np.abs(hat_own_p) ** 2
    d_p = ap2[None, :] * (np.abs(til_own_p) ** 2
                          - 2.0 * (np.conj(hat_own_p)[None, :] * til_own_p).real)
    den_p = d_p + cint + pint_excl + noise
    gamma_p = np.where(den_p > 0.0,
                       np.maximum(num_p[None, :], 0.0) / np.where(den_p > 0.0, den_p, 1.0),
                       0.0)
    return np.log2(1.0 + gamma_c), np.log2(1.0 + gamma_p)


def asr_from_errors(g_hat: np.ndarray, err_stack: np.ndarray,
                    partition: ClusterPartition, precoders: PrecoderSet,
                    power: "PowerAllocation", sigma_w2: float,
                    sigma_e: float) -> AsrResult:
    """Average rates over a pre-drawn stack of estimation errors."""
    bundle = project_streams(g_hat, err_stack, precoders, partition)
    return asr_from_bundle(bundle, partition, power, sigma_w2, sigma_e)


def asr_from_bundle(bundle: ProjectionBundle, partition: ClusterPartition,
                    power: "PowerAllocation", sigma_w2: float,
                    sigma_e: float) -> AsrResult:
    eps = 1.0 / math.sqrt(1.0 - sigma_e ** 2)
    cr, pr = rate_components_over_draws(bundle, power.a_c, power.a_p, sigma_w2, eps)
    mean_cr = cr.mean(axis=0)
    mean_pr = pr.mean(axis=0)
    min_cr = np.array([mean_cr[list(users)].min() for users in partition.user_sets])
    return AsrResult(float(min_cr.sum() + mean_pr.sum()), mean_cr, mean_pr, min_cr)


def average_sum_rate(g_hat: np.ndarray, zeta, sigma_e: float,
                     partition: ClusterPartition, precoders: PrecoderSet,
                     power: "PowerAllocation", sigma_w2: float, n_err: int,
                     rng: np.random.Generator) -> AsrResult:
    """Average sum rate over ``n_err`` estimation-error draws.

    The channel estimate is held fixed; each draw resamples the error
    matrix (and hence a candidate true channel) from its distribution.
    """
    if n_err < 1:
        raise ValueError(f"need at least one error draw, got {n_err}")
    err = chan.draw_error_matrices(zeta, sigma_e, n_err, rng)
    return asr_from_errors(g_hat, err, partition, precoders, power, sigma_w2, sigma_e)


def ergodic_sum_rate(records: Sequence[RealizationRates]) -> EsrResult:
    """Aggregate per-realization averaged rates into ergodic quantities.

    The private part is the plain per-user mean.  For the common part the
    min-of-means estimator is used whenever all records share one
    partition; with per-realization partitions (redrawn geometry) it is
    undefined and the mean of per-realization min-sums is reported as the
    primary estimator instead.  Summations run in fixed order with
    compensated summation, so results do not depend on scheduling.
    """
    if not records:
        raise ValueError("need at least one realization record")
    n_rec = len(records)
    k_total = records[0].mean_cr.shape[0]

    epr = math.fsum(math.fsum(float(r.mean_pr[u]) for r in records) / n_rec
                    for u in range(k_total))

    def min_sum(rec: RealizationRates) -> float:
        out = 0.0
        for i in range(int(rec.cluster_of.max()) + 1):
            members = np.flatnonzero(rec.cluster_of == i)
            if members.size:
                out += float(rec.mean_cr[members].min())
        return out

    per_record_cmin = [min_sum(r) for r in records]
    ecr_mean_of_mins = math.fsum(per_record_cmin) / n_rec

    shared_partition = all(np.array_equal(r.cluster_of, records[0].cluster_of)
                           for r in records)
    ecr_min_of_means: float | None = None
    if shared_partition:
        user_means = np.array([math.fsum(float(r.mean_cr[u]) for r in records) / n_rec
                               for u in range(k_total)])
        ecr_min_of_means = 0.0
        cluster_of = records[0].cluster_of
        for i in range(int(cluster_of.max()) + 1):
            members = np.flatnonzero(cluster_of == i)
            if members.size:
                ecr_min_of_means += float(user_means[members].min())

    ecr = ecr_min_of_means if ecr_min_of_means is not None else ecr_mean_of_mins

    samples = [c + math.fsum(float(v) for v in r.mean_pr)
               for c, r in zip(per_record_cmin, records)]
    if n_rec > 1:
        mean_s = math.fsum(samples) / n_rec
        var = math.fsum((s - mean_s) ** 2 for s in samples) / (n_rec - 1)
        stderr = math.sqrt(var / n_rec)
    else:
        stderr = 0.0

    return EsrResult(esr=ecr + epr, ecr=ecr, epr=epr, stderr=stderr,
                     ecr_mean_of_mins=ecr_mean_of_mins,
                     ecr_min_of_means=ecr_min_of_means)
