"""Monte Carlo experiment driver and verification suite.

One realization draws geometry, large-scale fading and a channel with its
imperfect estimate, clusters the network, and evaluates every configured
transmission scheme over the SNR grid.  Realizations are independently
seeded work items derived from (master seed, realization index), so the
result of a run is a pure function of the configuration no matter how the
work is scheduled; the reduction walks trial rows in index order with
compensated summation.

Scheme labels follow  [RS-]{BS|CF}-{MF|ZF|MMSE}[-SP|-RD]:  BS places all
antennas at the area centre, CF distributes them; SP masks the channel to
the cluster support, RD additionally inverts per cluster; the RS prefix
adds one common stream per cluster with a searched power split.
"""
from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from . import channel as chan
from . import clustering as clus
from . import power as pw
from . import precoding as prec
from . import rates
from .config import ExperimentConfig, SchemeSpec, parse_scheme, validate

log = logging.getLogger("rscf")

# sub-stream identifiers for per-realization seeding
_GEOMETRY, _SHADOW, _SMALLSCALE, _ERRDRAWS = 0, 1, 2, 3
MAX_REDRAWS = 3


def seeded_rng(*parts: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(parts)))


@dataclass(frozen=True)
class SideData:
    """Channel state of one geometry (distributed or co-located)."""

    geometry: chan.NetworkGeometry
    zeta: chan.LargeScaleCoefficients
    realization: chan.ChannelRealization
    dense_partition: clus.ClusterPartition
    dense_sparse: clus.SparseChannel
    clustered_partition: clus.ClusterPartition | None = None
    clustered_sparse: clus.SparseChannel | None = None


@dataclass(frozen=True)
class TrialRow:
    """One (realization, scheme, SNR) outcome."""

    realization: int
    scheme: str
    snr_db: float
    s_a: float
    delta: float
    n_clusters: int
    mean_cr: tuple[float, ...]
    mean_pr: tuple[float, ...]
    min_cr: tuple[float, ...]
    cluster_of: tuple[int, ...]
    elapsed_ms: float
    redraws: int


@dataclass(frozen=True)
class ResultRecord:
    """Aggregated ergodic rates of one scheme at one SNR point."""

    scheme: str
    snr_db: float
    esr: float
    ecr: float
    epr: float
    stderr: float
    delta_mean: float
    n_clusters_mean: float
    runtime_ms: float


def cluster_partition_for(config: ExperimentConfig,
                          zeta: chan.LargeScaleCoefficients
                          ) -> tuple[clus.SelectionMatrix, clus.ClusterPartition]:
    """Selection matrix plus partition per the configured clustering mode."""
    if config.selection == "topn":
        n_s = config.n_s if config.n_s >= 1 else config.m
        selection = clus.select_aps_topn(zeta, n_s)
    else:
        selection = clus.select_aps_threshold(zeta)
    if config.cluster_mode == "fixed":
        partition = clus.design_clusters_fixed(selection, config.n_c, zeta)
    else:
        n_a = config.n_a if config.n_a >= 1 else clus.default_shared_ap_threshold(selection)
        partition = clus.design_clusters(selection, n_a, zeta)
    return selection, partition


def _side_data(config: ExperimentConfig, index: int, attempt: int,
               co_located: bool, clustered: bool) -> SideData:
    geo_index = 0 if config.freeze_geometry else index
    geo_attempt = 0 if config.freeze_geometry else attempt
    geometry = chan.place_network(
        config.m, config.k, config.area_side_m,
        seeded_rng(config.seed, geo_index, geo_attempt, _GEOMETRY),
        h_ap=config.h_ap_m, h_u=config.h_u_m, carrier_freq_mhz=config.freq_mhz)
    if co_located:
        geometry = geometry.co_located()
    # the shadowing and small-scale generators are re-seeded identically for
    # both geometries, so the same normal draws underlie the two baselines;
    # a co-located array shares one shadowing value per user
    zeta = chan.large_scale(geometry, config.shadow_sigma_db,
                            seeded_rng(config.seed, geo_index, geo_attempt, _SHADOW),
                            d0=config.d0_m, d1=config.d1_m,
                            per_user_shadow=co_located)
    realization = chan.draw_channel(zeta, math.sqrt(config.sigma_e2),
                                    seeded_rng(config.seed, index, attempt, _SMALLSCALE))
    dense_partition = clus.single_cluster(config.m, config.k)
    dense_sparse = prec.dense_channel(realization.g_hat)
    clustered_partition = clustered_sparse = None
    if clustered:
        _, clustered_partition = cluster_partition_for(config, zeta)
        clustered_sparse = clus.sparse_channel(realization.g_hat, clustered_partition)
    return SideData(geometry, zeta, realization, dense_partition, dense_sparse,
                    clustered_partition, clustered_sparse)


def _build_private(spec: SchemeSpec, sparse: clus.SparseChannel,
                   partition: clus.ClusterPartition, pt: float,
                   sigma_w2: float) -> prec.PrecoderSet:
    for i, (users, aps) in enumerate(zip(partition.user_sets, partition.ap_sets)):
        if users and not aps:
            raise prec.EmptyClusterError(f"cluster {i} lost every AP in conflict resolution")
    if spec.precoder == "mf":
        raw = prec.mf_sp(sparse)
    elif spec.scope == "rd":
        if spec.precoder == "zf":
            raw = prec.ru_zf_rd(sparse, partition)
        else:
            raw = prec.ru_mmse_rd(sparse, partition, pt, sigma_w2)
    elif spec.precoder == "zf":
        raw = prec.zf_sp(sparse, pt)
    else:
        raw = prec.mmse_sp(sparse, pt, sigma_w2)
    # transmit composition: unit-norm columns, amplitudes carry the power
    return prec.normalize_private_columns(raw)


def _evaluate_scheme(spec: SchemeSpec, side: SideData, pt: float,
                     config: ExperimentConfig, sigma_w2: float,
                     err_rng_factory) -> tuple[pw.PowerAllocation, rates.AsrResult,
                                               clus.ClusterPartition]:
    real = side.realization
    if spec.scope == "dense":
        partition, sparse = side.dense_partition, side.dense_sparse
    else:
        partition, sparse = side.clustered_partition, side.clustered_sparse
    sigma_e = math.sqrt(config.sigma_e2)
    pset = _build_private(spec, sparse, partition, pt, sigma_w2)
    if spec.rs:
        common, _ = prec.common_precoder(sparse, partition)
        pset = prec.attach_common(pset, common)
        alloc, asr = pw.allocate_common(
            real.g_hat, side.zeta, sigma_e, partition, pset, sigma_w2, pt,
            config.power_grid_step, config.n_err, err_rng_factory(),
            mode=config.power_mode)
    else:
        alloc = pw.no_split(pt, config.k)
        asr = rates.average_sum_rate(real.g_hat, side.zeta, sigma_e, partition,
                                     pset, alloc, sigma_w2, config.n_err,
                                     err_rng_factory())
    return alloc, asr, partition


def _realization_attempt(config: ExperimentConfig, index: int, attempt: int,
                         snr_grid: tuple[float, ...]) -> list[TrialRow]:
    specs = [parse_scheme(label) for label in config.schemes]
    need_bs = any(s.bs for s in specs)
    need_cf = any(not s.bs for s in specs)
    clustered = any(s.scope != "dense" for s in specs)
    sides = {}
    if need_cf:
        sides[False] = _side_data(config, index, attempt, co_located=False,
                                  clustered=clustered)
    if need_bs:
        sides[True] = _side_data(config, index, attempt, co_located=True,
                                 clustered=False)
    err_rng_factory = lambda: seeded_rng(config.seed, index, attempt, _ERRDRAWS)

    # one power budget per (realization, SNR point), solved on the primary
    # distributed geometry and shared by every scheme for a fair comparison
    reference = sides[False] if False in sides else sides[True]

    rows = []
    for snr in snr_grid:
        pt = chan.pt_for_snr(reference.realization.g_true, snr, _noise(config))
        for spec in specs:
            started = time.perf_counter() if config.timing else 0.0
            alloc, asr, partition = _evaluate_scheme(
                spec, sides[spec.bs], pt, config, _noise(config), err_rng_factory)
            elapsed = (time.perf_counter() - started) * 1e3 if config.timing else 0.0
            rows.append(TrialRow(
                realization=index, scheme=spec.label, snr_db=float(snr),
                s_a=asr.s_a, delta=alloc.delta, n_clusters=partition.n_clusters,
                mean_cr=tuple(float(v) for v in asr.mean_cr),
                mean_pr=tuple(float(v) for v in asr.mean_pr),
                min_cr=tuple(float(v) for v in asr.min_cr),
                cluster_of=tuple(int(v) for v in partition.cluster_of_users(config.k)),
                elapsed_ms=elapsed, redraws=attempt))
    return rows


def _noise(config: ExperimentConfig) -> float:
    return chan.noise_variance(config.t0_k, config.bandwidth_hz, config.noise_figure_db)


def run_realization(config: ExperimentConfig, index: int,
                    snr_grid: tuple[float, ...] | None = None) -> list[TrialRow]:
    """All (scheme, SNR) trial rows of one realization.

    Degenerate draws (rank-deficient or empty-cluster channels) are logged
    and redrawn with a derived sub-seed, at most MAX_REDRAWS times.
    """
    grid = tuple(snr_grid) if snr_grid is not None else tuple(config.snr_grid_db)
    last_error: Exception | None = None
    for attempt in range(MAX_REDRAWS + 1):
        try:
            return _realization_attempt(config, index, attempt, grid)
        except (prec.RankDeficientChannelError, prec.EmptyClusterError) as exc:
            log.warning("realization %d attempt %d redrawn: %s", index, attempt, exc)
            last_error = exc
    raise RuntimeError(
        f"realization {index}: exhausted {MAX_REDRAWS} redraws: {last_error}")


def run_trial(config: ExperimentConfig, realization_index: int,
              snr_db: float) -> list[TrialRow]:
    """Per-scheme outcomes of one realization at a single SNR point."""
    return run_realization(config, realization_index, snr_grid=(snr_db,))


def aggregate(config: ExperimentConfig, rows: list[TrialRow]) -> list[ResultRecord]:
    """Reduce trial rows to per-(scheme, SNR) ergodic records, in fixed order."""
    by_key: dict[tuple[str, float], list[TrialRow]] = {}
    for row in rows:
        by_key.setdefault((row.scheme, row.snr_db), []).append(row)
    records = []
    for scheme in config.schemes:
        for snr in config.snr_grid_db:
            group = sorted(by_key.get((scheme, float(snr)), []),
                           key=lambda r: r.realization)
            if not group:
                continue
            reals = [rates.RealizationRates(np.asarray(r.mean_cr), np.asarray(r.mean_pr),
                                            np.asarray(r.cluster_of)) for r in group]
            esr = rates.ergodic_sum_rate(reals)
            n = len(group)
            records.append(ResultRecord(
                scheme=scheme, snr_db=float(snr), esr=esr.esr, ecr=esr.ecr,
                epr=esr.epr, stderr=esr.stderr,
                delta_mean=math.fsum(r.delta for r in group) / n,
                n_clusters_mean=math.fsum(r.n_clusters for r in group) / n,
                runtime_ms=math.fsum(r.elapsed_ms for r in group)))
    return records


def run_experiment(config: ExperimentConfig,
                   out_dir: str | Path | None = None
                   ) -> tuple[list[ResultRecord], list[TrialRow]]:
    """Full sweep: realizations x SNR grid x schemes, with optional outputs.

    Writes ``results.csv`` and ``trials.jsonl`` under ``out_dir`` when
    given.  The outputs are a pure function of (config, seed): trial rows
    are reduced in realization order whatever the worker count.
    """
    validate(config)
    indices = range(config.n_realizations)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            per_real = list(pool.map(partial(run_realization, config), indices))
    else:
        per_real = [run_realization(config, i) for i in indices]
    rows = [row for chunk in per_real for row in chunk]
    records = aggregate(config, rows)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(render_csv(records), encoding="utf-8")
        (out / "trials.jsonl").write_text(render_jsonl(rows), encoding="utf-8")
    return records, rows


def dump_precoders(config: ExperimentConfig, realization_index: int = 0,
                   snr_db: float | None = None) -> dict:
    """Per-scheme precoder matrices of one realization, for diffing runs.

    Returns a mapping scheme label -> JSON-friendly dump (see
    precoding.precoder_dump) at the given SNR point (default: the first
    grid point).
    """
    snr = float(snr_db) if snr_db is not None else float(config.snr_grid_db[0])
    specs = [parse_scheme(label) for label in config.schemes]
    clustered = any(s.scope != "dense" for s in specs)
    sigma_w2 = _noise(config)
    last_error: Exception | None = None
    for attempt in range(MAX_REDRAWS + 1):
        try:
            sides = {}
            for bs in {s.bs for s in specs}:
                sides[bs] = _side_data(config, realization_index, attempt,
                                       co_located=bs, clustered=clustered and not bs)
            reference = sides[False] if False in sides else sides[True]
            pt = chan.pt_for_snr(reference.realization.g_true, snr, sigma_w2)
            out = {}
            for spec in specs:
                side = sides[spec.bs]
                if spec.scope == "dense":
                    partition, sparse = side.dense_partition, side.dense_sparse
                else:
                    partition, sparse = side.clustered_partition, side.clustered_sparse
                pset = _build_private(spec, sparse, partition, pt, sigma_w2)
                if spec.rs:
                    common, _ = prec.common_precoder(sparse, partition)
                    pset = prec.attach_common(pset, common)
                dump = prec.precoder_dump(pset)
                dump["snr_db"] = snr
                dump["realization"] = realization_index
                out[spec.label] = dump
            return out
        except (prec.RankDeficientChannelError, prec.EmptyClusterError) as exc:
            log.warning("precoder dump %d attempt %d redrawn: %s",
                        realization_index, attempt, exc)
            last_error = exc
    raise RuntimeError(
        f"realization {realization_index}: exhausted {MAX_REDRAWS} redraws: {last_error}")


CSV_HEADER = "scheme,snr_db,esr,ecr,epr,stderr,delta_mean,n_clusters_mean,runtime_ms"


def render_csv(records: list[ResultRecord]) -> str:
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join([
            r.scheme, f"{r.snr_db:.10g}", f"{r.esr:.12g}", f"{r.ecr:.12g}",
            f"{r.epr:.12g}", f"{r.stderr:.12g}", f"{r.delta_mean:.12g}",
            f"{r.n_clusters_mean:.12g}", f"{r.runtime_ms:.12g}",
        ]))
    return "\n".join(lines) + "\n"


def render_jsonl(rows: list[TrialRow]) -> str:
    out = []
    for r in rows:
        out.append(json.dumps({
            "realization": r.realization, "scheme": r.scheme, "snr_db": r.snr_db,
            "s_a": r.s_a, "delta": r.delta, "n_clusters": r.n_clusters,
            "mean_cr": list(r.mean_cr), "mean_pr": list(r.mean_pr),
            "min_cr": list(r.min_cr), "cluster_of": list(r.cluster_of),
            "redraws": r.redraws,
        }, sort_keys=True))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Verification suite
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""


@dataclass(frozen=True)
class VerifyReport:
    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def format(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            extra = f" ({c.detail})" if c.detail else ""
            lines.append(f"[{status}] {c.name}: residual {c.residual:.3e}"
                         f" <= {c.tolerance:.1e}{extra}")
        lines.append("verification " + ("PASSED" if self.ok else "FAILED"))
        return "\n".join(lines)


def random_instance(seed: int, m: int = 8, k: int = 4, sigma_e2: float = 0.025,
                    kind: str = prec.LABEL_MMSE_SP, delta: float = 0.3,
                    snr_db: float = 15.0, with_zeta: bool = False):
    """A fully built evaluation instance on a random seeded network.

    Draws geometry, fading and a channel; clusters with the threshold
    rule; builds the requested private construction plus the common SVD
    beams; splits power with the given common fraction.  Seeds that land
    on a degenerate clustering are re-derived (bounded retries).  With
    ``with_zeta`` the large-scale gains are returned alongside, for
    callers that resample estimation errors.
    """
    for attempt in range(20):
        rng = seeded_rng(seed, attempt, 100)
        geometry = chan.place_network(m, k, 1000.0, rng)
        zeta = chan.large_scale(geometry, 8.0, rng)
        realization = chan.draw_channel(zeta, math.sqrt(sigma_e2), rng)
        selection = clus.select_aps_threshold(zeta)
        n_a = clus.default_shared_ap_threshold(selection)
        partition = clus.design_clusters(selection, n_a, zeta)
        sparse = clus.sparse_channel(realization.g_hat, partition)
        sigma_w2 = chan.noise_variance(290.0, 20e6, 9.0)
        pt = chan.pt_for_snr(realization.g_true, snr_db, sigma_w2)
        try:
            common, cache = prec.common_precoder(sparse, partition)
            if kind == prec.LABEL_MF_SP:
                pset = prec.mf_sp(sparse)
            elif kind == prec.LABEL_ZF_SP:
                pset = prec.zf_sp(sparse, pt)
            elif kind == prec.LABEL_MMSE_SP:
                pset = prec.mmse_sp(sparse, pt, sigma_w2)
            elif kind == prec.LABEL_RU_ZF_RD:
                pset = prec.ru_zf_rd(sparse, partition)
            elif kind == prec.LABEL_RU_MMSE_RD:
                pset = prec.ru_mmse_rd(sparse, partition, pt, sigma_w2)
            else:
                raise ValueError(f"unknown kind {kind!r}")
            pset = prec.normalize_private_columns(pset)
        except (prec.RankDeficientChannelError, prec.EmptyClusterError):
            continue
        pset = prec.attach_common(pset, common)
        alloc = pw.equal_split(pt, delta, partition.n_clusters, k)
        inputs = rates.RateInputs(realization, sparse, partition, pset, cache,
                                  alloc, sigma_w2)
        return (inputs, zeta) if with_zeta else inputs
    raise RuntimeError(f"could not build a non-degenerate instance from seed {seed}")


def _closed_form_residual(seeds, sigma_e2_values) -> float:
    worst = 0.0
    for seed in seeds:
        for se2 in sigma_e2_values:
            for kind in rates.CLOSED_FORM_KINDS:
                inputs = random_instance(seed, sigma_e2=se2, kind=kind)
                for k in range(inputs.realization.g_hat.shape[1]):
                    pairs = (
                        (rates.sinr_closed_form(k, inputs, kind, "common"),
                         rates.sinr_common_generic(k, inputs)),
                        (rates.sinr_closed_form(k, inputs, kind, "private"),
                         rates.sinr_private_generic(k, inputs)),
                    )
                    for closed, generic in pairs:
                        scale = max(abs(generic), 1e-30)
                        worst = max(worst, abs(closed - generic) / scale)
    return worst


def verify(config: ExperimentConfig | None = None,
           corrupt: str | None = None) -> VerifyReport:
    """Run the cross-module consistency checks; see the CLI ``verify`` command.

    ``corrupt`` is a test hook: "zf" perturbs a zero-forcing precoder
    before the orthogonality check, which must then fail.
    """
    config = config or ExperimentConfig()
    checks: list[CheckResult] = []

    def add(name, residual, tol, detail=""):
        checks.append(CheckResult(name, bool(residual <= tol), float(residual),
                                  float(tol), detail))

    # three-slope continuity at both breakpoints
    att = chan.attenuation_constant(config.freq_mhz, config.h_ap_m, config.h_u_m)
    res = 0.0
    for d in (config.d0_m, config.d1_m):
        below = chan.path_loss(np.nextafter(d, 0.0), att, config.d0_m, config.d1_m)
        above = chan.path_loss(np.nextafter(d, np.inf), att, config.d0_m, config.d1_m)
        res = max(res, abs(float(below) - float(above)))
    add("path-loss continuity", res, 1e-9)

    # estimate reconstruction identity
    res = 0.0
    for seed in range(10):
        rng = seeded_rng(config.seed, seed, 900)
        geometry = chan.place_network(config.m, config.k, config.area_side_m, rng)
        zeta = chan.large_scale(geometry, config.shadow_sigma_db, rng)
        real = chan.draw_channel(zeta, math.sqrt(config.sigma_e2), rng)
        lhs = real.g_hat
        rhs = math.sqrt(1.0 - config.sigma_e2) * real.g_true + real.g_err
        res = max(res, float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs))))
    add("channel reconstruction identity", res, 1e-12)

    # partition invariants and deterministic replay
    bad = 0
    for seed in range(200):
        rng = seeded_rng(config.seed, seed, 901)
        z = rng.lognormal(size=(config.m, config.k))
        sel = clus.select_aps_threshold(z)
        n_a = clus.default_shared_ap_threshold(sel)
        part = clus.design_clusters(sel, n_a, z)
        again = clus.design_clusters(sel, n_a, z)
        users = sorted(u for s in part.user_sets for u in s)
        aps = [a for s in part.ap_sets for a in s]
        if users != list(range(config.k)) or len(aps) != len(set(aps)):
            bad += 1
        if (part.user_sets != again.user_sets or part.ap_sets != again.ap_sets
                or not np.array_equal(part.test_vectors, again.test_vectors)):
            bad += 1
    add("cluster partition invariants", float(bad), 0.0, "200 random selections")

    # zero-forcing orthogonality of the raw construction (with corruption hook)
    res = 0.0
    for seed in range(20):
        inputs = random_instance(seed, config.m, config.k, config.sigma_e2,
                                 kind=prec.LABEL_ZF_SP)
        g_bar = inputs.sparse.g_bar
        raw = prec.zf_sp(inputs.sparse, inputs.power.pt)
        private = raw.private.copy()
        if corrupt == "zf":
            private[0, 0] += 10.0 * np.max(np.abs(private))
        prod = g_bar.T @ (private / raw.beta)
        res = max(res, float(np.max(np.abs(prod - np.eye(config.k)))))
        scaled = g_bar.T @ private - raw.beta * np.eye(config.k)
        res = max(res, float(np.max(np.abs(scaled))))
    add("zero-forcing orthogonality", res, 1e-9)

    # power budget of amplitudes, covariance trace, and the printed trace
    # normalisation of the raw sparse constructions
    res_budget, res_cov, res_trace = 0.0, 0.0, 0.0
    for seed in range(20):
        for kind in (prec.LABEL_ZF_SP, prec.LABEL_MMSE_SP):
            inputs = random_instance(seed, config.m, config.k, config.sigma_e2,
                                     kind=kind, delta=0.4)
            alloc = inputs.power
            total = float(np.sum(alloc.a_c ** 2) + np.sum(alloc.a_p ** 2))
            res_budget = max(res_budget, total / alloc.pt - 1.0)
            cov = float(
                np.sum(alloc.a_c ** 2 * np.sum(np.abs(inputs.precoders.common) ** 2, axis=0))
                + np.sum(alloc.a_p ** 2 * np.sum(np.abs(inputs.precoders.private) ** 2, axis=0)))
            res_cov = max(res_cov, abs(cov - alloc.pt) / alloc.pt)
            raw = (prec.zf_sp(inputs.sparse, alloc.pt) if kind == prec.LABEL_ZF_SP
                   else prec.mmse_sp(inputs.sparse, alloc.pt, inputs.sigma_w2))
            trace = float(np.sum(np.abs(raw.private) ** 2))
            res_trace = max(res_trace, abs(trace - alloc.pt) / alloc.pt)
    add("amplitude power budget", res_budget, 1e-9)
    add("transmit covariance trace", res_cov, 1e-9)
    add("precoder trace normalisation", res_trace, 1e-9)

    # forcing a zero common fraction reproduces the conventional evaluation
    res = 0.0
    sigma_w2 = _noise(config)
    for seed in range(20):
        inputs = random_instance(seed, config.m, config.k, config.sigma_e2,
                                 kind=prec.LABEL_MF_SP, delta=0.0)
        rs_alloc = pw.equal_split(inputs.power.pt, 0.0, inputs.partition.n_clusters,
                                  config.k)
        rs_inputs = rates.RateInputs(inputs.realization, inputs.sparse,
                                     inputs.partition, inputs.precoders,
                                     inputs.svd_cache, rs_alloc, sigma_w2)
        plain = prec.normalize_private_columns(prec.mf_sp(inputs.sparse))
        cf_inputs = rates.RateInputs(inputs.realization, inputs.sparse,
                                     inputs.partition, plain, None,
                                     pw.no_split(inputs.power.pt, config.k),
                                     sigma_w2)
        res = max(res, abs(rates.instantaneous_rates(rs_inputs).sum_rate
                           - rates.instantaneous_rates(cf_inputs).sum_rate))
    add("zero-split collapse", res, 1e-12)

    # closed forms against the generic evaluator
    res = _closed_form_residual(range(10), (0.0, config.sigma_e2, 0.1))
    add("closed-form SINR equivalence", res, 1e-9, "10 seeds x 3 error levels")

    # per-AP cost stays flat when the network doubles at fixed cluster size
    r1 = _synthetic_flops_per_ap(32, 16, cluster_size=4)
    r2 = _synthetic_flops_per_ap(64, 32, cluster_size=4)
    add("complexity scaling per AP", abs(r2 - r1) / r1, 0.05)

    # tiny end-to-end run: additive rate decomposition and replay determinism
    small = ExperimentConfig(n_realizations=2, n_err=8, snr_grid_db=(0.0, 10.0),
                             schemes=("CF-MF-SP", "RS-CF-MF-SP"), seed=config.seed)
    rec1, _ = run_experiment(small)
    rec2, _ = run_experiment(small)
    res = max(abs(r.esr - (r.ecr + r.epr)) for r in rec1)
    add("ergodic rate decomposition", res, 1e-9)
    add("experiment replay determinism",
        0.0 if render_csv(rec1) == render_csv(rec2) else 1.0, 0.0)

    return VerifyReport(tuple(checks))


def _synthetic_flops_per_ap(m: int, k: int, cluster_size: int) -> float:
    n_c = k // cluster_size
    aps_per = m // n_c
    users = [tuple(range(i * cluster_size, (i + 1) * cluster_size)) for i in range(n_c)]
    aps = [tuple(range(i * aps_per, (i + 1) * aps_per)) for i in range(n_c)]
    tv = np.zeros((n_c, m), dtype=int)
    for i, a in enumerate(aps):
        tv[i, list(a)] = 1
    part = clus.ClusterPartition(tuple(users), tuple(aps), tv)
    return prec.flop_estimate(part, m, k, "mmse") / m
