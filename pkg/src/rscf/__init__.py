"""Clustered cell-free multi-user MIMO downlink simulator with rate splitting.

Monte Carlo link-level evaluation of ergodic sum rates under imperfect
transmitter-side channel knowledge, with user-centric AP clustering, one
SVD multicast beam per cluster, matched-filter / zero-forcing / MMSE
private precoders (sparse and reduced-dimension variants) and a grid
search over the common-stream power fraction.
"""
from .channel import (ChannelRealization, LargeScaleCoefficients, NetworkGeometry,
                      attenuation_constant, draw_channel, large_scale, noise_variance,
                      path_loss, place_network, pt_for_snr, snr_db)
from .clustering import (ClusterPartition, SelectionMatrix, SparseChannel,
                         design_clusters, design_clusters_fixed, select_aps_threshold,
                         select_aps_topn, sparse_channel)
from .config import ConfigError, ExperimentConfig
from .power import PowerAllocation, allocate_common, uniform_private
from .precoding import (EmptyClusterError, PrecoderSet, RankDeficientChannelError,
                        SvdCache, common_precoder, flop_estimate, mf_sp, mmse_sp,
                        network_wide, normalize_private_budget, normalize_private_columns,
                        precoder_dump, ru_mmse_rd, ru_zf_rd, zf_sp)
from .rates import (AsrResult, EsrResult, RateInputs, RateReport, average_sum_rate,
                    ergodic_sum_rate, instantaneous_rates, sinr_closed_form,
                    sinr_common_generic, sinr_private_generic)
from .harness import ResultRecord, TrialRow, run_experiment, run_trial, verify

__version__ = "0.1.0"
