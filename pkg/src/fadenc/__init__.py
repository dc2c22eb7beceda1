"""Packet delivery delay, throughput and energy over log-normal AR(1) fading
channels, uncoded and with random linear network coding."""

from .channel import (
    Ar1Params,
    ChannelTrace,
    LognormalParams,
    QuantizedChain,
    estimate_a1,
    gen_ar1_trace,
    lognormal_moments,
    lognormal_pdf,
    psd_ar1,
    quantize_chain,
    stationary_distribution,
)
from .coding import (
    CodedConfig,
    CodedPlan,
    DofDistribution,
    energy_coded,
    expected_time_coded,
    optimize_energy,
    optimize_ni,
    round_success_distribution,
)
from .delay import (
    DelayTable,
    ErasureProfile,
    erasure_from_gain,
    erasure_profile_from_trace,
    expected_time_chain,
    expected_time_uncoded,
    stationary_erasure,
    transition_probs,
)
from .errors import ConvergenceError, DegenerateInputError, DomainError, ValidationError
from .kernels import BACKEND
from .link import (
    CorrelationMatrix,
    LinkBudget,
    McEstimate,
    PowerPolicy,
    ber_adaptive,
    ber_correlated,
    ber_fixed,
    effective_power,
    joint_lognormal_density,
    outage_threshold,
    packet_erasure,
    q2,
    q_function,
    q_inverse,
    qn,
    sample_lognormal_sum,
)
from .mcsim import ResultTable, SimConfig, SimResult, default_ni_max, run_episode, run_episodes, sweep
from .precode import Decomposition, build_precoder, decompose_correlation, jacobi_eigh, transformed_covariance

__version__ = "0.1.0"
