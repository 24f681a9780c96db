"""Ergodic capacity and achievable rates of an RIS-aided single-RF MIMO link.

The transmitter encodes information both in its symbols and in the phase
pattern of a reconfigurable intelligent surface; the receiver estimates the
cascaded channel from pilots. Rates are evaluated by Monte-Carlo over the
channel estimate and noise, with exact sums over the finite input alphabet.
"""

from .errors import CapacityExceeded, InvalidParameter, NoDataSubBlocks
from .estimation import (
    EstimatorModel,
    PilotBlock,
    build_estimator,
    enumerate_pilot_blocks,
    estimate,
    perfect_estimator,
    sample_estimate_prior,
    structured_pilot_block,
    training_output,
)
from .model import (
    Constellation,
    EffectiveInput,
    PhaseSet,
    SystemConfig,
    enumerate_inputs,
    enumerate_inputs_fixed_phase,
    kron_lift,
    make_ask,
    make_config,
    make_phase_set,
    make_psk,
    sample_channel,
)
from .optimize import OptimizerSettings, maximize_distribution, search_phase_pattern, search_pilots, sweep_discrete
from .rates import (
    InputDistribution,
    conditional_cgf,
    likelihood_ratio_check,
    mahalanobis_sq,
    mi_oracle_scalar,
    shaped_covariance,
    u_value,
)
from .schemes import (
    MonteCarlo,
    RateEstimate,
    evaluate,
    high_snr_limit,
    lower_bound,
    mutual_info,
    rate_capacity_csir,
    rate_capacity_csit,
    rate_layered,
    rate_max_snr,
    rate_perfect_csi,
)

__version__ = "0.1.0"
