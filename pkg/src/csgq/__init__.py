"""Graded quantization of compressive measurements for two-description coding."""

from .admm import (
    ConstraintGroup,
    DecoderConfig,
    ReconstructionResult,
    central_decode,
    oracle_decode,
    side_decode,
    stability_bound,
)
from .quantizer import (
    Description,
    Partition,
    QuantizerPair,
    combine_central,
    encode_descriptions,
    epsilon_central_sq,
    epsilon_l2,
    make_partition,
)
from .rd import (
    OperatingPoint,
    average_distortion,
    optimize_b_operational,
    optimize_b_oracle,
    sweep_tradeoff,
    theorem2_central_distortion,
    theorem2_side_distortion,
)
from .signal_model import (
    SensingModel,
    SparseSignal,
    distortion,
    estimate_rip_constant,
    gen_gaussian_sensing,
    gen_sparse_signal,
    measure,
)
from .transport import (
    ChannelModel,
    Packet,
    build_constraint_groups,
    gilbert_stationary,
    packetize,
    reassemble,
    transmit,
)

__version__ = "0.1.0"
