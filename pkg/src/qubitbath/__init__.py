"""qubitbath: reservoir engineering of a cavity mode by entangled qubit streams."""

from .channels import (
    KrausMap,
    LindbladModel,
    apply_channel,
    fixed_point,
    integrate_lindblad,
    kraus_from_dilation,
    resonant_propagator,
)
from .fock_space import (
    DEFAULT_N_MAX,
    DensityMatrix,
    FockOperator,
    ResonantBlocks,
    SqueezeTarget,
    annihilation_op,
    displacement_op,
    parity_op,
    quadrature_op,
    resonant_blocks,
    squeeze_op,
    tail_mass,
    vacuum_state,
)
from .imperfections import (
    ImperfectionConfig,
    SqueezingScan,
    decay_kraus,
    dephased_pair,
    moment_steady,
    optimize_squeezing,
)
from .observables import QuadratureStats, fidelity, quad_stats, squeezing_db, wigner
from .pair_reservoir import (
    PairState,
    PairTuning,
    TuningReport,
    pair_kraus,
    pair_lindblad,
    simulate_pair_reservoir,
    tune,
)
from .stream_reservoir import (
    JointState,
    ReducedStreamState,
    StreamSteadyPrediction,
    embed,
    entangler,
    find_optimal_phi,
    lift_and_project,
    mps_coefficients,
    perturbative_steady,
    phi_map,
    reduced_step,
    simulate_stream_reservoir,
    stream_kraus,
    stream_step,
    upsilon_map,
)

__all__ = [
    "DEFAULT_N_MAX",
    "DensityMatrix",
    "FockOperator",
    "ImperfectionConfig",
    "JointState",
    "KrausMap",
    "LindbladModel",
    "PairState",
    "PairTuning",
    "QuadratureStats",
    "ReducedStreamState",
    "ResonantBlocks",
    "SqueezeTarget",
    "SqueezingScan",
    "StreamSteadyPrediction",
    "TuningReport",
    "annihilation_op",
    "apply_channel",
    "decay_kraus",
    "dephased_pair",
    "displacement_op",
    "embed",
    "entangler",
    "fidelity",
    "find_optimal_phi",
    "fixed_point",
    "integrate_lindblad",
    "kraus_from_dilation",
    "lift_and_project",
    "moment_steady",
    "mps_coefficients",
    "optimize_squeezing",
    "pair_kraus",
    "pair_lindblad",
    "parity_op",
    "perturbative_steady",
    "phi_map",
    "quad_stats",
    "quadrature_op",
    "reduced_step",
    "resonant_blocks",
    "resonant_propagator",
    "simulate_pair_reservoir",
    "simulate_stream_reservoir",
    "squeeze_op",
    "squeezing_db",
    "stream_kraus",
    "stream_step",
    "tail_mass",
    "tune",
    "upsilon_map",
    "vacuum_state",
    "wigner",
]

__version__ = "0.1.0"
