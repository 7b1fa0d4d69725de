"""Joint communication and sensing optimization for RIS-assisted MIMO
systems under a physically-consistent mutual-coupling model."""

__version__ = "0.1.0"

from .channels import (
    ChannelSet,
    GeometryLayout,
    MultipathSpec,
    build_channel_set,
    colocated_bs_layout,
    generate_multipath_channel,
    self_interference_channel,
    total_comm_channel,
)
from .config import ExperimentConfig, load_config, save_config
from .coupling import (
    CONVENTIONAL,
    PHYSICALLY_CONSISTENT,
    CouplingMatrix,
    EffectiveReflection,
    PhaseShiftVector,
    ScatteringMatrix,
    build_coupling_matrix,
    effective_reflection,
    scattering_from_coupling,
)
from .errors import (
    ConfigError,
    DomainError,
    EmptyInput,
    GeometryError,
    NumericalAbort,
    QuadratureError,
    RisJcasError,
    ShapeError,
    SingularReflection,
    UnsupportedBits,
)
from .geometry import (
    SteeringVector,
    UlaSpec,
    UpaSpec,
    ula_steering,
    ula_steering_derivative,
    upa_steering,
    upa_steering_derivative,
)
from .metrics import (
    BISTATIC,
    MONOSTATIC,
    FiSummary,
    SensingMatrices,
    SensingScene,
    TransmitCovariance,
    bi_fi_diag,
    build_sensing_matrices,
    fi_diag,
    fi_quadratic_form,
    grad_rx_objective,
    grad_upsilon_fi,
    grad_upsilon_mi,
    mono_fi_diag,
    mutual_information,
    weighted_objective,
)
from .optimizer import (
    OptimizationResult,
    OptimizerConfig,
    alternating_optimize,
    ascent_step,
    average_gradient_over_weights,
    pareto_sweep,
    project_psd_trace,
    project_unit_modulus,
    solve_covariance,
)
from .quantization import (
    DELTA_OPT,
    QuantizedFiResult,
    QuantizerSpec,
    build_midriser,
    draw_transmit_batch,
    empirical_covariance,
    quantize,
    quantized_fim,
    si_quantization_study,
    unquantized_fim,
)
