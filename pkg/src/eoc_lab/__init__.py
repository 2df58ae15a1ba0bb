"""Edge-of-chaos initialisation toolkit for sparsity-inducing activations."""

from .activations import ActivationSpec
from .config import DEFAULT_TOLERANCES, Tolerances
from .finite_width import (
    DegenerateSlopeError,
    NloState,
    lemma_q1_closed_form,
    lemma_r_closed_form,
    log_theorem1_bound,
    nlo_trajectory,
    theorem1_bound,
)
from .gaussian import (
    QuadratureRule,
    erf,
    erf_inv,
    gauss_expect,
    gauss_expect_scaled_arg,
    normal_cdf,
    normal_quantile,
)
from .jacobian import JacobianMoments, error_moment_trajectory, jacobian_moments
from .maps import (
    CorrelationPoint,
    MapDiagnostics,
    chi1,
    chi1_prime,
    correlation_map,
    correlation_map_precise,
    correlation_point,
    diagnostics,
    v_map,
    v_map_quadrature,
    v_prime,
    v_prime2,
)
from .simulator import LayerStats, SimConfig, run_backward, run_correlation, run_forward
from .solver import (
    EocInit,
    FixedPoint,
    FixedPointReport,
    InfeasibleTargetError,
    critical_gain,
    find_fixed_points,
    init_from_m,
    relu_init,
    solve_init,
    sparsity_threshold,
)
from .trainer import TrainConfig, TrainReport, train

__version__ = "0.1.0"

__all__ = [
    "ActivationSpec",
    "CorrelationPoint",
    "DEFAULT_TOLERANCES",
    "DegenerateSlopeError",
    "EocInit",
    "FixedPoint",
    "FixedPointReport",
    "InfeasibleTargetError",
    "JacobianMoments",
    "LayerStats",
    "MapDiagnostics",
    "NloState",
    "QuadratureRule",
    "SimConfig",
    "Tolerances",
    "TrainConfig",
    "TrainReport",
    "chi1",
    "chi1_prime",
    "correlation_map",
    "correlation_map_precise",
    "correlation_point",
    "critical_gain",
    "diagnostics",
    "erf",
    "erf_inv",
    "error_moment_trajectory",
    "find_fixed_points",
    "gauss_expect",
    "gauss_expect_scaled_arg",
    "init_from_m",
    "jacobian_moments",
    "lemma_q1_closed_form",
    "lemma_r_closed_form",
    "log_theorem1_bound",
    "nlo_trajectory",
    "normal_cdf",
    "normal_quantile",
    "relu_init",
    "run_backward",
    "run_correlation",
    "run_forward",
    "solve_init",
    "sparsity_threshold",
    "theorem1_bound",
    "train",
    "v_map",
    "v_map_quadrature",
    "v_prime",
    "v_prime2",
]
