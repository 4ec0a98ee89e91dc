"""Over-parameterized factored gradient descent for noisy low-rank PSD matrix
recovery, with hold-out validation for early stopping."""

from .core import (
    Factor,
    GroundTruth,
    RngSpec,
    SymMatrix,
    SvdConvergenceError,
    derive_seed,
    gaussian_noise,
    generate_ground_truth,
    sym_svd,
)
from .operators import (
    RipEstimate,
    SensingOperator,
    adjoint,
    apply,
    build_completion_operator,
    build_gaussian_operator,
    check_perturbation_bounds,
    estimate_rip,
    load_operator,
    measurement_scale,
    save_operator,
)
from .recovery import (
    DivergenceError,
    GdConfig,
    IterateRecord,
    Trajectory,
    gradient,
    init_factor,
    run_gd,
    train_loss,
    trajectory_to_csv,
)
from .diagnostics import (
    PhaseQuantities,
    make_phase_hook,
    make_recovery_hook,
    phase_quantities,
    recovery_error,
    signal_error_decompose,
)
from .validation import (
    SelectionResult,
    SplitSpec,
    check_val_concentration,
    make_val_hook,
    select_iterate,
    selection_bound_rhs,
    split_measurements,
    trajectory_concentration,
    validation_loss,
)

__version__ = "0.1.0"
