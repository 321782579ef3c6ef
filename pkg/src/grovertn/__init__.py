"""Noisy Grover-search simulator over three state representations.

Compares brute-force dense evolution, matrix-product-state quantum
trajectories with pluggable unraveling strategies, and matrix-product
density operators on the same noisy search circuits, and fits the
success-probability decay laws in noise rate and qubit number.
"""

__version__ = "0.1.0"

from . import analytic, channels, dense, experiments, mpdo, tensornet, trajectories
from .channels import (
    GlobalDepolarizing,
    KrausChannel,
    apply_depolarizing_dense,
    local_superoperator,
    make_amplitude_damping,
    make_phase_flip,
    mix_channel,
    verify_completeness,
)
from .errors import (
    FitError,
    ImpossibleOutcomeError,
    NumericalError,
    ResourceError,
    StateError,
    ValidationError,
)
from .experiments import (
    FitResult,
    FitWindow,
    ScalingPoint,
    SweepSpec,
    fit_scaling,
    generate_synthetic,
    run_amplitude_damping_sweep,
    run_phase_flip_sweep,
    select_fit_window,
)
from .mpdo import MpdoState, lift_unitary_mpo, mpdo_from_pure_product, run_grover_mpdo
from .tensornet import (
    MpoOperator,
    MpsState,
    TruncationPolicy,
    build_diffusion_mpo,
    build_oracle_mpo,
    mps_from_dense,
    mps_from_product,
    uniform_mps,
)
from .trajectories import (
    EnsembleResult,
    TrajectoryConfig,
    TrajectoryRecord,
    UnravelingStrategy,
    dense_trajectory_crosscheck,
    optimize_mixing_entropy,
    optimize_mixing_nonunitarity,
    run_ensemble,
    step_trajectory,
)
