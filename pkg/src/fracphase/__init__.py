"""Solvers and diagnostics for time-fractional phase-field equations.

The package provides the L1 family of time discretizations of the Caputo
derivative (first-order stabilized, first-order auxiliary-variable, and a
(2 - alpha)-order half-point auxiliary-variable scheme, on uniform and
arbitrary meshes), a Fourier pseudo-spectral periodic space discretization,
numerical certification of the structured matrices behind the discrete
energy laws, and an experiment harness that checks those laws on real runs.
"""

from .kernels import (
    TimeMesh,
    WeightSequence,
    apply_frac_derivative,
    apply_frac_derivative_history_form,
    l1_half_weights_nonuniform,
    l1_half_weights_uniform,
    l1_weights_nonuniform,
    l1_weights_uniform,
)
from .kernel_matrices import (
    CholeskyReport,
    build_frac_law_matrix,
    build_nonuniform_matrices,
    build_sav_matrices,
    build_weighted_law_matrix,
    check_special_cholesky,
    pd_oracle,
)
from .models import ModelKind, ModelSpec
from .schemes import (
    SchemeState,
    graded_mesh,
    step_l1_sav,
    step_l1_sav_nonuniform,
    step_sav_first_order,
    step_stabilized_l1,
    step_stabilized_l1_nonuniform,
)
from .spectral import Field2D, Grid2D, load_snapshot, save_snapshot
from .diagnostics import EnergyTrace, boundedness_check, evaluate_energy_laws, monotonicity_events

__version__ = "0.1.0"
