"""Finite-strain viscoelasticity with generalized strain measures."""

from .calibrate import (
    BranchTemplate,
    ExperimentDataset,
    FitResult,
    chi_squared,
    fit,
    nominal_stress_homogeneous,
)
from .errors import (
    EmptyDataset,
    FitDiverged,
    GlobalNewtonDiverged,
    InvalidParameters,
    LocalNewtonDiverged,
    NoVolumetricRoot,
    NonPositiveJacobian,
    NotPositiveDefinite,
    StateNotSPD,
    StepRejected,
    ViscokitError,
)
from .hyperelastic import HillBranch, VolumetricModel
from .kinbridge import MultiplicativePair, hencky_split_residual, invariant_triples
from .pointdriver import (
    Constant,
    LoadProgram,
    RampHold,
    Sinusoid,
    TimeSeries,
    run_strain_controlled,
    run_stress_controlled,
    solve_pressure,
)
from .projections import proj_L, proj_P, proj_P_tilde, proj_Q, proj_Q_inv
from .spectral import SpectralDecomp, decompose
from .strains import (
    check_axioms,
    check_coercivity,
    family_parameter_names,
    flory_split,
    make_scale,
    scale_function,
    strain_of,
    strain_tensor,
)
from .viscoelastic import (
    MaterialModel,
    MaxwellBranch,
    PointOutput,
    PointState,
    dissipation_rate,
    evaluate_point,
    integrate_state,
    isochoric_energy,
    stress_helmholtz_total,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "ViscokitError", "InvalidParameters", "NotPositiveDefinite",
    "NonPositiveJacobian", "NoVolumetricRoot", "LocalNewtonDiverged",
    "StateNotSPD", "GlobalNewtonDiverged", "StepRejected", "EmptyDataset",
    "FitDiverged",
    # kinematics and strain measures
    "SpectralDecomp", "decompose", "scale_function", "make_scale",
    "family_parameter_names", "check_axioms", "check_coercivity",
    "strain_tensor", "strain_of",
    "flory_split",
    # projections
    "proj_Q", "proj_Q_inv", "proj_L", "proj_P", "proj_P_tilde",
    # constitutive models
    "HillBranch", "VolumetricModel", "MaterialModel", "MaxwellBranch",
    "PointState", "PointOutput", "evaluate_point", "integrate_state",
    "stress_helmholtz_total", "dissipation_rate", "isochoric_energy",
    # drivers
    "LoadProgram", "RampHold", "Constant", "Sinusoid", "TimeSeries",
    "run_stress_controlled", "run_strain_controlled", "solve_pressure",
    # calibration
    "ExperimentDataset", "BranchTemplate", "FitResult", "fit",
    "chi_squared", "nominal_stress_homogeneous",
    # verification bridge
    "MultiplicativePair", "invariant_triples", "hencky_split_residual",
]
