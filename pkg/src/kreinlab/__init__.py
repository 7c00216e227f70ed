"""Semibounded extensions of a 1D Schrodinger operator with a singular potential,
their cut-off regularizations, and resolvent convergence experiments."""

__version__ = "0.1.0"

from .errors import (ConfigError, DecompositionError, DivergentIntegralError,
                     EigenSolverError, KreinLabError, ShiftError)
from .forms import (AssembledOperator, DeficiencyBasis, ExtensionSpec, QuadraticForm,
                    assemble_extension, lower_bound, perturb_form, reparameterize_form)
from .mesh import Mesh, build_mesh, cutoff_radius
from .schrodinger import (FULL, AdmissibilityCurve, FormBoundEstimate, RegularizingSequence,
                          SingularPotential, admissibility_curve, assemble_stiffness_mass,
                          deficiency_basis, estimate_form_bound, potential_form)
from .spectral import (Shift, ShiftedSolver, lowest_eigenpairs, min_resolvent_diff_eigenvalue,
                       resolvent_apply, resolvent_diff_norm, resolvent_diff_spectrum)
from .oracle import (CorrespondenceReport, RandomInstance, generate_instance, run_oracle,
                     verify_correspondence)
from .lab import (ConvergenceReport, Experiment, ExperimentConfig, run_admissibility,
                  run_convergence, run_spectrum_tracking)

__all__ = [
    "__version__",
    "AdmissibilityCurve", "AssembledOperator", "ConfigError", "ConvergenceReport",
    "CorrespondenceReport", "DecompositionError", "DeficiencyBasis", "DivergentIntegralError",
    "EigenSolverError", "Experiment", "ExperimentConfig", "ExtensionSpec", "FULL",
    "FormBoundEstimate", "KreinLabError", "Mesh", "QuadraticForm", "RandomInstance",
    "RegularizingSequence", "Shift", "ShiftError", "ShiftedSolver", "SingularPotential",
    "admissibility_curve", "assemble_extension", "assemble_stiffness_mass", "build_mesh",
    "cutoff_radius", "deficiency_basis", "estimate_form_bound", "generate_instance",
    "lower_bound", "lowest_eigenpairs", "min_resolvent_diff_eigenvalue", "perturb_form",
    "potential_form", "reparameterize_form", "resolvent_apply", "resolvent_diff_norm",
    "resolvent_diff_spectrum", "run_admissibility", "run_convergence", "run_oracle",
    "run_spectrum_tracking", "verify_correspondence",
]
