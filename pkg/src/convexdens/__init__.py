"""Grenander, least squares and maximum likelihood convex density estimators
on [0, inf) with pathwise verification of their characterisations and
sup-norm inequalities."""

__version__ = "0.1.0"

from .core import (
    Sample,
    TriangularMix,
    ecdf_eval,
    gram,
    gram_matrix,
    integrated_ecdf,
    mass,
    mix_cdf,
    mix_eval,
    mix_integrated_cdf,
    moment_term,
    validate_sample,
)
from .models import TrueModel, exponential, parse_model, triangular, triangular_mixture
from .grenander import StepDensity, grenander_fit, least_concave_majorant, marshall_check
from .cone import (
    FitConfig,
    FitResult,
    fit,
    lse_best_knot,
    lse_fit,
    lse_objective,
    lse_residual,
    mle_best_knot,
    mle_fit,
    mle_objective,
    mle_residual,
)
from .verification import (
    Lemma1Scenario,
    VerificationReport,
    check_lse_characterization,
    check_mle_characterization,
    check_prop1,
    lemma1_conclusion_check,
    proof_replay,
    sharpness_fixture,
    sup_inf_difference,
    theorem1_margins,
)
from .harness import ExperimentConfig, ExperimentRow, run_monte_carlo, sample_model
