"""Distribution-free goodness-of-fit testing for covariate-dependent
Bernoulli trials via a per-subgroup unitary rotation of the empirical
process."""

__version__ = "0.1.0"

from .errors import (
    DegeneracyWarning, EstimationError, IdentifiabilityError, ModelEvaluationError,
    ReplicationFailureError, RotatestError, SingularInformationError,
)
from .models import BUILTIN_ORDER, ModelSpec, available_models, evaluate_model, get_model, register_model
from .sampler import TrialSample, decode_lex, encode_lex, generate_sample, stream
from .mle import FitResult, fit_mle, log_likelihood
from .rotation import (
    SignRelation, build_bundle, build_reference_basis, build_U, build_U_m1_closed_form,
    group_probabilities, information_matrix, sign_consistency,
)
from .process import KSResult, ks_statistic, process_surface, rotated_process_value
from .montecarlo import EDFSample, Experiment, ExperimentConfig, edf_evaluate, run_experiment
from .permtest import PValueMatrix, pair_pvalue, pvalue_matrix, randomization_pvalue, two_sample_ks_distance
