"""Label-noise analysis: noise models, loss audits, calibration and MLP experiments."""
from .calibration import (
    binned_reliability,
    decision_agreement,
    exact_calibration_map,
    expected_entropy_pair,
    noisy_minimizer_calibration,
)
from .core import argmax_class, entropy, make_rng, prob_vector, random_simplex, simplex_grid
from .losses import (
    analytic_minimizer,
    csp_counterexample,
    eval_loss,
    get_loss,
    pointwise_minimizers,
    pointwise_risk,
    properness_test,
    robustness_test,
    symmetry_sum,
)
from .noise import NoiseModel, clean_conditional, flip_labels, noisy_conditional, transition_row
from .problem import DiscreteProblem

__version__ = "0.1.0"
