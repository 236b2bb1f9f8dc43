"""protozsl: zero-shot recognition via coupled prototype and dictionary learning."""

from .datasets import (FitHistory, HyperParams, LabeledFeatureSet, ModelState,
                       UnlabeledFeatureSet, labels_from_onehot, onehot_from_labels)
from .estimator import ZeroShotPrototypeClassifier
from .exceptions import (GenerationError, MatrixFormatError, SingularSystemError,
                         ValidationError)
from .io import (DatasetManifest, SynthSpec, load_dataset, load_matrix,
                 save_dataset, save_matrix, synth_generate)
from .linalg import (gram_ridge_solve, normalize_columns, project_columns_unit_ball,
                     projected_descent, solve_sylvester_spd)
from .metrics import (EvalReport, evaluate_gzsl, evaluate_standard, harmonic_mean,
                      per_class_topk_accuracy)
from .objectives import (alignment_cost, encoding_cost_gzsl, encoding_cost_seen,
                         encoding_cost_unseen, total_objective, total_objective_bounded)
from .solver import (SolveReport, assignment_costs, fit, init_state, predict_inductive,
                     solve_seen, solve_unseen, update_Cu, update_Cu_gzsl, update_D,
                     update_P_sylvester, update_Pu_gzsl, update_Z)

__version__ = "0.1.0"

__all__ = [
    "FitHistory", "HyperParams", "LabeledFeatureSet", "ModelState", "UnlabeledFeatureSet",
    "labels_from_onehot", "onehot_from_labels",
    "ZeroShotPrototypeClassifier",
    "GenerationError", "MatrixFormatError", "SingularSystemError", "ValidationError",
    "DatasetManifest", "SynthSpec", "load_dataset", "load_matrix",
    "save_dataset", "save_matrix", "synth_generate",
    "gram_ridge_solve", "normalize_columns", "project_columns_unit_ball",
    "projected_descent", "solve_sylvester_spd",
    "EvalReport", "evaluate_gzsl", "evaluate_standard", "harmonic_mean",
    "per_class_topk_accuracy",
    "alignment_cost", "encoding_cost_gzsl", "encoding_cost_seen", "encoding_cost_unseen",
    "total_objective", "total_objective_bounded",
    "SolveReport", "assignment_costs", "fit", "init_state", "predict_inductive",
    "solve_seen", "solve_unseen", "update_Cu", "update_Cu_gzsl", "update_D",
    "update_P_sylvester", "update_Pu_gzsl", "update_Z",
    "__version__",
]
