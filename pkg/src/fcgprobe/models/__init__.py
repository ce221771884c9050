from .knn import KnnModel, knn_distances, knn_predict
from .labels import BENIGN, MALWARE
from .mlp import MlpConfig, MlpModel, mlp_predict, mlp_train
from .serialize import model_load, model_load_with_meta, model_save
from .trees import (
    BoostConfig,
    Constraint,
    ConstraintSet,
    DecisionTree,
    ForestConfig,
    TreeEnsemble,
    adaboost_train,
    extract_benign_constraints,
    forest_train,
    sat_count,
)

__all__ = [
    "BENIGN", "MALWARE",
    "KnnModel", "knn_distances", "knn_predict",
    "MlpConfig", "MlpModel", "mlp_predict", "mlp_train",
    "model_load", "model_load_with_meta", "model_save",
    "BoostConfig", "Constraint", "ConstraintSet", "DecisionTree", "ForestConfig",
    "TreeEnsemble", "adaboost_train", "extract_benign_constraints", "forest_train", "sat_count",
]
