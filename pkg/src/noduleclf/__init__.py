"""noduleclf: benign/malignant lung nodule classification from annotated
CT slices.

The pipeline runs in stages: load annotated images, rasterize the outlines,
extract a 29-dimensional feature vector per nodule (geometry + gray-level
histogram + oriented-gradient histogram), select a classifier by stratified
cross-validation with threshold tuning, and evaluate with Se/Sp/Accuracy/F
and ROC/AUC. Every stage is also reachable through the `noduleclf` CLI.
"""

from .classifiers import (
    ClassifierConfig,
    LabeledSet,
    TrainedClassifier,
    load_model,
    save_model,
    train_model,
)
from .dataset import Dataset, load_manifest, split_train_test
from .errors import ContractError, InputError, PipelineError
from .evaluation import ConfusionCounts, Metrics, RocCurve, auc, confusion, metrics, roc_curve
from .features import (
    FeatureTable,
    FeatureVector,
    Standardizer,
    feature_names,
    fit_standardizer,
    nodule_features,
    read_feature_csv,
    write_feature_csv,
)
from .imaging import GrayImage, Mask, Polygon, load_gray_image, rasterize_polygon
from .selection import default_grid, grid_search, kfold_split, train_final, tune_threshold
from .synthetic import generate_synthetic, write_synthetic_dataset

__version__ = "0.1.0"

__all__ = [
    "ClassifierConfig",
    "ConfusionCounts",
    "ContractError",
    "Dataset",
    "FeatureTable",
    "FeatureVector",
    "GrayImage",
    "InputError",
    "LabeledSet",
    "Mask",
    "Metrics",
    "PipelineError",
    "Polygon",
    "RocCurve",
    "Standardizer",
    "TrainedClassifier",
    "auc",
    "confusion",
    "default_grid",
    "feature_names",
    "fit_standardizer",
    "generate_synthetic",
    "write_synthetic_dataset",
    "grid_search",
    "kfold_split",
    "load_gray_image",
    "load_manifest",
    "load_model",
    "metrics",
    "nodule_features",
    "rasterize_polygon",
    "read_feature_csv",
    "roc_curve",
    "save_model",
    "split_train_test",
    "train_final",
    "train_model",
    "tune_threshold",
    "write_feature_csv",
    "__version__",
]
