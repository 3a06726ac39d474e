"""Topological feature extraction and tree-ensemble classification for 3D volumes.

The pipeline: load a volume, normalize to [0, 255], window a slab of slices,
build the cubical sublevel filtration, compute persistence in dimensions
0/1/2, vectorize the diagram as Betti curves, then train and evaluate the
classifiers. Each stage is importable here; the ``topovox`` console script
drives the same stages end to end.
"""

from .betti_features import (
    N_FEATURES,
    BettiFeatureVector,
    betti_curve,
    featurize,
    featurize_diagram,
    read_features_csv,
    threshold_grid,
    write_features_csv,
)
from .cubical import CubicalCell, FilteredCubicalComplex, build_filtration
from .errors import (
    FormatError,
    InsufficientDataError,
    InternalInvariantError,
    InvalidDataError,
    OutOfRangeError,
    TopovoxError,
    TruncationError,
    UnsupportedDatatypeError,
)
from .evaluate import (
    EvalReport,
    compute_metrics,
    confusion_matrix,
    encode_labels,
    rank_auc,
    split_80_20,
    stratified_kfold,
)
from .homology import (
    PersistenceDiagram,
    PersistencePair,
    betti_curve_from_diagram,
    betti_rank_oracle,
    compute_persistence,
    euler_curve,
)
from .learn import (
    BoostedParams,
    Forest,
    ForestParams,
    best_tau,
    load_model,
    pca_project,
    predict,
    save_model,
    select_features,
    sweep_tau,
    train_boosted,
    train_forest,
)
from .volume_io import (
    VALID_LABELS,
    Volume3D,
    extract_slab,
    load_volume_file,
    normalize,
    parse_nifti,
    parse_raw,
    read_manifest,
)

__version__ = "0.1.0"

__all__ = [
    "N_FEATURES",
    "VALID_LABELS",
    "BettiFeatureVector",
    "BoostedParams",
    "CubicalCell",
    "EvalReport",
    "FilteredCubicalComplex",
    "Forest",
    "ForestParams",
    "FormatError",
    "InsufficientDataError",
    "InternalInvariantError",
    "InvalidDataError",
    "OutOfRangeError",
    "PersistenceDiagram",
    "PersistencePair",
    "TopovoxError",
    "TruncationError",
    "UnsupportedDatatypeError",
    "Volume3D",
    "best_tau",
    "betti_curve",
    "betti_curve_from_diagram",
    "betti_rank_oracle",
    "build_filtration",
    "compute_metrics",
    "compute_persistence",
    "confusion_matrix",
    "encode_labels",
    "euler_curve",
    "extract_slab",
    "featurize",
    "featurize_diagram",
    "load_model",
    "load_volume_file",
    "normalize",
    "parse_nifti",
    "parse_raw",
    "pca_project",
    "predict",
    "rank_auc",
    "read_features_csv",
    "read_manifest",
    "save_model",
    "select_features",
    "split_80_20",
    "stratified_kfold",
    "sweep_tau",
    "threshold_grid",
    "train_boosted",
    "train_forest",
    "write_features_csv",
]
