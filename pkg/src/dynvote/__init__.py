"""Multi-view random forests combined by static and dynamic weighted voting."""

from .data_io import (
    SynthSpec,
    ViewManifest,
    generate_synthetic,
    load_dataset,
    load_model,
    read_manifest,
    save_model,
)
from .dissimilarity import Neighborhood, neighborhood, rfd, rfd_to_training
from .evaluation import (
    EvalReport,
    SplitPlan,
    average_rank,
    run_protocol,
    sign_test,
    stratified_split,
)
from .exceptions import (
    DimensionMismatchError,
    IngestionError,
    InvalidInputError,
    ModelFormatError,
    ModelVersionError,
    UndefinedAccuracyError,
)
from .forest import (
    Dataset,
    DecisionTree,
    ForestConfig,
    RandomForest,
    leaf_id,
    oob_accuracy,
    oob_accuracy_subset,
    oob_subforest_predict,
    predict_label,
    predict_proba,
    train_forest,
    train_tree,
)
from .multiview import MultiViewDataset, ViewEnsemble, predict, train_multiview
from .voting import (
    GDV,
    GLDV,
    LDV,
    MV,
    WRF,
    Combiner,
    VoteRecord,
    WeightVector,
    combine_vote,
    dynamic_vote,
    gl_weight,
    global_weight,
    glnew,
    glnew_weight,
    local_weight,
    static_weights,
    vote_batch,
)

__version__ = "0.1.0"
