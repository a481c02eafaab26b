"""Semi-supervised Gaussian mixture classification over precomputed features.

A mixture of full-covariance Gaussians shares components across classes
through a component-class probability table; EM jointly fits labeled and
unlabeled samples. The pipeline adds PCA reduction, K-means++
initialization, one balanced pseudo-labeling round between two EM phases,
a softmax-head baseline for ablations, and an exact-hash train/test
deduplication tool.
"""

from .baseline import (
    BaselineConfig,
    SoftmaxHead,
    head_proba,
    ramp_weight,
    supervised_grad,
    supervised_loss,
    train_baseline,
    unsupervised_grad,
    unsupervised_loss,
)
from .dataio import (
    FeatureMatrix,
    LabelSet,
    read_features,
    read_labels,
    split_labeled,
    write_features,
    write_labels,
)
from .dedup import (
    DedupReport,
    ImageHash,
    ImageManifest,
    build_test_index,
    hash_image,
    run_dedup,
    scan_train,
    write_report,
)
from .pca import PcaModel, explained_variance_report, fit_pca, read_pca, transform, write_pca
from .pipeline import RunConfig, RunMetrics, evaluate, run, run_repeated, sweep
from .pseudo import (
    PseudoConfig,
    PseudoLabelSet,
    augment,
    build_candidates,
    proportional_sample,
    score_unlabeled,
)
from .sgmm import (
    EmConfig,
    Responsibilities,
    SgmmModel,
    e_step,
    fit_em,
    kmeanspp_init,
    log_likelihood,
    m_step,
    predict,
    predict_proba,
    read_model,
    write_model,
)
from .synth import BlobSpec, make_blobs, write_blob_dataset

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig",
    "BlobSpec",
    "DedupReport",
    "EmConfig",
    "FeatureMatrix",
    "ImageHash",
    "ImageManifest",
    "LabelSet",
    "PcaModel",
    "PseudoConfig",
    "PseudoLabelSet",
    "Responsibilities",
    "RunConfig",
    "RunMetrics",
    "SgmmModel",
    "SoftmaxHead",
    "augment",
    "build_candidates",
    "build_test_index",
    "e_step",
    "evaluate",
    "explained_variance_report",
    "fit_em",
    "fit_pca",
    "hash_image",
    "head_proba",
    "kmeanspp_init",
    "log_likelihood",
    "m_step",
    "make_blobs",
    "predict",
    "predict_proba",
    "proportional_sample",
    "ramp_weight",
    "read_features",
    "read_labels",
    "read_model",
    "read_pca",
    "run",
    "run_dedup",
    "run_repeated",
    "scan_train",
    "score_unlabeled",
    "split_labeled",
    "supervised_grad",
    "supervised_loss",
    "sweep",
    "train_baseline",
    "transform",
    "unsupervised_grad",
    "unsupervised_loss",
    "write_blob_dataset",
    "write_features",
    "write_labels",
    "write_model",
    "write_pca",
    "write_report",
]
