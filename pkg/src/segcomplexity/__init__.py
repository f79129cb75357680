"""Subjective visual complexity of images from segmentation-derived features.

The toolkit turns per-image segmentation outputs (class-agnostic segments
plus named class instances, shipped in a line-delimited interchange format)
into three regressors — sqrt(num_seg), sqrt(num_class), patch symmetry —
fits a plain linear model per image-set, and evaluates it with repeated
k-fold cross-validation scored by Spearman rank correlation.
"""

from .dataset import (
    BUILTIN_GROUPINGS,
    DatasetManifest,
    GroupingScheme,
    ImageSet,
    build_image_sets,
    join_features,
    merge_categories,
    normalize_ratings,
    read_manifest,
)
from .evaluation import (
    BinGrid,
    CvReport,
    FoldAssignment,
    binned_stats,
    cross_validate,
    default_repeats,
    error_vs_symmetry,
    kfold_splits,
    pearson,
    spearman,
)
from .features import (
    FeatureConfig,
    FeatureVector,
    build_feature_vector,
    count_class_instances,
    count_segments,
    patch_symmetry,
    rgb_to_gray,
)
from .maskio import (
    BinaryMask,
    ClassInstance,
    RunLengthMask,
    SegmentationRecord,
    decode_rle,
    encode_rle,
    load_record,
    read_dataset,
    validate_record,
    write_dataset,
)
from .regress import DesignMatrix, RegressionModel, fit_ols, predict

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_GROUPINGS",
    "BinGrid",
    "BinaryMask",
    "ClassInstance",
    "CvReport",
    "DatasetManifest",
    "DesignMatrix",
    "FeatureConfig",
    "FeatureVector",
    "FoldAssignment",
    "GroupingScheme",
    "ImageSet",
    "RegressionModel",
    "RunLengthMask",
    "SegmentationRecord",
    "binned_stats",
    "build_feature_vector",
    "build_image_sets",
    "count_class_instances",
    "count_segments",
    "cross_validate",
    "decode_rle",
    "default_repeats",
    "encode_rle",
    "error_vs_symmetry",
    "fit_ols",
    "join_features",
    "kfold_splits",
    "load_record",
    "merge_categories",
    "normalize_ratings",
    "patch_symmetry",
    "pearson",
    "predict",
    "read_dataset",
    "read_manifest",
    "rgb_to_gray",
    "spearman",
    "validate_record",
    "write_dataset",
]
