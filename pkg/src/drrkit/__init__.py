"""drrkit: orthographic chest projections, mask measurements, and evaluation.

The package covers three stages of a volumetric-to-radiographic pipeline:
projecting CT volumes and per-structure label volumes into PA/LL images and
footprints, deriving graded chest measurements from the 2D masks, and
scoring predicted masks against references with the usual segmentation and
agreement statistics.
"""

__version__ = "0.1.0"

from .io import (FormatError, LabelVolume, Mask2D, Projection, ValidationError,
                 View, Volume, load_label_volume, load_mask, load_projection,
                 load_volume, save_label_volume, save_mask, save_projection,
                 save_volume)
from .measurement import (Condition, Grade, MeasurementResult, apex_angle,
                          cardiothoracic_ratio, centroid, clean_mask,
                          compose_thorax, endpoint_tangent_angle,
                          fit_spine_curve, grade, kyphosis_angle,
                          max_row_width, scoliosis_angle)
from .metrics import (ClassSetReport, MetricsReport, boundary_distance_metrics,
                      boundary_pixels, component_detection, dice_iou,
                      evaluate_class_set, evaluate_pair)
from .projection import (ProjectionConfig, StudyProjection, attenuation_transform,
                         normalize_to_8bit, project_image, project_mask,
                         project_study, resample_and_orient)
from .stats import (BootstrapCI, EffectSizes, KappaResult, OrdinalMetrics,
                    PairedSample, PairwiseComparison, WilcoxonResult, bonferroni,
                    bootstrap_ci, confusion_from_labels, effect_sizes,
                    ordinal_metrics, pairwise_model_comparison, weighted_kappa,
                    wilcoxon_signed_rank)

__all__ = [
    "__version__",
    # io
    "FormatError", "LabelVolume", "Mask2D", "Projection", "ValidationError",
    "View", "Volume", "load_label_volume", "load_mask", "load_projection",
    "load_volume", "save_label_volume", "save_mask", "save_projection",
    "save_volume",
    # projection
    "ProjectionConfig", "StudyProjection", "attenuation_transform",
    "normalize_to_8bit", "project_image", "project_mask", "project_study",
    "resample_and_orient",
    # measurement
    "Condition", "Grade", "MeasurementResult", "apex_angle",
    "cardiothoracic_ratio", "centroid", "clean_mask", "compose_thorax",
    "endpoint_tangent_angle", "fit_spine_curve", "grade", "kyphosis_angle",
    "max_row_width", "scoliosis_angle",
    # metrics
    "ClassSetReport", "MetricsReport", "boundary_distance_metrics",
    "boundary_pixels", "component_detection", "dice_iou", "evaluate_class_set",
    "evaluate_pair",
    # stats
    "BootstrapCI", "EffectSizes", "KappaResult", "OrdinalMetrics",
    "PairedSample", "PairwiseComparison", "WilcoxonResult", "bonferroni",
    "bootstrap_ci", "confusion_from_labels", "effect_sizes", "ordinal_metrics",
    "pairwise_model_comparison", "weighted_kappa", "wilcoxon_signed_rank",
]
