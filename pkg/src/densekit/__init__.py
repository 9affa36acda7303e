"""densekit: data and inference tooling for densely packed object detection.

Box geometry, dataset statistics, crop augmentation with IoU-threshold
clipping, Monte-Carlo crop coverage, tunable greedy NMS, L9(3^4)
orthogonal-design search with analysis of range, COCO-style mmAP with a
configurable maxDet, and anchor positive-sample analysis. No neural
network training anywhere.
"""

from .geometry import Box, ImageDims, box_scale, intersect, iou, pairwise_iou, rescale_factor
from .dataset import (
    AnnotationError,
    CountStats,
    Dataset,
    Histogram,
    ImageRecord,
    IngestReport,
    count_stats,
    load_annotations,
    scale_histogram,
    small_object_fraction,
)
from .augment import (
    SEVEN,
    UNIFORM,
    CropResult,
    CropWindow,
    apply_crop,
    sample_crop,
    seven_crop_anchors,
)
from .coverage import CoverageDistribution, simulate_coverage, union_area
from .nms import Detection, NmsConfig, nms
from .doe import AnorReport, FactorSpec, anor, build_l9, run_experiment, validate_l9
from .evalmap import EvalConfig, EvalResult, average_precision, evaluate
from .sampler import (
    AnchorConfig,
    AssignConfig,
    AssignResult,
    SamplerConfig,
    assign,
    cap_sample,
    generate_anchors,
    positive_histogram,
)

__version__ = "0.1.0"
