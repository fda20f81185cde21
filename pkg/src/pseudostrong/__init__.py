"""Pseudo-strong labels from weakly supervised detections, and VOC2007 evaluation."""

__version__ = "0.1.0"

from .detections import Detection, DetectionSet, read_dump, threshold_filter, write_dump
from .metrics import ApReport, evaluate, iou, mean_ap
from .pseudo_labels import (
    PseudoLabelSet,
    build_pseudo_labels,
    class_consistency_filter,
    export_voc,
    nms,
)
from .simulator import NoiseParams, corrupt_dataset
from .voc import (
    VOC_CLASSES,
    BoundingBox,
    Dataset,
    GtObject,
    ImageRecord,
    image_level_labels,
    load_dataset,
    parse_annotation,
    parse_imageset,
)
