"""PASCAL VOC 2007 detection evaluation.

Matching follows the official devkit: detections of one class are visited
in descending score order (stable, so equal scores keep ingestion order),
each is compared against the ground truth of its own image, and the
best-overlap object decides the outcome. Difficult objects are left out of
the recall denominator; a detection whose best match is difficult counts
neither as a hit nor as a false alarm.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .detections import Detection, DetectionSet
from .errors import UnknownImage
from .voc import VOC_CLASSES, BoundingBox, Dataset, GtObject, objects_by_class

MODES = ("11pt", "area")

# Rule for classes with no non-difficult ground truth. Stored in report metadata.
NPOS_ZERO_RULE = (
    "classes without non-difficult ground truth score 0 if any detection of "
    "the class was counted (not ignored), otherwise they are excluded from mAP"
)
DIFFICULT_RULE = "difficult objects excluded from npos; detections matching them ignored"


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union with inclusive pixel coordinates."""
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin) + 1
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin) + 1
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


class Outcome(IntEnum):
    FP = 0
    TP = 1
    IGNORED = 2


@dataclass(frozen=True)
class MatchFlags:
    """Per-detection outcomes in evaluation (score-descending) order."""

    flags: tuple[Outcome, ...]
    npos: int
    scores: tuple[float, ...] = ()

    @property
    def n_tp(self) -> int:
        return sum(1 for f in self.flags if f == Outcome.TP)

    @property
    def n_fp(self) -> int:
        return sum(1 for f in self.flags if f == Outcome.FP)

    @property
    def n_ignored(self) -> int:
        return sum(1 for f in self.flags if f == Outcome.IGNORED)


def rank_order(scores: Sequence[float]) -> list[int]:
    """Indices sorting ``scores`` descending; ties keep input order."""
    return sorted(range(len(scores)), key=lambda i: -scores[i])


def match_detections(
    dets_of_class: Sequence[Detection],
    gt_of_class: Mapping[str, Sequence[GtObject]],
    iou_thr: float = 0.5,
) -> MatchFlags:
    """Greedy VOC matching for a single class.

    ``gt_of_class`` maps image ids to that class's ground-truth objects;
    images with no such objects may be omitted.
    """
    npos = sum(1 for objs in gt_of_class.values() for o in objs if not o.difficult)
    taken = {image_id: [False] * len(objs) for image_id, objs in gt_of_class.items()}

    order = rank_order([d.score for d in dets_of_class])
    flags = []
    for i in order:
        det = dets_of_class[i]
        objs = gt_of_class.get(det.image_id, ())
        best, best_j = -1.0, -1
        for j, obj in enumerate(objs):
            ov = iou(det.box, obj.box)
            if ov > best:
                best, best_j = ov, j
        if best_j >= 0 and best >= iou_thr:
            if objs[best_j].difficult:
                flags.append(Outcome.IGNORED)
            elif not taken[det.image_id][best_j]:
                taken[det.image_id][best_j] = True
                flags.append(Outcome.TP)
            else:
                flags.append(Outcome.FP)
        else:
            flags.append(Outcome.FP)
    return MatchFlags(tuple(flags), npos, tuple(dets_of_class[i].score for i in order))


@dataclass(frozen=True)
class PrCurve:
    recall: np.ndarray
    precision: np.ndarray

    def __len__(self) -> int:
        return len(self.recall)


def precision_recall(flags: MatchFlags) -> PrCurve:
    """Cumulative precision/recall, one point per counted detection.

    The curve is empty when there is nothing to recall (``npos == 0``).
    """
    counted = np.array([f for f in flags.flags if f != Outcome.IGNORED], dtype=np.int64)
    if flags.npos == 0 or counted.size == 0:
        return PrCurve(np.zeros(0), np.zeros(0))
    tp = np.cumsum(counted == Outcome.TP)
    fp = np.cumsum(counted == Outcome.FP)
    recall = tp / flags.npos
    precision = tp / (tp + fp)
    return PrCurve(recall, precision)


def average_precision_11pt(curve: PrCurve) -> float:
    """VOC2007 11-point interpolated AP.

    Recall levels are taken as k/10 exactly rather than accumulated in steps
    of 0.1, which would push 0.3 to 0.30000000000000004.
    """
    if len(curve) == 0:
        return 0.0
    total = 0.0
    for k in range(11):
        mask = curve.recall >= k / 10
        if mask.any():
            total += float(curve.precision[mask].max())
    return total / 11


def average_precision_area(curve: PrCurve) -> float:
    """Area under the interpolated (right-running-max) precision envelope."""
    if len(curve) == 0:
        return 0.0
    mrec = np.concatenate(([0.0], curve.recall, [1.0]))
    mpre = np.concatenate(([0.0], curve.precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def mean_ap(per_class: Mapping[str, float]) -> float:
    values = list(per_class.values())
    if not values:
        return 0.0
    return sum(values) / len(values)


@dataclass(frozen=True)
class ClassResult:
    label: str
    ap: float | None  # None: excluded (no ground truth and nothing counted)
    npos: int
    n_tp: int
    n_fp: int
    n_ignored: int


@dataclass(frozen=True)
class ApReport:
    """Per-class AP and mAP for one detection set.

    ``per_class`` holds only the classes that enter the mean, in canonical
    VOC order.
    """

    per_class: dict[str, float]
    mean_ap: float
    metadata: dict = field(default_factory=dict)
    npos: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_class": dict(self.per_class),
            "mAP": self.mean_ap,
            "npos": dict(self.npos),
            "metadata": dict(self.metadata),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ApReport":
        return cls(
            per_class={k: float(v) for k, v in doc["per_class"].items()},
            mean_ap=float(doc["mAP"]),
            metadata=dict(doc.get("metadata", {})),
            npos={k: int(v) for k, v in doc.get("npos", {}).items()},
        )

    @classmethod
    def from_json(cls, text: str) -> "ApReport":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_values(cls, per_class: Mapping[str, float], **metadata) -> "ApReport":
        ordered = {c: float(per_class[c]) for c in VOC_CLASSES if c in per_class}
        return cls(ordered, mean_ap(ordered), dict(metadata))


def _evaluate_class(label, dets, gt_of_class, iou_thr, mode) -> ClassResult:
    flags = match_detections(dets, gt_of_class, iou_thr)
    counted = flags.n_tp + flags.n_fp
    if flags.npos == 0:
        ap = 0.0 if counted else None
    else:
        curve = precision_recall(flags)
        if mode == "11pt":
            ap = average_precision_11pt(curve)
        else:
            ap = average_precision_area(curve)
    return ClassResult(label, ap, flags.npos, flags.n_tp, flags.n_fp, flags.n_ignored)


def evaluate(
    dets: DetectionSet | Iterable[Detection],
    gt: Dataset,
    iou_thr: float = 0.5,
    mode: str = "11pt",
    workers: int = 1,
) -> ApReport:
    """Evaluate detections against a ground-truth split.

    Classes are evaluated independently; ``workers > 1`` spreads them over
    threads without changing the result.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    by_class: dict[str, list[Detection]] = {c: [] for c in VOC_CLASSES}
    for det in dets:
        if det.image_id not in gt:
            raise UnknownImage(f"detection references image {det.image_id!r} not in split {gt.split!r}")
        by_class[det.label].append(det)

    def run(label):
        return _evaluate_class(label, by_class[label], objects_by_class(gt, label), iou_thr, mode)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, VOC_CLASSES))
    else:
        results = [run(c) for c in VOC_CLASSES]

    per_class = {r.label: r.ap for r in results if r.ap is not None}
    metadata = {
        "iou_threshold": iou_thr,
        "interpolation": mode,
        "split": gt.split,
        "provenance": getattr(dets, "provenance", ""),
        "difficult": DIFFICULT_RULE,
        "npos_zero_rule": NPOS_ZERO_RULE,
        "excluded_classes": [r.label for r in results if r.ap is None],
    }
    return ApReport(
        per_class=per_class,
        mean_ap=mean_ap(per_class),
        metadata=metadata,
        npos={r.label: r.npos for r in results},
    )
