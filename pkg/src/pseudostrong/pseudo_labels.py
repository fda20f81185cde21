"""Turn weak-detector output into pseudo-strong VOC annotations.

The de-noising step drops every detection whose class is not among the
image-level labels of its image. Optional extras (NMS, a per-class cap) are
off by default and sit outside the original pipeline.
"""

from __future__ import annotations

import os
import xml.etree.ElementTree as ET
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .detections import Detection, DetectionSet
from .errors import UnknownImage
from .metrics import iou, rank_order
from .voc import Dataset, GtObject, ImageRecord

DEFAULT_NMS_IOU = 0.3

# Signature of a de-noising stage: (detections, image-level labels) -> detections.
Denoiser = Callable[[DetectionSet, Mapping[str, frozenset]], DetectionSet]


def class_consistency_filter(
    dets: DetectionSet, labels: Mapping[str, Iterable[str]]
) -> DetectionSet:
    """Drop detections whose class is absent from their image's labels."""
    kept = []
    for d in dets:
        try:
            present = labels[d.image_id]
        except KeyError:
            raise UnknownImage(f"no image-level labels for image {d.image_id!r}") from None
        if d.label in present:
            kept.append(d)
    return dets.replace(kept)


DENOISERS: dict[str, Denoiser] = {"class-consistency": class_consistency_filter}


def nms(dets: DetectionSet, iou_thr: float = DEFAULT_NMS_IOU) -> DetectionSet:
    """Greedy per-image, per-class non-maximum suppression.

    A detection survives iff its IoU with every higher-ranked survivor of
    its group is below ``iou_thr``. Survivors keep their input order.
    """
    if not 0.0 <= iou_thr <= 1.0:
        raise ValueError(f"iou_thr must lie in [0, 1], got {iou_thr}")
    groups: dict[tuple[str, str], list[int]] = defaultdict(list)
    for i, d in enumerate(dets):
        groups[d.image_id, d.label].append(i)

    keep = set()
    for members in groups.values():
        order = rank_order([dets[i].score for i in members])
        kept_boxes = []
        for k in order:
            i = members[k]
            box = dets[i].box
            if all(iou(box, other) < iou_thr for other in kept_boxes):
                kept_boxes.append(box)
                keep.add(i)
    return dets.replace(d for i, d in enumerate(dets) if i in keep)


def cap_per_class(dets: DetectionSet, max_per_class: int) -> DetectionSet:
    """Keep at most ``max_per_class`` top-scoring detections per (image, class)."""
    if max_per_class < 1:
        raise ValueError("max_per_class must be positive")
    groups: dict[tuple[str, str], list[int]] = defaultdict(list)
    for i, d in enumerate(dets):
        groups[d.image_id, d.label].append(i)
    keep = set()
    for members in groups.values():
        order = rank_order([dets[i].score for i in members])
        keep.update(members[k] for k in order[:max_per_class])
    return dets.replace(d for i, d in enumerate(dets) if i in keep)


@dataclass(frozen=True)
class PseudoLabelSet:
    """Pseudo ground truth per image. Images without boxes are absent."""

    images: dict[str, tuple[GtObject, ...]]
    provenance: str = ""
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.images)

    def to_records(self) -> list[ImageRecord]:
        return [ImageRecord(i, objs) for i, objs in self.images.items()]


def build_pseudo_labels(
    dets: DetectionSet,
    *,
    tau: float | None = None,
    labels_applied: bool | None = None,
    nms_iou: float | None = None,
    max_per_class: int | None = None,
) -> PseudoLabelSet:
    """Group surviving detections by image and drop their scores.

    The keyword arguments only describe how ``dets`` was produced; they
    are recorded, except ``max_per_class`` which is applied here.
    """
    if max_per_class is not None:
        dets = cap_per_class(dets, max_per_class)
    images: dict[str, list[GtObject]] = {}
    for d in dets:
        images.setdefault(d.image_id, []).append(GtObject(d.label, d.box, False))
    params = {
        "tau": tau,
        "labels_applied": labels_applied,
        "nms_iou": nms_iou,
        "max_per_class": max_per_class,
    }
    return PseudoLabelSet(
        {k: tuple(v) for k, v in images.items()}, dets.provenance, params
    )


def annotation_to_xml(record: ImageRecord, folder: str = "VOC2007") -> str:
    """Serialize a record as a VOC annotation document.

    ``parse_annotation`` on the result returns an equal record.
    """
    root = ET.Element("annotation")
    ET.SubElement(root, "folder").text = folder
    ET.SubElement(root, "filename").text = f"{record.image_id}.jpg"
    if record.width is not None or record.height is not None:
        size = ET.SubElement(root, "size")
        if record.width is not None:
            ET.SubElement(size, "width").text = str(record.width)
        if record.height is not None:
            ET.SubElement(size, "height").text = str(record.height)
        ET.SubElement(size, "depth").text = "3"
    for obj in record.objects:
        el = ET.SubElement(root, "object")
        ET.SubElement(el, "name").text = obj.label
        ET.SubElement(el, "pose").text = "Unspecified"
        ET.SubElement(el, "truncated").text = "0"
        ET.SubElement(el, "difficult").text = "1" if obj.difficult else "0"
        bb = ET.SubElement(el, "bndbox")
        for tag, v in zip(("xmin", "ymin", "xmax", "ymax"), obj.box.as_list()):
            ET.SubElement(bb, tag).text = str(v)
    ET.indent(root, space="\t")
    return ET.tostring(root, encoding="unicode") + "\n"


def _check_id(image_id: str) -> None:
    if not image_id or image_id in (".", "..") or any(c in image_id for c in "/\\\0"):
        raise ValueError(f"image id {image_id!r} cannot be used as a file name")


def write_devkit(
    records: Iterable[ImageRecord], out_dir: str | os.PathLike, split: str
) -> Path:
    """Write records as ``Annotations/<id>.xml`` plus ``ImageSets/Main/<split>.txt``.

    The split file lists ids sorted lexicographically and is written last.
    Returns the split file path.
    """
    out_dir = Path(out_dir)
    ann_dir = out_dir / "Annotations"
    set_dir = out_dir / "ImageSets" / "Main"
    ann_dir.mkdir(parents=True, exist_ok=True)
    set_dir.mkdir(parents=True, exist_ok=True)
    ids = []
    for rec in records:
        _check_id(rec.image_id)
        (ann_dir / f"{rec.image_id}.xml").write_text(annotation_to_xml(rec))
        ids.append(rec.image_id)
    split_file = set_dir / f"{split}.txt"
    split_file.write_text("".join(f"{i}\n" for i in sorted(ids)))
    return split_file


def export_voc(pl: PseudoLabelSet, out_dir: str | os.PathLike, split: str = "trainval") -> Path:
    """Export pseudo labels as a devkit-shaped tree loadable by ``load_devkit``."""
    return write_devkit(pl.to_records(), out_dir, split)


def dataset_objects(ds: Dataset) -> dict[str, tuple[GtObject, ...]]:
    return {rec.image_id: rec.objects for rec in ds if rec.objects}
