"""PASCAL VOC 2007 dataset model and parsers.

Boxes use the devkit convention: integer pixel coordinates, 1-based,
inclusive on both ends. They are stored verbatim, never re-based.
"""

from __future__ import annotations

import os
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import (
    InvalidBox,
    MalformedAnnotation,
    MalformedLine,
    MissingAnnotation,
    UnknownClass,
)

VOC_CLASSES = (
    "aeroplane", "bicycle", "bird", "boat", "bottle",
    "bus", "car", "cat", "chair", "cow",
    "diningtable", "dog", "horse", "motorbike", "person",
    "pottedplant", "sheep", "sofa", "train", "tvmonitor",
)

# Column headers used by the published comparison table.
SHORT_NAMES = dict(zip(VOC_CLASSES, (
    "aero", "bike", "bird", "boat", "bottle",
    "bus", "car", "cat", "chair", "cow",
    "table", "dog", "horse", "mbike", "person",
    "plant", "sheep", "sofa", "train", "tv",
)))
LONG_NAMES = {short: long for long, short in SHORT_NAMES.items()}

CLASS_INDEX = {name: i for i, name in enumerate(VOC_CLASSES)}

SPLITS = ("train", "val", "trainval", "test")


def check_class(name: str) -> str:
    """Return ``name`` if it is a canonical VOC class, else raise UnknownClass."""
    if name not in CLASS_INDEX:
        raise UnknownClass(f"unknown VOC class {name!r}")
    return name


def canonical_class(name: str) -> str:
    """Map a canonical name or a short display alias to the canonical name."""
    if name in CLASS_INDEX:
        return name
    if name in LONG_NAMES:
        return LONG_NAMES[name]
    raise UnknownClass(f"unknown VOC class {name!r}")


@dataclass(frozen=True, order=True)
class BoundingBox:
    """Axis-aligned box in inclusive integer pixel coordinates."""

    xmin: int
    ymin: int
    xmax: int
    ymax: int

    def __post_init__(self):
        for v in (self.xmin, self.ymin, self.xmax, self.ymax):
            if isinstance(v, bool) or not isinstance(v, int):
                raise InvalidBox(f"box coordinates must be integers, got {v!r}")
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise InvalidBox(
                f"inverted box ({self.xmin}, {self.ymin}, {self.xmax}, {self.ymax})"
            )

    @property
    def width(self) -> int:
        return self.xmax - self.xmin + 1

    @property
    def height(self) -> int:
        return self.ymax - self.ymin + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_list(self) -> list[int]:
        return [self.xmin, self.ymin, self.xmax, self.ymax]


@dataclass(frozen=True)
class GtObject:
    label: str
    box: BoundingBox
    difficult: bool = False

    def __post_init__(self):
        check_class(self.label)


@dataclass(frozen=True)
class ImageRecord:
    """One annotated image.

    ``label_set`` is derived from ``objects`` on access and never stored.
    ``width``/``height`` are kept when the annotation provides them but are
    not checked against the boxes.
    """

    image_id: str
    objects: tuple[GtObject, ...] = ()
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    @property
    def label_set(self) -> frozenset[str]:
        return frozenset(o.label for o in self.objects)


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of image records for one split."""

    split: str
    images: tuple[ImageRecord, ...]
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        images = tuple(self.images)
        index = {}
        for i, rec in enumerate(images):
            if rec.image_id in index:
                raise ValueError(f"duplicate image id {rec.image_id!r}")
            index[rec.image_id] = i
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.images)

    def __iter__(self) -> Iterator[ImageRecord]:
        return iter(self.images)

    def __contains__(self, image_id: object) -> bool:
        return image_id in self._index

    def __getitem__(self, image_id: str) -> ImageRecord:
        return self.images[self._index[image_id]]

    @property
    def image_ids(self) -> tuple[str, ...]:
        return tuple(rec.image_id for rec in self.images)


def _child_text(elem: ET.Element, tag: str, context: str) -> str:
    child = elem.find(tag)
    if child is None or child.text is None or not child.text.strip():
        raise MalformedAnnotation(f"{context}: missing <{tag}>")
    return child.text.strip()


def _parse_int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise MalformedAnnotation(f"{what}: non-integer value {text!r}") from None


def _parse_object(obj: ET.Element, n: int) -> GtObject:
    where = f"object {n}"
    name = _child_text(obj, "name", where)
    check_class(name)

    difficult = False
    diff_elem = obj.find("difficult")
    if diff_elem is not None and diff_elem.text is not None and diff_elem.text.strip():
        flag = _parse_int(diff_elem.text.strip(), f"{where} difficult")
        if flag not in (0, 1):
            raise MalformedAnnotation(f"{where}: difficult flag must be 0 or 1, got {flag}")
        difficult = bool(flag)

    bndbox = obj.find("bndbox")
    if bndbox is None:
        raise MalformedAnnotation(f"{where}: missing <bndbox>")
    coords = [
        _parse_int(_child_text(bndbox, tag, where), f"{where} {tag}")
        for tag in ("xmin", "ymin", "xmax", "ymax")
    ]
    return GtObject(name, BoundingBox(*coords), difficult)


def parse_annotation(xml_text: str | bytes, image_id: str | None = None) -> ImageRecord:
    """Parse one VOC annotation document.

    The image id is the stem of ``<filename>`` unless ``image_id`` is given,
    in which case ``<filename>`` may be absent.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise MalformedAnnotation(f"not well-formed XML: {exc}") from None
    if root.tag != "annotation":
        raise MalformedAnnotation(f"root element is <{root.tag}>, expected <annotation>")

    if image_id is None:
        image_id = os.path.splitext(_child_text(root, "filename", "annotation"))[0]

    width = height = None
    size = root.find("size")
    if size is not None:
        w, h = size.find("width"), size.find("height")
        if w is not None and w.text and w.text.strip():
            width = _parse_int(w.text.strip(), "size width")
        if h is not None and h.text and h.text.strip():
            height = _parse_int(h.text.strip(), "size height")

    objects = tuple(_parse_object(obj, n) for n, obj in enumerate(root.findall("object")))
    return ImageRecord(image_id, objects, width, height)


def parse_imageset(text: str) -> list[str]:
    """Parse a split file.

    Lines are either ``id`` or ``id flag`` (per-class files). In the second
    form only ids flagged ``1`` are returned; ``0`` marks a difficult-only
    image and ``-1`` an absent class.
    """
    ids = []
    for lineno, line in enumerate(text.splitlines(), 1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) > 2:
            raise MalformedLine(f"line {lineno}: expected 'id' or 'id flag', got {line!r}")
        if len(fields) == 2:
            try:
                flag = int(fields[1])
            except ValueError:
                flag = None
            if flag not in (-1, 0, 1):
                raise MalformedLine(f"line {lineno}: flag must be -1, 0 or 1, got {fields[1]!r}")
            if flag != 1:
                continue
        ids.append(fields[0])
    return ids


def _load_one(annotation_dir: Path, image_id: str) -> ImageRecord:
    path = annotation_dir / f"{image_id}.xml"
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise MissingAnnotation(f"no annotation for image {image_id!r} ({path})") from None
    try:
        return parse_annotation(data, image_id=image_id)
    except (MalformedAnnotation, UnknownClass, InvalidBox) as exc:
        raise type(exc)(f"{path}: {exc}") from None


def load_dataset(
    annotation_dir: str | os.PathLike,
    split_file: str | os.PathLike,
    split: str | None = None,
    workers: int = 1,
) -> Dataset:
    """Load every image listed in ``split_file`` from ``annotation_dir``.

    Records come back in split-file order whatever ``workers`` is.
    """
    annotation_dir = Path(annotation_dir)
    split_file = Path(split_file)
    ids = parse_imageset(split_file.read_text())
    if split is None:
        split = split_file.stem
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(lambda i: _load_one(annotation_dir, i), ids))
    else:
        records = [_load_one(annotation_dir, i) for i in ids]
    return Dataset(split, tuple(records))


def devkit_paths(root: str | os.PathLike, split: str) -> tuple[Path, Path]:
    """Annotation directory and split file inside a devkit-shaped tree."""
    root = Path(root)
    return root / "Annotations", root / "ImageSets" / "Main" / f"{split}.txt"


def load_devkit(root: str | os.PathLike, split: str, workers: int = 1) -> Dataset:
    annotations, split_file = devkit_paths(root, split)
    return load_dataset(annotations, split_file, split=split, workers=workers)


def image_level_labels(dataset: Iterable[ImageRecord]) -> dict[str, frozenset[str]]:
    """Class presence per image; difficult objects count as present."""
    return {rec.image_id: rec.label_set for rec in dataset}


def objects_by_class(
    dataset: Sequence[ImageRecord] | Dataset, label: str
) -> dict[str, list[GtObject]]:
    """Ground truth of one class, keyed by image id (images without it omitted)."""
    out = {}
    for rec in dataset:
        objs = [o for o in rec.objects if o.label == label]
        if objs:
            out[rec.image_id] = objs
    return out
