"""Detector dump format and the score threshold.

A dump is JSON Lines, one detection per line::

    {"image_id": "000005", "class": "chair", "score": 0.734, "bbox": [263, 211, 324, 339]}

Boxes are integers in the VOC inclusive convention. Producers holding
real-valued boxes should convert them with :func:`round_half_away`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .errors import InvalidBox, MalformedRecord, ScoreOutOfRange, UnknownClass
from .voc import BoundingBox, check_class

DEFAULT_TAU = 0.1

_FIELDS = ("image_id", "class", "score", "bbox")


def round_half_away(x: float) -> int:
    """Round to the nearest integer, halves away from zero (2.5 -> 3, -2.5 -> -3)."""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class Detection:
    image_id: str
    label: str
    score: float
    box: BoundingBox

    def __post_init__(self):
        check_class(self.label)
        if not 0.0 <= self.score <= 1.0:
            raise ScoreOutOfRange(f"score {self.score!r} outside [0, 1]")


@dataclass(frozen=True)
class DetectionSet:
    """Detections in ingestion order, plus a free-text provenance tag."""

    detections: tuple[Detection, ...] = ()
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))

    def __len__(self) -> int:
        return len(self.detections)

    def __iter__(self) -> Iterator[Detection]:
        return iter(self.detections)

    def __getitem__(self, i):
        return self.detections[i]

    def replace(self, detections: Iterable[Detection]) -> "DetectionSet":
        return DetectionSet(tuple(detections), self.provenance)


def _record_to_detection(obj: object) -> Detection:
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not a JSON object")
    missing = [k for k in _FIELDS if k not in obj]
    if missing:
        raise MalformedRecord(f"missing field(s): {', '.join(missing)}")
    extra = sorted(set(obj) - set(_FIELDS))
    if extra:
        raise MalformedRecord(f"unexpected field(s): {', '.join(extra)}")

    image_id, label, score, bbox = (obj[k] for k in _FIELDS)
    if not isinstance(image_id, str) or not image_id:
        raise MalformedRecord("image_id must be a non-empty string")
    if not isinstance(label, str):
        raise MalformedRecord("class must be a string")
    if isinstance(score, bool) or not isinstance(score, (int, float)) or not math.isfinite(score):
        raise MalformedRecord(f"score must be a finite number, got {score!r}")
    if (
        not isinstance(bbox, list)
        or len(bbox) != 4
        or any(isinstance(v, bool) or not isinstance(v, int) for v in bbox)
    ):
        raise MalformedRecord(f"bbox must be a list of 4 integers, got {bbox!r}")
    return Detection(image_id, label, float(score), BoundingBox(*bbox))


def read_dump(stream: IO[str] | Iterable[str], provenance: str = "") -> DetectionSet:
    """Read a JSON Lines dump. Errors carry the 1-based line number."""
    if not provenance:
        provenance = getattr(stream, "name", "") or ""
        if not isinstance(provenance, str):
            provenance = ""
    dets = []
    for lineno, line in enumerate(stream, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"line {lineno}: invalid JSON ({exc.msg})") from None
        try:
            dets.append(_record_to_detection(obj))
        except (MalformedRecord, UnknownClass, ScoreOutOfRange, InvalidBox) as exc:
            err = type(exc)(f"line {lineno}: {exc}")
            err.lineno = lineno
            raise err from None
    return DetectionSet(tuple(dets), provenance)


def format_detection(det: Detection) -> str:
    record = {
        "image_id": det.image_id,
        "class": det.label,
        "score": det.score,
        "bbox": det.box.as_list(),
    }
    return json.dumps(record)


def write_dump(dets: Iterable[Detection], stream: IO[str]) -> None:
    """Write detections as JSON Lines with a fixed field order.

    Floats go through ``repr`` so scores survive a read back bit-for-bit.
    """
    for det in dets:
        stream.write(format_detection(det))
        stream.write("\n")


def dumps(dets: Iterable[Detection]) -> str:
    return "".join(format_detection(d) + "\n" for d in dets)


def threshold_filter(dets: DetectionSet, tau: float = DEFAULT_TAU) -> DetectionSet:
    """Keep detections with ``score >= tau``, in their original order."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return dets.replace(d for d in dets if d.score >= tau)
