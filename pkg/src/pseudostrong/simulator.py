"""Seeded noise model producing synthetic weak-detector dumps from ground truth.

Each image gets its own random stream, ``Rng(seed).split(i)`` for the
image at split position ``i``. Within an image the draws are, per object
in order: miss (1 uniform); if kept, four corner offsets (4 normals, order
xmin, ymin, xmax, ymax), flip (1 uniform), the replacement class when
flipped (1 randint), and the score (1 uniform). Then one Poisson draw gives
the spurious count, and each spurious box draws x, x, y, y, class and
score in that order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .detections import DEFAULT_TAU, Detection, DetectionSet, round_half_away, threshold_filter
from .errors import InvalidParams
from .metrics import ApReport, evaluate
from .pseudo_labels import class_consistency_filter
from .rng import Rng, check_seed
from .voc import VOC_CLASSES, BoundingBox, Dataset, GtObject, ImageRecord, image_level_labels

# Modal VOC image size, used when an annotation carries none.
DEFAULT_EXTENT = (500, 375)


def _check_interval(name, iv):
    try:
        lo, hi = (float(v) for v in iv)
    except (TypeError, ValueError):
        raise InvalidParams(f"{name} must be a (lo, hi) pair") from None
    if not 0.0 <= lo <= hi <= 1.0:
        raise InvalidParams(f"{name} must satisfy 0 <= lo <= hi <= 1, got {iv!r}")
    return lo, hi


@dataclass(frozen=True)
class NoiseParams:
    jitter_sigma: float = 0.0
    miss_prob: float = 0.0
    flip_prob: float = 0.0
    spurious_rate: float = 0.0
    score_tp: tuple[float, float] = (1.0, 1.0)
    score_noise: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if not self.jitter_sigma >= 0:
            raise InvalidParams(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        if not self.spurious_rate >= 0:
            raise InvalidParams(f"spurious_rate must be >= 0, got {self.spurious_rate}")
        for name in ("miss_prob", "flip_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidParams(f"{name} must lie in [0, 1], got {p}")
        object.__setattr__(self, "score_tp", _check_interval("score_tp", self.score_tp))
        object.__setattr__(self, "score_noise", _check_interval("score_noise", self.score_noise))

    def as_dict(self) -> dict:
        return {
            "jitter_sigma": self.jitter_sigma,
            "miss_prob": self.miss_prob,
            "flip_prob": self.flip_prob,
            "spurious_rate": self.spurious_rate,
            "score_tp": list(self.score_tp),
            "score_noise": list(self.score_noise),
        }


def _clamp(v, lo, hi):
    return max(lo, min(hi, v))


def perturb_box(
    box: BoundingBox,
    sigma: float,
    bounds: tuple[int, int] | None,
    rng: Rng,
) -> BoundingBox:
    """Jitter each corner coordinate by a rounded Gaussian offset.

    Inverted coordinates are swapped back and, when ``bounds`` (width,
    height) is given, clamped to ``[1, width] x [1, height]``. Four normals
    are drawn even for ``sigma == 0``, which returns ``box`` unchanged.
    """
    offsets = [round_half_away(sigma * rng.normal()) for _ in range(4)]
    if not any(offsets):
        return box
    x1, y1, x2, y2 = (c + o for c, o in zip(box.as_list(), offsets))
    x1, x2 = min(x1, x2), max(x1, x2)
    y1, y2 = min(y1, y2), max(y1, y2)
    if bounds is not None:
        w, h = bounds
        x1, x2 = _clamp(x1, 1, w), _clamp(x2, 1, w)
        y1, y2 = _clamp(y1, 1, h), _clamp(y2, 1, h)
    return BoundingBox(x1, y1, x2, y2)


def _flip(label: str, rng: Rng) -> str:
    k = rng.randint(0, len(VOC_CLASSES) - 2)
    own = VOC_CLASSES.index(label)
    return VOC_CLASSES[k + 1 if k >= own else k]


def _image_extent(rec: ImageRecord) -> tuple[int, int]:
    w = rec.width if rec.width else DEFAULT_EXTENT[0]
    h = rec.height if rec.height else DEFAULT_EXTENT[1]
    return w, h


def corrupt_image(rec: ImageRecord, params: NoiseParams, rng: Rng) -> list[Detection]:
    bounds = (rec.width, rec.height) if rec.width and rec.height else None
    out = []
    for obj in rec.objects:
        if rng.bernoulli(params.miss_prob):
            continue
        box = perturb_box(obj.box, params.jitter_sigma, bounds, rng)
        label = obj.label
        flipped = rng.bernoulli(params.flip_prob)
        if flipped:
            label = _flip(label, rng)
        score = rng.uniform(*(params.score_noise if flipped else params.score_tp))
        out.append(Detection(rec.image_id, label, score, box))

    w, h = _image_extent(rec)
    for _ in range(rng.poisson(params.spurious_rate)):
        xa, xb = rng.randint(1, w), rng.randint(1, w)
        ya, yb = rng.randint(1, h), rng.randint(1, h)
        label = VOC_CLASSES[rng.randint(0, len(VOC_CLASSES) - 1)]
        score = rng.uniform(*params.score_noise)
        box = BoundingBox(min(xa, xb), min(ya, yb), max(xa, xb), max(ya, yb))
        out.append(Detection(rec.image_id, label, score, box))
    return out


def corrupt_dataset(gt: Dataset, params: NoiseParams, seed: int, workers: int = 1) -> DetectionSet:
    """Synthetic detector output for every image of ``gt``, in split order."""
    root = Rng(check_seed(seed))
    jobs = list(enumerate(gt.images))

    def run(job):
        i, rec = job
        return corrupt_image(rec, params, root.split(i))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(run, jobs))
    else:
        chunks = [run(j) for j in jobs]
    dets = [d for chunk in chunks for d in chunk]
    return DetectionSet(tuple(dets), f"simulated(seed={seed})")


def make_synthetic_dataset(
    n_images: int,
    seed: int,
    max_objects: int = 4,
    difficult_prob: float = 0.1,
    split: str = "trainval",
) -> Dataset:
    """Random VOC-shaped ground truth for desk-scale experiments."""
    root = Rng(check_seed(seed))
    images = []
    for i in range(n_images):
        rng = root.split(i)
        w, h = rng.randint(300, 500), rng.randint(250, 500)
        objects = []
        for _ in range(rng.randint(1, max_objects)):
            label = VOC_CLASSES[rng.randint(0, len(VOC_CLASSES) - 1)]
            bw, bh = rng.randint(16, w // 2), rng.randint(16, h // 2)
            x1, y1 = rng.randint(1, w - bw + 1), rng.randint(1, h - bh + 1)
            difficult = rng.bernoulli(difficult_prob)
            objects.append(GtObject(label, BoundingBox(x1, y1, x1 + bw - 1, y1 + bh - 1), difficult))
        images.append(ImageRecord(f"{i:06d}", tuple(objects), w, h))
    return Dataset(split, tuple(images))


def ablation(
    gt: Dataset,
    params: NoiseParams,
    seed: int,
    tau: float = DEFAULT_TAU,
    mode: str = "11pt",
) -> tuple[ApReport, ApReport]:
    """Evaluate a simulated dump with and without the class-consistency filter.

    Both conditions share the score threshold; only the filter differs.
    Returns ``(raw_report, filtered_report)``.
    """
    raw = threshold_filter(corrupt_dataset(gt, params, seed), tau)
    filtered = class_consistency_filter(raw, image_level_labels(gt))
    return evaluate(raw, gt, mode=mode), evaluate(filtered, gt, mode=mode)
