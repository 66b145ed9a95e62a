"""Detection geometry and ranked-retrieval math: IoU, greedy NMS, average
precision / mAP, and threshold-swept detection/recognition F1 scores.

Boxes are half-open pixel rectangles [x0, x1) x [y0, y1). All functions are
pure; evaluation accepts detections in any order and sorts internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import LogodetError

NO_LOGO = -1  # image-level label for "no logo present"

NUM_CLASSES = 32  # logo classes in the benchmark universe
BACKGROUND = NUM_CLASSES  # score-vector slot for the background class

# default threshold grid: 101 points, 0.00-1.00 step 0.01
THRESHOLD_GRID = tuple(i / 100 for i in range(101))


class MixedKeys(LogodetError):
    """Detections spanning multiple images or classes where one was required."""


class DuplicateImage(LogodetError):
    """The same image id appeared twice in a per-image list."""


class UnknownImage(LogodetError):
    """An image id that the ground truth does not know about."""


class Box(NamedTuple):
    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height


class Detection(NamedTuple):
    image_id: str
    class_id: int
    score: float
    box: Box


class F1Point(NamedTuple):
    threshold: float
    detection_f1: float
    recognition_f1: float


@dataclass
class EvalReport:
    """Per-class average precision plus their mean and raw PR points."""

    per_class_ap: list[float]
    map: float
    pr_points: dict[int, list[tuple[float, float]]]
    empty_classes: list[int] = field(default_factory=list)

    def to_dict(self):
        return {
            "per_class_ap": self.per_class_ap,
            "map": self.map,
            "pr_points": {str(c): pts for c, pts in self.pr_points.items()},
            "empty_classes": self.empty_classes,
        }


def iou(a: Box, b: Box) -> float:
    """Area of overlap over area of union; disjoint boxes yield 0."""
    ix = min(a.x1, b.x1) - max(a.x0, b.x0)
    iy = min(a.y1, b.y1) - max(a.y0, b.y0)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


def nms(dets: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy non-maximum suppression for one image and one class.

    Keeps the highest-scored detection, discards everything overlapping it
    above iou_threshold, repeats. Ties on score break lexicographically on
    the box so the result is deterministic.
    """
    if not dets:
        return []
    keys = {(d.image_id, d.class_id) for d in dets}
    if len(keys) > 1:
        raise MixedKeys(f"nms input spans multiple images/classes: {sorted(keys)}")
    remaining = sorted(dets, key=lambda d: (-d.score, d.box))
    kept: list[Detection] = []
    while remaining:
        top = remaining.pop(0)
        kept.append(top)
        remaining = [d for d in remaining if iou(top.box, d.box) <= iou_threshold]
    return kept


def average_precision(ranked: list[tuple[float, bool]], total_positives: int) -> float:
    """AP over a ranked list: sum of P(k) * delta-R(k) at every rank.

    `ranked` must be sorted by score descending; the recall denominator is
    total_positives. No positives yields 0 by convention.
    """
    if total_positives <= 0:
        return 0.0
    ap = 0.0
    tp = 0
    prev_recall = 0.0
    for k, (_score, is_tp) in enumerate(ranked, start=1):
        if is_tp:
            tp += 1
            precision = tp / k
            recall = tp / total_positives
            ap += precision * (recall - prev_recall)
            prev_recall = recall
    return ap


def match_detections(dets, gts, iou_min: float = 0.5):
    """PASCAL-style matching of detections against ground truth.

    Per class, detections are taken in descending score order; each one
    matches the highest-IoU not-yet-matched ground-truth box of its class in
    its image when that IoU reaches iou_min. A matched box is consumed, so a
    duplicate hit becomes a false positive.

    `gts` is an iterable of annotation records carrying image_id, class_id
    and boxes. Returns {class_id: (ranked [(score, is_tp)], total_positives)}.
    """
    if not 0 < iou_min <= 1:
        raise ValueError("iou_min must be in (0, 1]")
    gt_boxes: dict[tuple[int, str], list[Box]] = {}
    totals: dict[int, int] = {}
    for ann in gts:
        if ann.class_id == NO_LOGO:
            continue
        key = (ann.class_id, ann.image_id)
        gt_boxes.setdefault(key, []).extend(ann.boxes)
        totals[ann.class_id] = totals.get(ann.class_id, 0) + len(ann.boxes)

    by_class: dict[int, list[Detection]] = {}
    for det in dets:
        by_class.setdefault(det.class_id, []).append(det)

    result: dict[int, tuple[list[tuple[float, bool]], int]] = {}
    for class_id in set(totals) | set(by_class):
        matched: dict[tuple[int, str], list[bool]] = {}
        ranked = []
        ordered = sorted(
            by_class.get(class_id, ()), key=lambda d: (-d.score, d.image_id, d.box)
        )
        for det in ordered:
            key = (class_id, det.image_id)
            boxes = gt_boxes.get(key, ())
            flags = matched.setdefault(key, [False] * len(boxes))
            best, best_iou = -1, 0.0
            for i, gt_box in enumerate(boxes):
                if flags[i]:
                    continue
                overlap = iou(det.box, gt_box)
                if overlap > best_iou:
                    best, best_iou = i, overlap
            if best >= 0 and best_iou >= iou_min:
                flags[best] = True
                ranked.append((det.score, True))
            else:
                ranked.append((det.score, False))
        result[class_id] = (ranked, totals.get(class_id, 0))
    return result


def evaluate_map(dets, gts, iou_min: float = 0.5, num_classes: int = NUM_CLASSES) -> EvalReport:
    """Mean average precision over the full class universe.

    Classes with neither ground truth nor detections contribute AP 0 and are
    listed in empty_classes.
    """
    matched = match_detections(dets, gts, iou_min)
    per_class_ap = []
    pr_points: dict[int, list[tuple[float, float]]] = {}
    empty = []
    for class_id in range(num_classes):
        ranked, total = matched.get(class_id, ([], 0))
        per_class_ap.append(average_precision(ranked, total))
        if total == 0 and not ranked:
            empty.append(class_id)
        points = []
        tp = 0
        for k, (_score, is_tp) in enumerate(ranked, start=1):
            tp += int(is_tp)
            points.append((tp / k, tp / total if total else 0.0))
        pr_points[class_id] = points
    mean_ap = sum(per_class_ap) / num_classes if num_classes else 0.0
    return EvalReport(per_class_ap, mean_ap, pr_points, empty)


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def f1_curve(per_image_top, truth, thresholds=THRESHOLD_GRID) -> list[F1Point]:
    """Detection and recognition F1 at each threshold.

    An image is predicted as its top class when top_score >= t, else NO_LOGO.
    Detection scores the binary logo-vs-no-logo split; recognition requires
    the exact class, and a no-logo image predicted as some logo class counts
    against recognition precision. Zero-prediction / zero-positive
    denominators are treated as vacuously perfect (precision, recall = 1).
    """
    thresholds = list(thresholds)
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly increasing")

    truth_by_id: dict[str, int] = {}
    for image_id, true_class in truth:
        if image_id in truth_by_id:
            raise DuplicateImage(image_id)
        truth_by_id[image_id] = true_class

    tops: dict[str, tuple[int, float]] = {}
    for image_id, top_class, top_score in per_image_top:
        if image_id in tops:
            raise DuplicateImage(image_id)
        if image_id not in truth_by_id:
            raise UnknownImage(image_id)
        tops[image_id] = (top_class, top_score)
    if set(tops) != set(truth_by_id):
        missing = sorted(set(truth_by_id) - set(tops))
        raise UnknownImage(f"no top entry for: {missing[:5]}")

    logo_images = sum(1 for c in truth_by_id.values() if c != NO_LOGO)
    points = []
    for t in thresholds:
        det_tp = rec_correct = predicted_logo = 0
        for image_id, (top_class, top_score) in tops.items():
            if top_class == NO_LOGO or top_score < t:
                continue
            predicted_logo += 1
            true_class = truth_by_id[image_id]
            if true_class != NO_LOGO:
                det_tp += 1
                if true_class == top_class:
                    rec_correct += 1
        det_p = det_tp / predicted_logo if predicted_logo else 1.0
        det_r = det_tp / logo_images if logo_images else 1.0
        rec_p = rec_correct / predicted_logo if predicted_logo else 1.0
        rec_r = rec_correct / logo_images if logo_images else 1.0
        points.append(F1Point(t, _f1(det_p, det_r), _f1(rec_p, rec_r)))
    return points


def f1_curve_csv(points: list[F1Point]) -> str:
    lines = ["threshold,detection_f1,recognition_f1"]
    for p in points:
        lines.append(f"{p.threshold},{p.detection_f1},{p.recognition_f1}")
    return "\n".join(lines) + "\n"
