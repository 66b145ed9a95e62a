"""End-to-end flow: proposals -> region scores -> per-class NMS -> image-level
decision with a no-logo threshold, plus corpus-level evaluation (mAP and
threshold-swept F1) and positive/negative region sampling for training.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from .dataset import CorpusIndex
from .image import Image, read_image
from .metrics import (
    BACKGROUND,
    NO_LOGO,
    THRESHOLD_GRID,
    Box,
    Detection,
    EvalReport,
    F1Point,
    UnknownImage,
    evaluate_map,
    f1_curve,
    iou,
    nms,
)
from .scoring import BaselineModel, MalformedScoreFile, score_regions
from .selective_search import FAST, ProposalSet, SearchMode, propose

DEFAULT_THRESHOLD = 0.3  # generic operating point
TABLE_THRESHOLDS = (0.32, 0.4, 0.81)  # published operating points

DEFAULT_NMS_IOU = 0.3


class BaselineScorer:
    """Scores proposals with the built-in histogram baseline."""

    needs_image = True

    def __init__(self, model: BaselineModel):
        self.model = model
        self.scorer_id = "baseline-histogram"

    def __call__(self, img: Image, proposals: ProposalSet):
        return score_regions(self.model, img, proposals)


class FileScorer:
    """Serves scores preloaded from a score file; never touches pixels."""

    needs_image = False

    def __init__(self, scores_by_image: dict, label: str = "scores"):
        self.scores_by_image = scores_by_image
        self.scorer_id = f"file:{label}"

    def proposal_sets(self) -> dict[str, ProposalSet]:
        """The score file's own boxes as per-image proposal sets."""
        return {
            image_id: ProposalSet(image_id, tuple(r.box for r in regions), "file")
            for image_id, regions in self.scores_by_image.items()
        }

    def __call__(self, img, proposals: ProposalSet):
        if proposals.image_id not in self.scores_by_image:
            raise UnknownImage(f"no scores for image {proposals.image_id!r}")
        regions = self.scores_by_image[proposals.image_id]
        by_box = {}
        for region in regions:
            by_box.setdefault(region.box, region)
        try:
            return [by_box[box] for box in proposals.boxes]
        except KeyError as exc:
            raise MalformedScoreFile(
                f"image {proposals.image_id!r}: no scores for box {tuple(exc.args[0])}"
            ) from None


@dataclass
class ImageDecision:
    image_id: str
    detections: list[Detection]  # post-NMS, score-descending
    top: Detection | None
    predicted_label: int  # class id or NO_LOGO
    no_proposals: bool = False

    def to_dict(self):
        return {
            "image_id": self.image_id,
            "predicted_label": self.predicted_label,
            "top": None
            if self.top is None
            else {"class_id": self.top.class_id, "score": self.top.score, "box": list(self.top.box)},
            "detections": [
                {"class_id": d.class_id, "score": d.score, "box": list(d.box)}
                for d in self.detections
            ],
            "no_proposals": self.no_proposals,
        }


def detect_image(
    img: Image | None,
    proposals: ProposalSet,
    scorer,
    nms_iou: float = DEFAULT_NMS_IOU,
    threshold: float = DEFAULT_THRESHOLD,
    emit_all_classes: bool = False,
) -> ImageDecision:
    """Score proposals, keep each region's best non-background class, run
    per-class NMS, and decide the image label from the top survivor.

    An empty proposal set is not an error: the image is predicted NO_LOGO
    with the no_proposals flag raised.
    """
    if not 0 <= threshold <= 1:
        raise ValueError("threshold must be in [0, 1]")
    image_id = proposals.image_id
    if not proposals.boxes:
        return ImageDecision(image_id, [], None, NO_LOGO, no_proposals=True)

    raw: list[Detection] = []
    for region in scorer(img, proposals):
        if emit_all_classes:
            for class_id in range(BACKGROUND):
                raw.append(Detection(image_id, class_id, float(region.scores[class_id]), region.box))
            continue
        best = int(region.scores.argmax())
        if best == BACKGROUND:
            continue
        raw.append(Detection(image_id, best, float(region.scores[best]), region.box))

    kept: list[Detection] = []
    for class_id in sorted({d.class_id for d in raw}):
        kept.extend(nms([d for d in raw if d.class_id == class_id], nms_iou))
    kept.sort(key=lambda d: (-d.score, d.class_id, d.box))

    top = kept[0] if kept else None
    predicted = top.class_id if top is not None and top.score >= threshold else NO_LOGO
    return ImageDecision(image_id, kept, top, predicted)


class LabeledRegion(NamedTuple):
    box: Box
    label: int  # class id, or BACKGROUND


def sample_training_regions(
    proposals: ProposalSet,
    gts,
    pos_iou: float = 0.5,
    neg_iou_range: tuple[float, float] = (0.1, 0.5),
) -> list[LabeledRegion]:
    """Label proposals for classifier training: max-IoU >= pos_iou takes the
    matched ground truth's class, max-IoU inside neg_iou_range becomes
    background, everything else is discarded.

    `gts` is an iterable of (class_id, Box) pairs for the same image.
    """
    gts = list(gts)
    neg_lo, neg_hi = neg_iou_range
    out = []
    for box in proposals.boxes:
        best_class, best_iou = BACKGROUND, 0.0
        for class_id, gt_box in gts:
            overlap = iou(box, gt_box)
            if overlap > best_iou:
                best_class, best_iou = class_id, overlap
        if best_iou >= pos_iou:
            out.append(LabeledRegion(box, best_class))
        elif neg_lo <= best_iou < neg_hi:
            out.append(LabeledRegion(box, BACKGROUND))
    return out


@dataclass
class RunReport:
    config: dict
    decisions: list[ImageDecision]
    eval: EvalReport
    f1_points: list[F1Point]
    operating: F1Point
    zero_predictions: bool = False

    def to_dict(self):
        return {
            "config": self.config,
            "decisions": [d.to_dict() for d in self.decisions],
            "eval": self.eval.to_dict(),
            "f1_curve": [list(p) for p in self.f1_points],
            "operating": {
                "threshold": self.operating.threshold,
                "detection_f1": self.operating.detection_f1,
                "recognition_f1": self.operating.recognition_f1,
            },
            "zero_predictions": self.zero_predictions,
        }


_WORKER: dict = {}


def _init_worker(root, scorer, settings):
    _WORKER["root"] = root
    _WORKER["scorer"] = scorer
    _WORKER["settings"] = settings


def _image_proposals(img, image_id, settings, preset):
    if preset is not None:
        return preset
    mode, sigma, min_size = settings["mode"], settings["sigma"], settings["min_size"]
    return propose(img, mode, image_id=image_id, sigma=sigma, min_size=min_size)


def _process_image(payload):
    image_id, preset_proposals = payload
    scorer = _WORKER["scorer"]
    settings = _WORKER["settings"]
    img = None
    if scorer.needs_image or preset_proposals is None:
        img = read_image(Path(_WORKER["root"]) / image_id)
    proposals = _image_proposals(img, image_id, settings, preset_proposals)
    return detect_image(
        img,
        proposals,
        scorer,
        nms_iou=settings["nms_iou"],
        threshold=settings["threshold"],
    )


def run_corpus(
    corpus: CorpusIndex,
    partition: str,
    scorer,
    mode: SearchMode = FAST,
    nms_iou: float = DEFAULT_NMS_IOU,
    threshold: float = DEFAULT_THRESHOLD,
    thresholds=THRESHOLD_GRID,
    proposals: dict[str, ProposalSet] | None = None,
    sigma: float = 0.8,
    min_size: int = 20,
    jobs: int = 1,
) -> RunReport:
    """Detect over every image of a partition and aggregate mAP plus
    detection/recognition F1 curves against the partition's ground truth.

    `proposals` may preload per-image proposal sets (e.g. a file scorer's own
    boxes); otherwise proposals are generated per image with `mode`.
    """
    annotations = corpus.partitions[partition]
    settings = {
        "mode": mode,
        "nms_iou": nms_iou,
        "threshold": threshold,
        "sigma": sigma,
        "min_size": min_size,
    }
    payloads = []
    for ann in annotations:
        preset = None
        if proposals is not None:
            if ann.image_id not in proposals:
                raise UnknownImage(f"no proposals for image {ann.image_id!r}")
            preset = proposals[ann.image_id]
        payloads.append((ann.image_id, preset))

    if jobs > 1:
        with ProcessPoolExecutor(
            max_workers=jobs,
            initializer=_init_worker,
            initargs=(corpus.root, scorer, settings),
        ) as pool:
            decisions = list(pool.map(_process_image, payloads))
    else:
        _init_worker(corpus.root, scorer, settings)
        decisions = [_process_image(p) for p in payloads]

    all_detections = [d for decision in decisions for d in decision.detections]
    truth = [(ann.image_id, ann.class_id) for ann in annotations]
    tops = [
        (
            d.image_id,
            d.top.class_id if d.top is not None else NO_LOGO,
            d.top.score if d.top is not None else 0.0,
        )
        for d in decisions
    ]
    report_eval = evaluate_map(
        all_detections, annotations, iou_min=0.5, num_classes=len(corpus.classes)
    )
    points = f1_curve(tops, truth, thresholds)
    (operating,) = f1_curve(tops, truth, [threshold])
    logo_predictions = sum(1 for d in decisions if d.predicted_label != NO_LOGO)
    config = {
        "partition": partition,
        "mode": mode.tag,
        "nms_iou": nms_iou,
        "threshold": threshold,
        "scorer": getattr(scorer, "scorer_id", type(scorer).__name__),
        "num_classes": len(corpus.classes),
    }
    return RunReport(
        config=config,
        decisions=decisions,
        eval=report_eval,
        f1_points=points,
        operating=operating,
        zero_predictions=logo_predictions == 0,
    )
