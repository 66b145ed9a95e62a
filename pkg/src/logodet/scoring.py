"""Region scoring: a histogram-similarity baseline classifier plus the score
file wire format that lets an external CNN supply scores instead.

Score vectors are always 33 wide: 32 logo-class slots followed by one
background slot. A baseline model trained on fewer classes (fixture corpora)
leaves the untouched class slots at exactly 0, with the softmax running over
the trained classes plus background.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import CorpusIndex
from .errors import LogodetError
from .image import Image, read_image
from .metrics import BACKGROUND, NO_LOGO, NUM_CLASSES, Box, iou
from .selective_search import COLOR_BINS, ProposalSet, color_bin

SCORE_WIDTH = NUM_CLASSES + 1  # 32 classes + background


class EmptyClass(LogodetError):
    """A corpus class has no training boxes to build references from."""


class MalformedScoreFile(LogodetError):
    """A score JSONL line that cannot be parsed or fails validation."""


class ScoreSumOutOfRange(LogodetError):
    """A score vector whose sum is too far from 1 to renormalize."""


class UnknownClassCount(LogodetError):
    """A score vector that is not exactly 33 wide."""


@dataclass
class ScoredRegion:
    box: Box
    scores: np.ndarray  # 33 floats summing to 1

    def __eq__(self, other):
        if not isinstance(other, ScoredRegion):
            return NotImplemented
        return self.box == other.box and np.array_equal(self.scores, other.scores)


@dataclass
class BaselineModel:
    """Per-class reference color histograms plus background references."""

    references: dict[int, list[np.ndarray]]
    background: list[np.ndarray]
    temperature: float = 0.05

    def trained_classes(self) -> list[int]:
        return sorted(self.references)


def region_histogram(img: Image, box: Box) -> np.ndarray:
    """75-bin L1-normalized color histogram of a crop (25 bins x 3 channels)."""
    crop = img.pixels[box.y0 : box.y1, box.x0 : box.x1].astype(np.int64)
    area = crop.shape[0] * crop.shape[1]
    hist = np.empty(3 * COLOR_BINS, dtype=np.float64)
    for c in range(3):
        counts = np.bincount(color_bin(crop[:, :, c]).ravel(), minlength=COLOR_BINS)
        hist[c * COLOR_BINS : (c + 1) * COLOR_BINS] = counts
    return hist / (3 * area)


def _sample_background_box(rng, width: int, height: int) -> Box | None:
    max_side = min(width, height)
    if max_side < 10:
        return None
    side = int(rng.integers(10, max_side + 1))
    x0 = int(rng.integers(0, width - side + 1))
    y0 = int(rng.integers(0, height - side + 1))
    return Box(x0, y0, x0 + side, y0 + side)


def _crop_overlap(candidate: Box, gt: Box) -> float:
    """Fraction of the candidate crop covered by a ground-truth box. A small
    crop inside a big logo has tiny IoU but is still pure logo pixels, so
    background sampling must bound this too."""
    ix = min(candidate.x1, gt.x1) - max(candidate.x0, gt.x0)
    iy = min(candidate.y1, gt.y1) - max(candidate.y0, gt.y0)
    if ix <= 0 or iy <= 0:
        return 0.0
    return ix * iy / candidate.area


def train_baseline(
    corpus: CorpusIndex,
    temperature: float = 0.05,
    seed: int = 0,
    backgrounds_per_image: int = 2,
    max_tries: int = 25,
) -> BaselineModel:
    """Crop every training ground-truth box into a reference histogram and
    sample background references from random crops kept below 0.3 overlap
    with every ground-truth box (both IoU and fraction-of-crop-covered)."""
    references: dict[int, list[np.ndarray]] = {}
    background: list[np.ndarray] = []
    rng = np.random.default_rng(seed)
    for ann in corpus.partitions["train"]:
        if ann.class_id == NO_LOGO:
            continue
        img = read_image(corpus.image_path(ann.image_id))
        for box in ann.boxes:
            references.setdefault(ann.class_id, []).append(region_histogram(img, box))
        accepted = 0
        for _ in range(max_tries):
            if accepted >= backgrounds_per_image:
                break
            candidate = _sample_background_box(rng, img.width, img.height)
            if candidate is None:
                break
            if all(
                iou(candidate, gt) < 0.3 and _crop_overlap(candidate, gt) < 0.3
                for gt in ann.boxes
            ):
                background.append(region_histogram(img, candidate))
                accepted += 1
    for class_id, name in enumerate(corpus.classes):
        if class_id not in references:
            raise EmptyClass(f"class {name!r} has no training boxes")
    return BaselineModel(references=references, background=background, temperature=temperature)


def _softmax(values: np.ndarray) -> np.ndarray:
    shifted = values - values.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def score_regions(model: BaselineModel, img: Image, proposals: ProposalSet) -> list[ScoredRegion]:
    """Score every proposal: histogram-intersection similarity to the nearest
    reference per class (and background), softmaxed with the model's
    temperature. Output order matches proposal order."""
    trained = model.trained_classes()
    class_refs = [np.stack(model.references[c]) for c in trained]
    bg_refs = np.stack(model.background) if model.background else None
    scored = []
    for box in proposals.boxes:
        hist = region_histogram(img, box)
        sims = np.empty(len(trained) + 1, dtype=np.float64)
        for i, refs in enumerate(class_refs):
            sims[i] = np.minimum(refs, hist).sum(axis=1).max()
        sims[-1] = np.minimum(bg_refs, hist).sum(axis=1).max() if bg_refs is not None else 0.0
        probs = _softmax(sims / model.temperature)
        scores = np.zeros(SCORE_WIDTH, dtype=np.float64)
        scores[trained] = probs[:-1]
        scores[BACKGROUND] = probs[-1]
        scored.append(ScoredRegion(box=box, scores=scores))
    return scored


def write_scores(regions_by_image: dict[str, list[ScoredRegion]], path) -> None:
    """JSONL, one region per line: {"image_id", "box", "scores"(33)}."""
    with open(path, "w") as fh:
        for image_id, regions in regions_by_image.items():
            for region in regions:
                fh.write(
                    json.dumps(
                        {
                            "image_id": image_id,
                            "box": list(region.box),
                            "scores": [float(s) for s in region.scores],
                        }
                    )
                    + "\n"
                )


def parse_score_lines(lines) -> dict[str, list[ScoredRegion]]:
    """Parse score JSONL: vectors must be 33 finite nonnegative reals whose
    sum lies in [0.99, 1.01]; they are renormalized to exactly 1."""
    result: dict[str, list[ScoredRegion]] = {}
    for lineno, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedScoreFile(f"line {lineno}: invalid JSON: {exc}") from exc
        try:
            image_id = record["image_id"]
            coords = record["box"]
            scores = record["scores"]
        except (TypeError, KeyError) as exc:
            raise MalformedScoreFile(f"line {lineno}: missing field {exc}") from exc
        if not isinstance(image_id, str):
            raise MalformedScoreFile(f"line {lineno}: image_id must be a string")
        if (
            not isinstance(coords, list)
            or len(coords) != 4
            or not all(isinstance(v, int) for v in coords)
        ):
            raise MalformedScoreFile(f"line {lineno}: box must be 4 integers")
        box = Box(*coords)
        if box.x1 <= box.x0 or box.y1 <= box.y0:
            raise MalformedScoreFile(f"line {lineno}: empty box {coords}")
        if not isinstance(scores, list) or not all(
            isinstance(s, (int, float)) and not isinstance(s, bool) for s in scores
        ):
            raise MalformedScoreFile(f"line {lineno}: scores must be a list of reals")
        if len(scores) != SCORE_WIDTH:
            raise UnknownClassCount(f"line {lineno}: expected {SCORE_WIDTH} scores, got {len(scores)}")
        vector = np.asarray(scores, dtype=np.float64)
        if not np.all(np.isfinite(vector)) or np.any(vector < 0):
            raise MalformedScoreFile(f"line {lineno}: scores must be finite and nonnegative")
        total = float(vector.sum())
        if not 0.99 <= total <= 1.01:
            raise ScoreSumOutOfRange(f"line {lineno}: scores sum to {total:.6g}")
        result.setdefault(image_id, []).append(ScoredRegion(box=box, scores=vector / total))
    return result


def read_scores(path) -> dict[str, list[ScoredRegion]]:
    with open(path) as fh:
        return parse_score_lines(fh)
