"""Bottom-up hierarchical grouping of graph segments into object proposals.

Starting from one segmentation per scale, neighboring regions are merged
greedily by a four-part similarity (color, texture, size, fill) and the
bounding box of every region ever formed is recorded. Fast mode runs two
segmentation scales, Quality four; their unions (deduplicated, small boxes
dropped) are the proposal set for an image.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import LogodetError
from .image import Image, to_hsv
from .metrics import Box
from .segmentation import SegmentationParams, SegmentLabeling, segment_graph

COLOR_BINS = 25  # per channel -> 75 total
TEXTURE_ORIENTATIONS = 8
TEXTURE_MAG_BINS = 10  # per orientation -> 240 total over 3 channels
MAG_MAX = 255.0 * math.sqrt(2.0)  # largest possible gradient magnitude

MIN_PROPOSAL_SIDE = 20

_MODE_SCALE_COUNT = {"fast": 2, "quality": 4}


class MalformedProposalFile(LogodetError):
    """A proposals JSONL line that cannot be parsed or fails validation."""


@dataclass(frozen=True)
class SearchMode:
    tag: str
    scales: tuple[float, ...]

    def __post_init__(self):
        expected = _MODE_SCALE_COUNT.get(self.tag)
        if expected is None:
            raise ValueError(f"unknown search mode tag: {self.tag!r}")
        if len(self.scales) != expected:
            raise ValueError(f"{self.tag} mode requires {expected} scales, got {len(self.scales)}")
        if any(k <= 0 for k in self.scales):
            raise ValueError("scales must be positive")


FAST = SearchMode("fast", (100.0, 200.0))
QUALITY = SearchMode("quality", (50.0, 100.0, 150.0, 300.0))


@dataclass
class RegionNode:
    id: int
    size: int
    bbox: Box
    color_hist: np.ndarray  # 75 bins, L1-normalized
    texture_hist: np.ndarray  # 240 bins, L1-normalized


@dataclass(frozen=True)
class ProposalSet:
    image_id: str
    boxes: tuple[Box, ...]
    mode: str


def _plane_gradients(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradients (one-sided at borders); degenerate axes
    get zero gradient."""
    gy = np.gradient(plane, axis=0) if plane.shape[0] > 1 else np.zeros_like(plane)
    gx = np.gradient(plane, axis=1) if plane.shape[1] > 1 else np.zeros_like(plane)
    return gy, gx


def color_bin(value):
    """25-way quantization of a 0..255 channel value."""
    return value * COLOR_BINS // 256


def build_region_nodes(img: Image, labeling: SegmentLabeling) -> list[RegionNode]:
    """One RegionNode per initial segment: size, tight bbox, histograms."""
    labels = labeling.labels
    n = labeling.segment_count
    h, w = labels.shape
    flat = labels.ravel()
    sizes = np.bincount(flat, minlength=n)

    ys, xs = np.indices((h, w))
    x0 = np.full(n, w, dtype=np.int64)
    y0 = np.full(n, h, dtype=np.int64)
    x1 = np.full(n, -1, dtype=np.int64)
    y1 = np.full(n, -1, dtype=np.int64)
    np.minimum.at(x0, flat, xs.ravel())
    np.minimum.at(y0, flat, ys.ravel())
    np.maximum.at(x1, flat, xs.ravel())
    np.maximum.at(y1, flat, ys.ravel())

    pixels = img.pixels.astype(np.int64)
    color = np.empty((n, 3 * COLOR_BINS), dtype=np.float64)
    for c in range(3):
        bins = color_bin(pixels[:, :, c])
        counts = np.bincount(
            (flat * COLOR_BINS + bins.ravel()), minlength=n * COLOR_BINS
        ).reshape(n, COLOR_BINS)
        color[:, c * COLOR_BINS : (c + 1) * COLOR_BINS] = counts

    per_channel = TEXTURE_ORIENTATIONS * TEXTURE_MAG_BINS
    texture = np.empty((n, 3 * per_channel), dtype=np.float64)
    for c in range(3):
        gy, gx = _plane_gradients(img.pixels[:, :, c].astype(np.float64))
        theta = np.arctan2(gy, gx)
        mag = np.hypot(gx, gy)
        obin = np.clip(
            np.floor((theta + np.pi) / (2 * np.pi / TEXTURE_ORIENTATIONS)).astype(np.int64),
            0,
            TEXTURE_ORIENTATIONS - 1,
        )
        mbin = np.clip(
            np.floor(mag * TEXTURE_MAG_BINS / MAG_MAX).astype(np.int64),
            0,
            TEXTURE_MAG_BINS - 1,
        )
        counts = np.bincount(
            flat * per_channel + (obin * TEXTURE_MAG_BINS + mbin).ravel(),
            minlength=n * per_channel,
        ).reshape(n, per_channel)
        texture[:, c * per_channel : (c + 1) * per_channel] = counts

    denom = (3 * sizes)[:, None].astype(np.float64)
    color /= denom
    texture /= denom

    return [
        RegionNode(
            id=i,
            size=int(sizes[i]),
            bbox=Box(int(x0[i]), int(y0[i]), int(x1[i]) + 1, int(y1[i]) + 1),
            color_hist=color[i],
            texture_hist=texture[i],
        )
        for i in range(n)
    ]


def _neighbor_pairs(labels: np.ndarray) -> set[tuple[int, int]]:
    """Segment pairs touching under 8-connectivity."""
    pairs: set[tuple[int, int]] = set()
    h, w = labels.shape
    slices = [
        (labels[:, :-1], labels[:, 1:]) if w > 1 else None,  # east
        (labels[:-1, :], labels[1:, :]) if h > 1 else None,  # south
        (labels[:-1, :-1], labels[1:, 1:]) if h > 1 and w > 1 else None,  # south-east
        (labels[:-1, 1:], labels[1:, :-1]) if h > 1 and w > 1 else None,  # south-west
    ]
    for pair in slices:
        if pair is None:
            continue
        a, b = pair
        diff = a != b
        lo = np.minimum(a[diff], b[diff])
        hi = np.maximum(a[diff], b[diff])
        pairs.update(zip(lo.tolist(), hi.tolist()))
    return pairs


def _box_union(a: Box, b: Box) -> Box:
    return Box(min(a.x0, b.x0), min(a.y0, b.y0), max(a.x1, b.x1), max(a.y1, b.y1))


def similarity(a: RegionNode, b: RegionNode, image_size: int) -> float:
    """Sum of color, texture, size and fill similarities, each in [0, 1]."""
    s_color = float(np.minimum(a.color_hist, b.color_hist).sum())
    s_texture = float(np.minimum(a.texture_hist, b.texture_hist).sum())
    s_size = 1.0 - (a.size + b.size) / image_size
    union = _box_union(a.bbox, b.bbox)
    s_fill = 1.0 - (union.area - a.size - b.size) / image_size

    def clamp(v):
        return min(1.0, max(0.0, v))

    return clamp(s_color) + clamp(s_texture) + clamp(s_size) + clamp(s_fill)


def merge_nodes(a: RegionNode, b: RegionNode, new_id: int) -> RegionNode:
    """Merged region: summed size, union bbox, size-weighted histograms."""
    size = a.size + b.size
    return RegionNode(
        id=new_id,
        size=size,
        bbox=_box_union(a.bbox, b.bbox),
        color_hist=(a.color_hist * a.size + b.color_hist * b.size) / size,
        texture_hist=(a.texture_hist * a.size + b.texture_hist * b.size) / size,
    )


def grouping_pass(img: Image, labeling: SegmentLabeling) -> list[Box]:
    """Merge neighboring segments greedily by similarity, most similar first
    (ties by smaller id pair), recording every region's bbox: n initial boxes
    plus n-1 merges."""
    if labeling.labels.shape != (img.height, img.width):
        raise ValueError("labeling does not match image dimensions")
    nodes = {node.id: node for node in build_region_nodes(img, labeling)}
    boxes = [nodes[i].bbox for i in range(len(nodes))]
    image_size = img.width * img.height

    neighbors: dict[int, set[int]] = {i: set() for i in nodes}
    heap: list[tuple[float, int, int]] = []
    for a, b in _neighbor_pairs(labeling.labels):
        neighbors[a].add(b)
        neighbors[b].add(a)
        heap.append((-similarity(nodes[a], nodes[b], image_size), a, b))
    heapq.heapify(heap)

    next_id = len(nodes)
    while len(nodes) > 1 and heap:
        neg_sim, a, b = heapq.heappop(heap)
        if a not in nodes or b not in nodes:
            continue  # stale entry; one side was already merged away
        merged = merge_nodes(nodes.pop(a), nodes.pop(b), next_id)
        nodes[next_id] = merged
        boxes.append(merged.bbox)

        joined = (neighbors.pop(a) | neighbors.pop(b)) - {a, b}
        neighbors[next_id] = joined
        for other in joined:
            neighbors[other].discard(a)
            neighbors[other].discard(b)
            neighbors[other].add(next_id)
            heapq.heappush(
                heap,
                (-similarity(nodes[other], merged, image_size), other, next_id),
            )
        next_id += 1
    return boxes


def propose(
    img: Image,
    mode: SearchMode = FAST,
    image_id: str = "",
    sigma: float = 0.8,
    min_size: int = 20,
    min_side: int = MIN_PROPOSAL_SIDE,
    use_hsv: bool = False,
) -> ProposalSet:
    """Proposals for one image: a grouping pass per segmentation scale,
    unioned, deduplicated, small boxes dropped, largest first."""
    feature_img = to_hsv(img) if use_hsv else img
    collected: set[Box] = set()
    for scale_k in mode.scales:
        params = SegmentationParams(scale_k=scale_k, min_size=min_size, sigma=sigma)
        labeling = segment_graph(feature_img, params)
        collected.update(grouping_pass(feature_img, labeling))
    kept = [b for b in collected if b.width >= min_side and b.height >= min_side]
    kept.sort(key=lambda b: (-b.area, b.x0, b.y0, b.x1, b.y1))
    return ProposalSet(image_id=image_id, boxes=tuple(kept), mode=mode.tag)


def proposals_to_jsonl(proposals: ProposalSet) -> str:
    """One JSON line per box: {"image_id", "mode", "box": [x0,y0,x1,y1]}."""
    lines = []
    for box in proposals.boxes:
        lines.append(
            json.dumps(
                {"image_id": proposals.image_id, "mode": proposals.mode, "box": list(box)}
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def read_proposals_jsonl(lines) -> dict[str, ProposalSet]:
    """Parse proposal JSONL back into per-image ProposalSets (file order)."""
    boxes: dict[str, list[Box]] = {}
    modes: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedProposalFile(f"line {lineno}: invalid JSON: {exc}") from exc
        try:
            image_id = record["image_id"]
            mode = record["mode"]
            coords = record["box"]
        except (TypeError, KeyError) as exc:
            raise MalformedProposalFile(f"line {lineno}: missing field {exc}") from exc
        if (
            not isinstance(coords, list)
            or len(coords) != 4
            or not all(isinstance(v, int) for v in coords)
        ):
            raise MalformedProposalFile(f"line {lineno}: box must be 4 integers")
        box = Box(*coords)
        if box.x1 <= box.x0 or box.y1 <= box.y0:
            raise MalformedProposalFile(f"line {lineno}: empty box {coords}")
        if modes.setdefault(image_id, mode) != mode:
            raise MalformedProposalFile(f"line {lineno}: mode changed for {image_id!r}")
        boxes.setdefault(image_id, []).append(box)
    return {
        image_id: ProposalSet(image_id=image_id, boxes=tuple(bs), mode=modes[image_id])
        for image_id, bs in boxes.items()
    }
