"""Graph-based over-segmentation producing the seed segments for region grouping.

Felzenszwalb-Huttenlocher style: smooth, build an 8-connected pixel graph
weighted by Euclidean RGB distance, merge components greedily in ascending
edge-weight order, then absorb components below min_size. Deterministic:
edge ties are broken lexicographically by (weight, source index, target index).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import Image, encode_ppm, smooth_plane


@dataclass(frozen=True)
class SegmentationParams:
    scale_k: float = 100.0  # merge-threshold scale; larger -> larger segments
    min_size: int = 20
    sigma: float = 0.8

    def __post_init__(self):
        if self.scale_k <= 0:
            raise ValueError("scale_k must be > 0")
        if self.min_size < 1:
            raise ValueError("min_size must be >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True, eq=False)
class SegmentLabeling:
    """Dense per-pixel segment ids. `labels` is a (height, width) int array."""

    labels: np.ndarray
    segment_count: int

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


class _UnionFind:
    __slots__ = ("parent", "size")

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x):
        root = x
        parent = self.parent
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b):
        if self.size[a] >= self.size[b]:
            a, b = b, a
        self.parent[a] = b
        self.size[b] += self.size[a]
        return b


def _build_edges(img: Image, sigma: float):
    """8-connected pixel graph over the smoothed image.

    Returns (src, dst, weight) arrays sorted by (weight, src, dst).
    """
    smoothed = np.stack(
        [smooth_plane(img.pixels[:, :, c].astype(np.float64), sigma) for c in range(3)],
        axis=2,
    )
    h, w = img.height, img.width
    idx = np.arange(h * w).reshape(h, w)

    srcs, dsts = [], []
    if w > 1:  # east
        srcs.append(idx[:, :-1].ravel())
        dsts.append(idx[:, 1:].ravel())
    if h > 1:  # south
        srcs.append(idx[:-1, :].ravel())
        dsts.append(idx[1:, :].ravel())
    if w > 1 and h > 1:  # south-east and south-west
        srcs.append(idx[:-1, :-1].ravel())
        dsts.append(idx[1:, 1:].ravel())
        srcs.append(idx[:-1, 1:].ravel())
        dsts.append(idx[1:, :-1].ravel())
    if not srcs:
        return np.array([], int), np.array([], int), np.array([], float)

    src = np.concatenate(srcs)
    dst = np.concatenate(dsts)
    flat = smoothed.reshape(-1, 3)
    diff = flat[src] - flat[dst]
    weight = np.sqrt((diff * diff).sum(axis=1))

    order = np.lexsort((dst, src, weight))
    return src[order], dst[order], weight[order]


def segment_graph(img: Image, params: SegmentationParams) -> SegmentLabeling:
    """Segment an image into connected components of similar color.

    The merge predicate follows the classic formulation: join components when
    the connecting edge weight does not exceed either side's internal
    variation plus scale_k / size. A final sweep merges components smaller
    than min_size across their cheapest boundary edge.
    """
    h, w = img.height, img.width
    n = h * w
    src, dst, weight = _build_edges(img, params.sigma)

    uf = _UnionFind(n)
    k = float(params.scale_k)
    threshold = [k] * n  # internal(C) + k/|C|, tracked per root
    for a, b, wgt in zip(src.tolist(), dst.tolist(), weight.tolist()):
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            continue
        if wgt <= threshold[ra] and wgt <= threshold[rb]:
            root = uf.union(ra, rb)
            # edges arrive in ascending order, so wgt is the new internal max
            threshold[root] = wgt + k / uf.size[root]

    if params.min_size > 1:
        min_size = params.min_size
        for a, b in zip(src.tolist(), dst.tolist()):
            ra, rb = uf.find(a), uf.find(b)
            if ra != rb and (uf.size[ra] < min_size or uf.size[rb] < min_size):
                uf.union(ra, rb)

    # dense relabeling in row-major first-appearance order
    labels = np.empty(n, dtype=np.int32)
    remap: dict[int, int] = {}
    for i in range(n):
        root = uf.find(i)
        label = remap.get(root)
        if label is None:
            label = len(remap)
            remap[root] = label
        labels[i] = label
    return SegmentLabeling(labels.reshape(h, w), len(remap))


def segment_sizes(labeling: SegmentLabeling) -> np.ndarray:
    """Per-segment pixel counts; sums to width * height."""
    return np.bincount(labeling.labels.ravel(), minlength=labeling.segment_count)


def _palette_color(i: int) -> tuple[int, int, int]:
    # splitmix-style integer hash: a fixed pseudo-random palette
    x = (i + 1) * 0x9E3779B97F4A7C15 & 0xFFFFFFFFFFFFFFFF
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & 0xFFFFFFFFFFFFFFFF
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & 0xFFFFFFFFFFFFFFFF
    x ^= x >> 31
    return (x & 0xFF, (x >> 8) & 0xFF, (x >> 16) & 0xFF)


def labeling_to_ppm(labeling: SegmentLabeling) -> bytes:
    """Render the labeling as a color-mapped PPM for debugging."""
    palette = np.array(
        [_palette_color(i) for i in range(labeling.segment_count)], dtype=np.uint8
    )
    return encode_ppm(Image(palette[labeling.labels]))
