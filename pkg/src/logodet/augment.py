"""Training-set augmentation: horizontal flip, small horizontal shear, and a
uniform per-channel color shift, with bounding boxes tracked through each
transform. One augmented variant is written per training image, doubling the
training partition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import PARTITION_FILES, CorpusIndex, IoFailure, load_corpus
from .image import Image, encode_png, read_image
from .metrics import NO_LOGO, Box


@dataclass(frozen=True)
class AugmentSpec:
    flip: bool = True
    shear_degrees: float = 5.0  # sampled uniform in [-shear_degrees, +shear_degrees]
    color_shift_fraction: float = 0.03
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.shear_degrees <= 5:
            raise ValueError("shear_degrees must be in [0, 5]")
        if not 0 <= self.color_shift_fraction <= 1:
            raise ValueError("color_shift_fraction must be in [0, 1]")


def hflip(img: Image, boxes) -> tuple[Image, list[Box]]:
    """Mirror columns; box (x0, x1) maps to (width - x1, width - x0)."""
    width = img.width
    flipped = Image(np.ascontiguousarray(img.pixels[:, ::-1]))
    return flipped, [Box(width - b.x1, b.y0, width - b.x0, b.y1) for b in boxes]


def shear(img: Image, boxes, degrees: float) -> tuple[Image, list[Box]]:
    """Horizontal shear x' = x + tan(deg)*y with nearest-neighbor sampling.

    The canvas widens by ceil(|tan|*height) so nothing is cut off; negative
    angles shift content right by the same amount to keep coordinates
    positive. Vacated pixels replicate the nearest source column. Boxes map
    to the tight outward bbox of their four sheared corners, which always
    contains every sheared pixel of the original box.
    """
    if abs(degrees) > 45:
        raise ValueError("|degrees| must be <= 45")
    if degrees == 0:
        return img, [Box(*b) for b in boxes]
    t = math.tan(math.radians(degrees))
    h, w = img.height, img.width
    pad = math.ceil(abs(t) * h)
    shift = pad if t < 0 else 0
    out_w = w + pad

    ys = np.arange(h)[:, None]
    xs = np.arange(out_w)[None, :]
    src = np.floor(xs - t * ys - shift + 0.5).astype(np.int64)
    np.clip(src, 0, w - 1, out=src)
    sheared = Image(np.ascontiguousarray(img.pixels[np.arange(h)[:, None], src]))

    moved = []
    for b in boxes:
        offsets = (t * b.y0 + shift, t * b.y1 + shift)
        x0 = max(0, math.floor(b.x0 + min(offsets)))
        x1 = min(out_w, math.ceil(b.x1 + max(offsets)))
        moved.append(Box(x0, b.y0, x1, b.y1))
    return sheared, moved


def color_shift(img: Image, fraction: float, seed) -> Image:
    """Add one uniformly drawn integer delta per channel, clamped to 0..255.

    Deltas are drawn from [-fraction*255, +fraction*255] and rounded, so
    absent clamping each channel mean moves by exactly its delta.
    """
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must be in [0, 1]")
    if fraction == 0:
        return img
    amplitude = fraction * 255
    rng = np.random.default_rng(seed)
    deltas = np.rint(rng.uniform(-amplitude, amplitude, size=3)).astype(np.int64)
    shifted = np.clip(img.pixels.astype(np.int64) + deltas, 0, 255).astype(np.uint8)
    return Image(shifted)


def augment_image(img: Image, boxes, spec: AugmentSpec, rng) -> tuple[Image, list[Box]]:
    """One variant: flip (if enabled), then sampled shear, then color shift."""
    boxes = list(boxes)
    if spec.flip:
        img, boxes = hflip(img, boxes)
    if spec.shear_degrees > 0:
        degrees = float(rng.uniform(-spec.shear_degrees, spec.shear_degrees))
        img, boxes = shear(img, boxes, degrees)
    if spec.color_shift_fraction > 0:
        img = color_shift(img, spec.color_shift_fraction, int(rng.integers(2**31)))
    return img, boxes


def _variant_id(image_id: str) -> str:
    path = Path(image_id)
    return str(path.with_name(f"{path.stem}_aug0.png")).replace("\\", "/")


def _write_bboxes(path: Path, boxes) -> None:
    rows = "".join(f"{b.x0} {b.y0} {b.width} {b.height}\n" for b in boxes)
    path.write_text("x y width height\n" + rows)


def augment_corpus(corpus: CorpusIndex, spec: AugmentSpec, out) -> CorpusIndex:
    """Write originals plus one augmented variant per training image into a
    fresh corpus directory; returns the reloaded (and thus validated) index."""
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "classes.txt").write_text("".join(f"{c}\n" for c in corpus.classes))

        lines = {name: [] for name in PARTITION_FILES}
        for partition, annotations in corpus.partitions.items():
            for ann in annotations:
                class_name = corpus.class_name(ann.class_id)
                src = corpus.image_path(ann.image_id)
                dst = out / ann.image_id
                dst.parent.mkdir(parents=True, exist_ok=True)
                dst.write_bytes(src.read_bytes())
                if ann.class_id != NO_LOGO:
                    _write_bboxes(out / (ann.image_id + ".bboxes.txt"), ann.boxes)
                lines[partition].append(f"{ann.image_id} {class_name}")

        for index, ann in enumerate(corpus.partitions["train"]):
            rng = np.random.default_rng((spec.seed, index))
            img = read_image(corpus.image_path(ann.image_id))
            variant, boxes = augment_image(img, ann.boxes, spec, rng)
            variant_id = _variant_id(ann.image_id)
            (out / variant_id).write_bytes(encode_png(variant))
            if ann.class_id != NO_LOGO:
                _write_bboxes(out / (variant_id + ".bboxes.txt"), boxes)
            lines["train"].append(f"{variant_id} {corpus.class_name(ann.class_id)}")

        for partition, filename in PARTITION_FILES.items():
            (out / filename).write_text("".join(f"{line}\n" for line in lines[partition]))
    except OSError as exc:
        raise IoFailure(f"cannot write augmented corpus under {out}: {exc}") from exc
    return load_corpus(out, strict=False)
