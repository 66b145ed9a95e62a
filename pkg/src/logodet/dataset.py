"""Corpus ingestion for the 32-class logo benchmark layout, plus a synthetic
fixture generator for desk-scale tests.

Expected layout under the corpus root:

    classes.txt               one class name per line (32 in strict mode)
    trainset.txt              relative image path [class], one per line
    valset.txt                same
    testset.txt               same
    <image path>.bboxes.txt   header-optional "x y width height" rows,
                              required for every logo-class image

Images are listed, size-checked and left undecoded; the special class name
"no-logo" marks images without ground-truth boxes. Dataset rows use
x/y/width/height and are converted to half-open (x0, y0, x1, y1).
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import LogodetError
from .image import Image, encode_png, image_size
from .metrics import NO_LOGO, NUM_CLASSES, Box

NO_LOGO_NAME = "no-logo"

PARTITION_FILES = {
    "train": "trainset.txt",
    "validation": "valset.txt",
    "test": "testset.txt",
}


class MissingAnnotation(LogodetError):
    """A logo-class image has no bounding-box file (or no usable rows)."""


class InconsistentPartition(LogodetError):
    """An image appears in more than one partition (or twice in one)."""


class BadClassCount(LogodetError):
    """classes.txt does not list exactly the expected 32 classes."""


class MalformedAnnotation(LogodetError):
    """An annotation or partition row that cannot be parsed."""


class IoFailure(LogodetError):
    """A required corpus file is missing or unreadable."""


@dataclass(frozen=True)
class Annotation:
    image_id: str
    class_id: int  # 0-based index into CorpusIndex.classes, or NO_LOGO
    boxes: tuple[Box, ...]


@dataclass(frozen=True)
class CorpusIndex:
    root: str
    classes: tuple[str, ...]
    partitions: dict[str, tuple[Annotation, ...]]
    merged_train: bool = False

    def class_name(self, class_id: int) -> str:
        return NO_LOGO_NAME if class_id == NO_LOGO else self.classes[class_id]

    def class_id(self, name: str) -> int:
        if name == NO_LOGO_NAME:
            return NO_LOGO
        return self.classes.index(name)

    def image_path(self, image_id: str) -> Path:
        return Path(self.root) / image_id

    def counts(self) -> dict[str, tuple[int, int]]:
        """Per partition: (logo images, no-logo images)."""
        out = {}
        for name, anns in self.partitions.items():
            logos = sum(1 for a in anns if a.class_id != NO_LOGO)
            out[name] = (logos, len(anns) - logos)
        return out


def _read_lines(path: Path) -> list[str]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return [line.strip() for line in text.splitlines() if line.strip()]


def _parse_bboxes(path: Path, bounds: tuple[int, int]) -> tuple[Box, ...]:
    """Half-open boxes from "x y width height" rows, clipped to the image."""
    width, height = bounds
    boxes = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        fields = line.split()
        if len(fields) != 4:
            raise MalformedAnnotation(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
        try:
            x, y, w, h = (int(v) for v in fields)
        except ValueError:
            if lineno == 1:
                continue  # optional "x y width height" header
            raise MalformedAnnotation(f"{path}:{lineno}: non-integer row {line!r}") from None
        x0 = max(0, min(x, width))
        y0 = max(0, min(y, height))
        x1 = max(0, min(x + w, width))
        y1 = max(0, min(y + h, height))
        if x1 <= x0 or y1 <= y0:
            raise MalformedAnnotation(f"{path}:{lineno}: empty box after clipping: {line!r}")
        boxes.append(Box(x0, y0, x1, y1))
    if not boxes:
        raise MissingAnnotation(f"{path}: no bounding-box rows")
    return tuple(boxes)


def load_corpus(root, layout: str = "flickrlogos32", strict: bool = True) -> CorpusIndex:
    """Index a corpus directory: classes, partitions, ground-truth boxes.

    strict=True enforces the benchmark's 32-class universe; fixture corpora
    load with strict=False.
    """
    if layout != "flickrlogos32":
        raise ValueError(f"unknown layout: {layout!r}")
    root = Path(root)
    classes = tuple(_read_lines(root / "classes.txt"))
    if len(set(classes)) != len(classes):
        raise BadClassCount(f"duplicate class names in {root / 'classes.txt'}")
    if strict and len(classes) != NUM_CLASSES:
        raise BadClassCount(f"expected {NUM_CLASSES} classes, found {len(classes)}")
    class_ids = {name: i for i, name in enumerate(classes)}

    seen: dict[str, str] = {}
    partitions: dict[str, tuple[Annotation, ...]] = {}
    for partition, filename in PARTITION_FILES.items():
        annotations = []
        for lineno, line in enumerate(_read_lines(root / filename), start=1):
            fields = line.split()
            if len(fields) == 1:
                relpath, class_name = fields[0], fields[0].replace("\\", "/").split("/")[0]
            elif len(fields) == 2:
                relpath, class_name = fields
            else:
                raise MalformedAnnotation(f"{filename}:{lineno}: expected 1-2 fields: {line!r}")
            if relpath in seen:
                raise InconsistentPartition(
                    f"{relpath} listed in both {seen[relpath]} and {partition}"
                )
            seen[relpath] = partition
            if class_name == NO_LOGO_NAME:
                annotations.append(Annotation(relpath, NO_LOGO, ()))
                continue
            if class_name not in class_ids:
                raise MalformedAnnotation(f"{filename}:{lineno}: unknown class {class_name!r}")
            image_file = root / relpath
            try:
                bounds = image_size(image_file)
            except OSError as exc:
                raise IoFailure(f"cannot read image {image_file}: {exc}") from exc
            bbox_file = root / (relpath + ".bboxes.txt")
            if not bbox_file.exists():
                raise MissingAnnotation(f"{relpath}: missing {bbox_file.name}")
            boxes = _parse_bboxes(bbox_file, bounds)
            annotations.append(Annotation(relpath, class_ids[class_name], boxes))
        partitions[partition] = tuple(annotations)
    return CorpusIndex(root=str(root), classes=classes, partitions=partitions)


def merge_train_val(corpus: CorpusIndex) -> CorpusIndex:
    """Move the validation split's logo images into training; validation
    keeps only its no-logo images. Idempotent."""
    val_logos = tuple(a for a in corpus.partitions["validation"] if a.class_id != NO_LOGO)
    val_rest = tuple(a for a in corpus.partitions["validation"] if a.class_id == NO_LOGO)
    partitions = dict(corpus.partitions)
    partitions["train"] = corpus.partitions["train"] + val_logos
    partitions["validation"] = val_rest
    return replace(corpus, partitions=partitions, merged_train=True)


@dataclass(frozen=True)
class FixtureSpec:
    """Synthetic corpus shape: flat-color square logos on gray noise."""

    classes: tuple[str, ...]
    train_per_class: int = 3
    val_per_class: int = 0
    test_per_class: int = 0
    no_logo_val: int = 0
    no_logo_test: int = 0
    image_size: int = 64
    logo_side: tuple[int, int] = (24, 40)
    noise_range: tuple[int, int] = (98, 158)
    seed: int = 0

    def __post_init__(self):
        if not self.classes:
            raise ValueError("at least one class required")
        if self.logo_side[1] + 4 > self.image_size:
            raise ValueError("logo does not fit in the image with margins")


def class_color(index: int, count: int) -> tuple[int, int, int]:
    """Saturated, evenly spaced hues so classes separate by color."""
    r, g, b = colorsys.hsv_to_rgb(index / count, 1.0, 1.0)
    return (round(r * 255), round(g * 255), round(b * 255))


def _noise_background(rng, size: int, noise_range) -> np.ndarray:
    gray = rng.integers(noise_range[0], noise_range[1] + 1, size=(size, size), dtype=np.int64)
    return np.repeat(gray[:, :, None], 3, axis=2).astype(np.uint8)


def _fixture_image(rng, spec: FixtureSpec, class_index: int | None):
    """One synthetic image and its logo box (None for no-logo images)."""
    pixels = _noise_background(rng, spec.image_size, spec.noise_range)
    if class_index is None:
        return Image(pixels), None
    side = int(rng.integers(spec.logo_side[0], spec.logo_side[1] + 1))
    max_pos = spec.image_size - side - 2
    x0 = int(rng.integers(2, max_pos + 1))
    y0 = int(rng.integers(2, max_pos + 1))
    pixels[y0 : y0 + side, x0 : x0 + side] = class_color(class_index, len(spec.classes))
    return Image(pixels), Box(x0, y0, x0 + side, y0 + side)


def generate_fixture(root, spec: FixtureSpec) -> Path:
    """Write a deterministic synthetic corpus in the benchmark layout."""
    root = Path(root)
    rng = np.random.default_rng(spec.seed)
    try:
        root.mkdir(parents=True, exist_ok=True)
        (root / "classes.txt").write_text("".join(f"{c}\n" for c in spec.classes))

        partition_lines = {"train": [], "validation": [], "test": []}
        per_class = {
            "train": spec.train_per_class,
            "validation": spec.val_per_class,
            "test": spec.test_per_class,
        }
        short = {"train": "train", "validation": "val", "test": "test"}
        for class_index, class_name in enumerate(spec.classes):
            (root / class_name).mkdir(exist_ok=True)
            for partition in ("train", "validation", "test"):
                for i in range(per_class[partition]):
                    relpath = f"{class_name}/{short[partition]}{i:02d}.png"
                    img, box = _fixture_image(rng, spec, class_index)
                    (root / relpath).write_bytes(encode_png(img))
                    (root / f"{relpath}.bboxes.txt").write_text(
                        f"x y width height\n{box.x0} {box.y0} {box.width} {box.height}\n"
                    )
                    partition_lines[partition].append(f"{relpath} {class_name}")

        no_logo_counts = {"validation": spec.no_logo_val, "test": spec.no_logo_test}
        if any(no_logo_counts.values()):
            (root / NO_LOGO_NAME).mkdir(exist_ok=True)
        for partition in ("validation", "test"):
            for i in range(no_logo_counts[partition]):
                relpath = f"{NO_LOGO_NAME}/{short[partition]}{i:02d}.png"
                img, _ = _fixture_image(rng, spec, None)
                (root / relpath).write_bytes(encode_png(img))
                partition_lines[partition].append(f"{relpath} {NO_LOGO_NAME}")

        for partition, filename in PARTITION_FILES.items():
            lines = partition_lines[partition]
            (root / filename).write_text("".join(f"{line}\n" for line in lines))
    except OSError as exc:
        raise IoFailure(f"cannot write fixture under {root}: {exc}") from exc
    return root
