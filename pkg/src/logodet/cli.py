"""Command-line surface: segmentation previews, proposal generation, region
scoring, single-image detection, corpus evaluation with CSV/SVG reports,
corpus augmentation, synthetic fixtures, and threshold sweeps.

Exit codes: 0 success, 1 usage error, 2 data error (error class name on
stderr). All randomness flows from --seed (default 0), never from entropy.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from xml.sax.saxutils import escape

from .augment import AugmentSpec, augment_corpus
from .dataset import FixtureSpec, generate_fixture, load_corpus
from .errors import LogodetError
from .image import read_image
from .metrics import UnknownImage, f1_curve_csv
from .pipeline import (
    DEFAULT_NMS_IOU,
    DEFAULT_THRESHOLD,
    BaselineScorer,
    FileScorer,
    detect_image,
    run_corpus,
    sample_training_regions,
)
from .scoring import read_scores, score_regions, train_baseline, write_scores
from .segmentation import SegmentationParams, labeling_to_ppm, segment_graph
from .selective_search import (
    FAST,
    QUALITY,
    propose,
    proposals_to_jsonl,
    read_proposals_jsonl,
)

_MODES = {FAST.tag: FAST, QUALITY.tag: QUALITY}


# --------------------------------------------------------------------------
# SVG charts (self-contained, no renderer dependencies)

_PALETTE = ("#4477aa", "#ee7733", "#228833", "#aa3377")

_W, _H = 720, 420
_ML, _MR, _MT, _MB = 64, 24, 44, 64


def _axes(title: str, x_label: str, y_label: str, x_ticks, y_ticks) -> list[str]:
    left, right = _ML, _W - _MR
    top, bottom = _MT, _H - _MB
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_W} {_H}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{(left + right) / 2}" y="{_H - 12}" text-anchor="middle">{escape(x_label)}</text>',
        f'<text x="16" y="{(top + bottom) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(top + bottom) / 2})">{escape(y_label)}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
    ]
    for frac, label in x_ticks:
        x = left + frac * (right - left)
        parts.append(f'<line x1="{x:.1f}" y1="{bottom}" x2="{x:.1f}" y2="{bottom + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{bottom + 20}" text-anchor="middle">{escape(label)}</text>')
    for frac, label in y_ticks:
        y = bottom - frac * (bottom - top)
        parts.append(f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        parts.append(
            f'<line x1="{left}" y1="{y:.1f}" x2="{right}" y2="{y:.1f}" stroke="#dddddd"/>'
        )
        parts.append(f'<text x="{left - 9}" y="{y + 4:.1f}" text-anchor="end">{escape(label)}</text>')
    return parts


def line_chart(series, title: str, x_label: str, y_label: str) -> str:
    """Render (label, [(x, y), ...]) series with x in [0, 1], y in [0, 1]."""
    left, right = _ML, _W - _MR
    top, bottom = _MT, _H - _MB
    ticks = [(v / 10, f"{v / 10:.1f}") for v in range(0, 11, 2)]
    parts = _axes(title, x_label, y_label, ticks, ticks)
    for i, (label, points) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(
            f"{left + x * (right - left):.2f},{bottom - y * (bottom - top):.2f}"
            for x, y in points
        )
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        ly = top + 16 * i
        parts.append(f'<line x1="{right - 150}" y1="{ly}" x2="{right - 122}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{right - 116}" y="{ly + 4}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_chart(labels, values, title: str, y_label: str) -> str:
    """Render one bar per label with values in [0, 1]."""
    left, right = _ML, _W - _MR
    top, bottom = _MT, _H - _MB
    y_ticks = [(v / 4, f"{v / 4:.2f}") for v in range(5)]
    parts = _axes(title, "", y_label, [], y_ticks)
    n = max(len(labels), 1)
    step = (right - left) / n
    for i, (label, value) in enumerate(zip(labels, values)):
        x = left + i * step
        height = value * (bottom - top)
        parts.append(
            f'<rect x="{x + step * 0.15:.2f}" y="{bottom - height:.2f}" '
            f'width="{step * 0.7:.2f}" height="{height:.2f}" fill="{_PALETTE[0]}"/>'
        )
        cx = x + step / 2
        parts.append(
            f'<text x="{cx:.1f}" y="{bottom + 12}" text-anchor="end" font-size="10" '
            f'transform="rotate(-55 {cx:.1f} {bottom + 12})">{escape(str(label))}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# --------------------------------------------------------------------------
# shared plumbing


def _corpus_image_ids(corpus) -> set[str]:
    return {
        ann.image_id for anns in corpus.partitions.values() for ann in anns
    }


def _iter_partition(corpus, partition: str):
    if partition == "all":
        for name in corpus.partitions:
            yield from corpus.partitions[name]
    else:
        yield from corpus.partitions[partition]


def _relative_image_id(image_path: Path, corpus_root: Path) -> str:
    try:
        return image_path.resolve().relative_to(corpus_root.resolve()).as_posix()
    except ValueError:
        return image_path.name


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def _propose_job(payload):
    path, image_id, tag, sigma, min_size = payload
    img = read_image(path)
    return propose(img, _MODES[tag], image_id=image_id, sigma=sigma, min_size=min_size)


def _ap_csv(classes, report) -> str:
    lines = ["class,ap"]
    for name, ap in zip(classes, report.per_class_ap):
        lines.append(f"{name},{ap}")
    lines.append(f"mAP,{report.map}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# subcommands


def _cmd_segment(args) -> int:
    img = read_image(args.image)
    params = SegmentationParams(scale_k=args.scale, min_size=args.min_size, sigma=args.sigma)
    labeling = segment_graph(img, params)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(labeling_to_ppm(labeling))
    print(f"wrote {out} ({labeling.segment_count} segments)")
    return 0


def _cmd_propose(args) -> int:
    source = Path(args.input)
    payloads = []
    if source.is_dir():
        corpus = load_corpus(source, strict=False)
        for ann in _iter_partition(corpus, args.partition):
            payloads.append(
                (str(corpus.image_path(ann.image_id)), ann.image_id, args.mode, args.sigma, args.min_size)
            )
    else:
        payloads.append((str(source), source.name, args.mode, args.sigma, args.min_size))

    if args.jobs > 1 and len(payloads) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            sets = list(pool.map(_propose_job, payloads))
    else:
        sets = [_propose_job(p) for p in payloads]

    text = "".join(proposals_to_jsonl(ps) for ps in sets)
    _write_text(Path(args.output), text)
    print(f"proposed {sum(len(ps.boxes) for ps in sets)} boxes over {len(sets)} images")
    return 0


def _cmd_score(args) -> int:
    corpus = load_corpus(args.corpus, strict=False)
    with open(args.proposals, encoding="utf-8") as fh:
        proposal_sets = read_proposals_jsonl(fh)
    known = _corpus_image_ids(corpus)
    model = train_baseline(corpus, temperature=args.temperature, seed=args.seed)
    scored = {}
    for image_id, proposals in proposal_sets.items():
        if image_id not in known:
            raise UnknownImage(f"proposals reference unknown image {image_id!r}")
        img = read_image(corpus.image_path(image_id))
        scored[image_id] = score_regions(model, img, proposals)
    write_scores(scored, args.output)
    print(f"wrote {args.output} ({sum(len(v) for v in scored.values())} regions)")
    return 0


def _cmd_detect(args) -> int:
    corpus = load_corpus(args.corpus, strict=False)
    image_path = Path(args.image)
    image_id = _relative_image_id(image_path, Path(corpus.root))
    if args.scores:
        loaded = read_scores(args.scores)
        if image_id not in loaded:
            raise UnknownImage(f"score file has no entry for image {image_id!r}")
        scorer = FileScorer(loaded, label=Path(args.scores).name)
        proposals = scorer.proposal_sets()[image_id]
        img = None
    else:
        img = read_image(image_path)
        scorer = BaselineScorer(train_baseline(corpus, seed=args.seed))
        proposals = propose(img, _MODES[args.mode], image_id=image_id)
    decision = detect_image(
        img, proposals, scorer, nms_iou=args.nms_iou, threshold=args.threshold
    )
    payload = {
        "config": {
            "mode": args.mode,
            "nms_iou": args.nms_iou,
            "threshold": args.threshold,
            "scorer": scorer.scorer_id,
        },
        "decision": decision.to_dict(),
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.output:
        _write_text(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return 0


def _evaluate_report(args):
    corpus = load_corpus(args.corpus, strict=False)
    loaded = read_scores(args.scores)
    scorer = FileScorer(loaded, label=Path(args.scores).name)
    report = run_corpus(
        corpus,
        args.partition,
        scorer,
        nms_iou=args.nms_iou,
        threshold=getattr(args, "threshold", DEFAULT_THRESHOLD),
        proposals=scorer.proposal_sets(),
        jobs=args.jobs,
    )
    return corpus, report


def _cmd_evaluate(args) -> int:
    corpus, report = _evaluate_report(args)
    out = Path(args.output)
    csv_path = out / "f1_curve.csv"
    _write_text(csv_path, f1_curve_csv(report.f1_points))
    _write_text(out / "ap_per_class.csv", _ap_csv(corpus.classes, report.eval))
    _write_text(
        out / "ap_per_class.svg",
        bar_chart(
            corpus.classes,
            report.eval.per_class_ap,
            f"Average precision by class (mAP={report.eval.map:.3f})",
            "AP",
        ),
    )
    if args.sweep:
        _write_text(out / "f1_curve.svg", _f1_svg(report))
    payload = report.to_dict()
    payload["f1_csv"] = csv_path.name
    _write_text(out / "report.json", json.dumps(payload, indent=2) + "\n")
    print(
        f"mAP={report.eval.map:.4f} detection_f1={report.operating.detection_f1:.4f} "
        f"recognition_f1={report.operating.recognition_f1:.4f} @ threshold={report.config['threshold']}"
    )
    return 0


def _f1_svg(report) -> str:
    det = [(p.threshold, p.detection_f1) for p in report.f1_points]
    rec = [(p.threshold, p.recognition_f1) for p in report.f1_points]
    return line_chart(
        [("detection F1", det), ("recognition F1", rec)],
        "F1 vs no-logo threshold",
        "threshold",
        "F1",
    )


def _cmd_sweep(args) -> int:
    _, report = _evaluate_report(args)
    out = Path(args.output)
    _write_text(out / "sweep.csv", f1_curve_csv(report.f1_points))
    _write_text(out / "f1_curve.svg", _f1_svg(report))
    best = max(report.f1_points, key=lambda p: (p.recognition_f1, -p.threshold))
    print(
        f"best recognition_f1={best.recognition_f1:.4f} at threshold={best.threshold:.2f}"
    )
    return 0


def _cmd_augment(args) -> int:
    corpus = load_corpus(args.corpus, strict=False)
    spec = AugmentSpec(
        flip=not args.no_flip,
        shear_degrees=args.shear_degrees,
        color_shift_fraction=args.color_shift,
        seed=args.seed,
    )
    augmented = augment_corpus(corpus, spec, args.output)
    train, _ = augmented.counts()["train"]
    print(f"wrote {args.output} ({train} training images)")
    return 0


def _cmd_fixture(args) -> int:
    spec = FixtureSpec(
        classes=tuple(f"class{i:02d}" for i in range(args.classes)),
        train_per_class=args.per_class,
        val_per_class=args.val_per_class,
        test_per_class=args.test_per_class,
        no_logo_val=args.no_logo_val,
        no_logo_test=args.no_logo_test,
        image_size=args.image_size,
        seed=args.seed,
    )
    root = generate_fixture(args.output, spec)
    corpus = load_corpus(root, strict=False)
    counts = corpus.counts()
    print(f"wrote {root} " + " ".join(f"{k}={v[0]}+{v[1]}" for k, v in counts.items()))
    return 0


def _cmd_sample_regions(args) -> int:
    corpus = load_corpus(args.corpus, strict=False)
    with open(args.proposals, encoding="utf-8") as fh:
        proposal_sets = read_proposals_jsonl(fh)
    lines = []
    total = 0
    for ann in _iter_partition(corpus, args.partition):
        if ann.image_id not in proposal_sets:
            raise UnknownImage(f"no proposals for image {ann.image_id!r}")
        gts = [(ann.class_id, box) for box in ann.boxes]
        regions = sample_training_regions(
            proposal_sets[ann.image_id],
            gts,
            pos_iou=args.pos_iou,
            neg_iou_range=(args.neg_lo, args.neg_hi),
        )
        for region in regions:
            lines.append(
                json.dumps(
                    {"image_id": ann.image_id, "box": list(region.box), "label": region.label}
                )
            )
        total += len(regions)
    _write_text(Path(args.output), "\n".join(lines) + ("\n" if lines else ""))
    print(f"sampled {total} regions")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logodet",
        description="Region-proposal logo detection: proposals, scoring, NMS, evaluation.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, jobs=False, seed=False):
        if seed:
            p.add_argument("--seed", type=int, default=0)
        if jobs:
            p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("segment", help="segment one image to a colored labeling PPM")
    p.add_argument("image")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--scale", type=float, default=100.0)
    p.add_argument("--sigma", type=float, default=0.8)
    p.add_argument("--min-size", type=int, default=20)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("propose", help="emit selective-search proposals as JSONL")
    p.add_argument("input", help="an image file or a corpus directory")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mode", choices=sorted(_MODES), default=FAST.tag)
    p.add_argument("--partition", choices=("train", "validation", "test", "all"), default="all")
    p.add_argument("--sigma", type=float, default=0.8)
    p.add_argument("--min-size", type=int, default=20)
    add_common(p, jobs=True)
    p.set_defaults(func=_cmd_propose)

    p = sub.add_parser("score", help="score proposals with the histogram baseline")
    p.add_argument("corpus")
    p.add_argument("--proposals", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--temperature", type=float, default=0.05)
    add_common(p, seed=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("detect", help="detect logos in a single image")
    p.add_argument("image")
    p.add_argument("--corpus", required=True)
    p.add_argument("--scores", help="score file to use instead of the baseline scorer")
    p.add_argument("-o", "--output")
    p.add_argument("--mode", choices=sorted(_MODES), default=FAST.tag)
    p.add_argument("--nms-iou", type=float, default=DEFAULT_NMS_IOU)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    add_common(p, seed=True)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("evaluate", help="evaluate a score file against a corpus")
    p.add_argument("corpus")
    p.add_argument("--scores", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--partition", choices=("train", "validation", "test"), default="test")
    p.add_argument("--nms-iou", type=float, default=DEFAULT_NMS_IOU)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    group.add_argument("--sweep", action="store_true", help="also plot the F1 curve")
    add_common(p, jobs=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="threshold sweep: F1 curve CSV and SVG")
    p.add_argument("corpus")
    p.add_argument("--scores", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--partition", choices=("train", "validation", "test"), default="test")
    p.add_argument("--nms-iou", type=float, default=DEFAULT_NMS_IOU)
    add_common(p, jobs=True)
    p.set_defaults(func=_cmd_sweep, sweep=True)

    p = sub.add_parser("augment", help="write a flip/shear/color-shift augmented corpus")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--shear-degrees", type=float, default=5.0)
    p.add_argument("--color-shift", type=float, default=0.03)
    p.add_argument("--no-flip", action="store_true")
    add_common(p, seed=True)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("fixture", help="generate a synthetic color-separable corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--val-per-class", type=int, default=0)
    p.add_argument("--test-per-class", type=int, default=0)
    p.add_argument("--no-logo-val", type=int, default=0)
    p.add_argument("--no-logo-test", type=int, default=0)
    p.add_argument("--image-size", type=int, default=64)
    add_common(p, seed=True)
    p.set_defaults(func=_cmd_fixture)

    p = sub.add_parser(
        "sample-regions", help="label proposals as class/background training regions"
    )
    p.add_argument("corpus")
    p.add_argument("--proposals", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--partition", choices=("train", "validation", "test", "all"), default="train")
    p.add_argument("--pos-iou", type=float, default=0.5)
    p.add_argument("--neg-lo", type=float, default=0.1)
    p.add_argument("--neg-hi", type=float, default=0.5)
    p.set_defaults(func=_cmd_sample_regions)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except LogodetError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"IoFailure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main(argv=None))
