"""Tests for IoU / NMS / AP / mAP / F1-curve math.

Oracles here are written independently of the implementation: AP via the
average-of-precisions-at-TP-ranks form, NMS via a quadratic rescan, F1 via
exhaustive confusion counting on enumerated micro-corpora.
"""

import random

import pytest

from logodet.metrics import (
    NO_LOGO,
    Box,
    Detection,
    DuplicateImage,
    MixedKeys,
    average_precision,
    evaluate_map,
    f1_curve,
    f1_curve_csv,
    iou,
    match_detections,
    nms,
)


def ap_oracle(ranked, total_positives):
    """Average of precision values at true-positive ranks (independent form)."""
    if total_positives <= 0:
        return 0.0
    tp = 0
    precisions = []
    for k, (_score, is_tp) in enumerate(ranked, start=1):
        if is_tp:
            tp += 1
            precisions.append(tp / k)
    return sum(precisions) / total_positives


def nms_oracle(dets, threshold):
    """Quadratic reference NMS: rescan for the max each round."""
    pool = list(dets)
    kept = []
    while pool:
        best = min(pool, key=lambda d: (-d.score, d.box))
        kept.append(best)
        pool = [d for d in pool if d is not best and iou(best.box, d.box) <= threshold]
    return kept


def random_box(rng, span=100):
    x0 = rng.randrange(0, span - 1)
    y0 = rng.randrange(0, span - 1)
    return Box(x0, y0, rng.randrange(x0 + 1, span), rng.randrange(y0 + 1, span))


# --- iou ---


def test_iou_identity():
    b = Box(3, 4, 17, 30)
    assert iou(b, b) == 1.0


def test_iou_disjoint():
    assert iou(Box(0, 0, 10, 10), Box(20, 20, 30, 30)) == 0.0


def test_iou_half_overlap_is_one_third():
    # intersection 10x5 = 50, union 100 + 100 - 50 = 150
    assert iou(Box(0, 0, 10, 10), Box(0, 5, 10, 15)) == 1 / 3


def test_iou_touching_boxes_do_not_overlap():
    # half-open boxes sharing an edge have empty intersection
    assert iou(Box(0, 0, 10, 10), Box(10, 0, 20, 10)) == 0.0


def test_iou_symmetric_and_bounded():
    rng = random.Random(7)
    for _ in range(200):
        a, b = random_box(rng), random_box(rng)
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0


# --- nms ---


def det(score, box, image_id="img", class_id=0):
    return Detection(image_id, class_id, score, box)


def test_nms_single_detection():
    d = det(0.5, Box(0, 0, 10, 10))
    assert nms([d], 0.3) == [d]


def test_nms_identical_boxes_keep_higher_score():
    a = det(0.9, Box(0, 0, 10, 10))
    b = det(0.8, Box(0, 0, 10, 10))
    assert nms([b, a], 0.5) == [a]


def test_nms_overlapping_pair_plus_disjoint():
    # A and B overlap with iou 0.6 (> 0.5), C is far away
    a = det(0.9, Box(0, 0, 10, 10))
    b = det(0.8, Box(0, 0, 10, 6))  # iou = 60/100 = 0.6
    c = det(0.7, Box(50, 50, 60, 60))
    assert iou(a.box, b.box) == 0.6
    assert nms([c, b, a], 0.5) == [a, c]


def test_nms_keeps_boxes_at_exact_threshold():
    # suppression requires iou strictly greater than the threshold
    a = det(0.9, Box(0, 0, 10, 10))
    b = det(0.8, Box(0, 0, 10, 6))
    assert nms([a, b], 0.6) == [a, b]


def test_nms_mixed_keys_rejected():
    a = det(0.9, Box(0, 0, 10, 10), image_id="x")
    b = det(0.8, Box(0, 0, 10, 10), image_id="y")
    with pytest.raises(MixedKeys):
        nms([a, b], 0.5)
    c = det(0.8, Box(0, 0, 10, 10), image_id="x", class_id=3)
    with pytest.raises(MixedKeys):
        nms([a, c], 0.5)


def test_nms_matches_oracle_and_is_idempotent():
    rng = random.Random(11)
    for _ in range(100):
        dets = [det(round(rng.random(), 3), random_box(rng, 40)) for _ in range(rng.randrange(0, 25))]
        for threshold in (0.0, 0.3, 0.5, 0.9):
            kept = nms(dets, threshold)
            assert kept == nms_oracle(dets, threshold)
            assert nms(kept, threshold) == kept
            scores = [d.score for d in kept]
            assert scores == sorted(scores, reverse=True)
            for i, a in enumerate(kept):
                for b in kept[i + 1 :]:
                    assert iou(a.box, b.box) <= threshold


# --- average_precision ---


def test_ap_perfect_single():
    assert average_precision([(0.9, True)], 1) == 1.0


def test_ap_miss_then_hit():
    # P(2) = 1/2 and the only recall step happens there
    assert average_precision([(0.9, False), (0.8, True)], 1) == 0.5


def test_ap_hit_miss_hit():
    # 1*0.5 + (2/3)*0.5 = 5/6
    got = average_precision([(0.9, True), (0.8, False), (0.7, True)], 2)
    assert abs(got - 5 / 6) <= 1e-12


def test_ap_empty_list_zero_positives():
    assert average_precision([], 0) == 0.0


def test_ap_no_true_positives():
    assert average_precision([(0.9, False), (0.5, False)], 3) == 0.0


def test_ap_matches_bruteforce_oracle():
    rng = random.Random(23)
    for _ in range(300):
        n = rng.randrange(0, 51)
        ranked = sorted(
            ((rng.random(), rng.random() < 0.4) for _ in range(n)),
            key=lambda e: -e[0],
        )
        tps = sum(1 for _, hit in ranked if hit)
        total = tps + rng.randrange(0, 4)
        assert abs(average_precision(ranked, total) - ap_oracle(ranked, total)) <= 1e-12


# --- match_detections ---


class Ann:
    """Minimal annotation record for matching tests."""

    def __init__(self, image_id, class_id, boxes):
        self.image_id = image_id
        self.class_id = class_id
        self.boxes = boxes


def test_match_exact_hit():
    gt = Ann("a", 0, [Box(0, 0, 10, 10)])
    d = det(0.9, Box(0, 0, 10, 10), image_id="a")
    result = match_detections([d], [gt], 0.5)
    assert result[0] == ([(0.9, True)], 1)


def test_match_duplicate_consumes_gt_once():
    gt = Ann("a", 0, [Box(0, 0, 10, 10)])
    d1 = det(0.9, Box(0, 0, 10, 10), image_id="a")
    d2 = det(0.8, Box(0, 0, 10, 9), image_id="a")
    ranked, total = match_detections([d1, d2], [gt], 0.5)[0]
    assert ranked == [(0.9, True), (0.8, False)]
    assert total == 1


def test_match_low_iou_is_false_positive():
    gt = Ann("a", 0, [Box(0, 0, 10, 10)])
    d = det(0.9, Box(0, 0, 10, 4), image_id="a")  # iou 0.4
    assert iou(d.box, gt.boxes[0]) == 0.4
    ranked, total = match_detections([d], [gt], 0.5)[0]
    assert ranked == [(0.9, False)]
    assert total == 1


def test_match_prefers_highest_iou_unmatched_gt():
    gts = [Ann("a", 0, [Box(0, 0, 10, 10), Box(0, 0, 10, 8)])]
    d1 = det(0.9, Box(0, 0, 10, 8), image_id="a")  # iou 1.0 with second gt
    d2 = det(0.8, Box(0, 0, 10, 10), image_id="a")
    ranked, total = match_detections([d1, d2], gts, 0.5)[0]
    assert ranked == [(0.9, True), (0.8, True)]
    assert total == 2


def test_match_ignores_wrong_class_and_wrong_image():
    gt = Ann("a", 0, [Box(0, 0, 10, 10)])
    wrong_class = det(0.9, Box(0, 0, 10, 10), image_id="a", class_id=1)
    wrong_image = det(0.8, Box(0, 0, 10, 10), image_id="b", class_id=0)
    result = match_detections([wrong_class, wrong_image], [gt], 0.5)
    assert result[0][0] == [(0.8, False)]
    assert result[1] == ([(0.9, False)], 0)


def test_match_rank_invariant_under_monotone_score_map():
    rng = random.Random(5)
    gts = [Ann(f"i{k}", k % 3, [random_box(rng, 50) for _ in range(2)]) for k in range(6)]
    dets = [
        det(rng.random(), random_box(rng, 50), image_id=f"i{rng.randrange(6)}", class_id=rng.randrange(3))
        for _ in range(40)
    ]
    base = match_detections(dets, gts, 0.5)
    squashed = [d._replace(score=d.score * 0.5 + 0.25) for d in dets]
    scaled = match_detections(squashed, gts, 0.5)
    for class_id, (ranked, total) in base.items():
        flags = [hit for _s, hit in ranked]
        assert [hit for _s, hit in scaled[class_id][0]] == flags
        assert scaled[class_id][1] == total
        assert abs(
            average_precision(ranked, total)
            - average_precision(scaled[class_id][0], total)
        ) <= 1e-12


# --- evaluate_map ---


def test_map_perfect_detections():
    gts = [
        Ann("a", 0, [Box(0, 0, 10, 10)]),
        Ann("b", 1, [Box(5, 5, 25, 25)]),
    ]
    dets = [
        det(0.9, Box(0, 0, 10, 10), image_id="a", class_id=0),
        det(0.8, Box(5, 5, 25, 25), image_id="b", class_id=1),
    ]
    report = evaluate_map(dets, gts, 0.5, num_classes=2)
    assert report.per_class_ap == [1.0, 1.0]
    assert report.map == 1.0
    assert report.empty_classes == []


def test_map_no_detections():
    gts = [Ann("a", 0, [Box(0, 0, 10, 10)])]
    report = evaluate_map([], gts, 0.5, num_classes=2)
    assert report.map == 0.0
    assert report.per_class_ap == [0.0, 0.0]
    assert report.empty_classes == [1]


def test_map_two_class_micro_corpus():
    # class 0 reproduces the miss-then-hit AP example (0.5), class 1 the
    # hit-miss-hit example (5/6); mAP is their mean
    gts = [
        Ann("a", 0, [Box(0, 0, 10, 10)]),
        Ann("b", 1, [Box(0, 0, 10, 10)]),
        Ann("c", 1, [Box(0, 0, 10, 10)]),
    ]
    dets = [
        det(0.9, Box(50, 50, 60, 60), image_id="a", class_id=0),
        det(0.8, Box(0, 0, 10, 10), image_id="a", class_id=0),
        det(0.9, Box(0, 0, 10, 10), image_id="b", class_id=1),
        det(0.8, Box(50, 50, 60, 60), image_id="b", class_id=1),
        det(0.7, Box(0, 0, 10, 10), image_id="c", class_id=1),
    ]
    report = evaluate_map(dets, gts, 0.5, num_classes=2)
    assert report.per_class_ap[0] == 0.5
    assert abs(report.per_class_ap[1] - 5 / 6) <= 1e-12
    assert abs(report.map - (0.5 + 5 / 6) / 2) <= 1e-12


def test_map_permutation_invariant():
    rng = random.Random(31)
    gts = [Ann(f"i{k}", k % 4, [random_box(rng, 60) for _ in range(2)]) for k in range(8)]
    dets = [
        det(
            round(rng.random(), 3),
            random_box(rng, 60),
            image_id=f"i{rng.randrange(8)}",
            class_id=rng.randrange(4),
        )
        for _ in range(60)
    ]
    base = evaluate_map(dets, gts, 0.5, num_classes=4)
    for seed in range(5):
        shuffled = dets[:]
        random.Random(seed).shuffle(shuffled)
        report = evaluate_map(shuffled, gts, 0.5, num_classes=4)
        assert report.per_class_ap == base.per_class_ap
        assert report.map == base.map


# --- f1_curve ---


def test_f1_all_correct():
    truth = [("a", 1), ("b", 2)]
    tops = [("a", 1, 1.0), ("b", 2, 1.0)]
    (point,) = f1_curve(tops, truth, [0.5])
    assert point.detection_f1 == 1.0
    assert point.recognition_f1 == 1.0


def test_f1_threshold_zero_predicts_everything():
    truth = [("a", 1), ("b", NO_LOGO), ("c", NO_LOGO)]
    tops = [("a", 1, 0.2), ("b", 3, 0.1), ("c", 4, 0.05)]
    (point,) = f1_curve(tops, truth, [0.0])
    # every image predicted logo: detection recall 1, precision = logo fraction
    precision = 1 / 3
    assert point.detection_f1 == pytest.approx(2 * precision * 1 / (precision + 1))


def test_f1_six_image_micro_corpus():
    # 3 logo images: two with correct top class (scores .9 and .4), one with a
    # wrong class at .8; 3 no-logo images with top scores .2 / .35 / .7.
    # At t=0.5 the predictions are: L1 -> class 2 (correct), L2 -> NO_LOGO
    # (0.4 below threshold), L3 -> class 9 (wrong), N1/N2 -> NO_LOGO,
    # N3 -> class 5 (false positive).
    # Detection: TP {L1, L3}, FP {N3}, FN {L2}: P = R = 2/3.
    # Recognition: correct {L1}; logo-class predictions {L1, L3, N3}: P = 1/3;
    # logo-bearing images 3: R = 1/3.
    truth = [("L1", 2), ("L2", 7), ("L3", 4), ("N1", NO_LOGO), ("N2", NO_LOGO), ("N3", NO_LOGO)]
    tops = [
        ("L1", 2, 0.9),
        ("L2", 7, 0.4),
        ("L3", 9, 0.8),
        ("N1", 1, 0.2),
        ("N2", 3, 0.35),
        ("N3", 5, 0.7),
    ]
    (point,) = f1_curve(tops, truth, [0.5])
    assert point.detection_f1 == pytest.approx(2 / 3)
    assert point.recognition_f1 == pytest.approx(1 / 3)


def test_f1_above_max_score_everything_is_no_logo():
    truth = [("a", 1), ("b", NO_LOGO)]
    tops = [("a", 1, 0.9), ("b", 2, 0.3)]
    points = f1_curve(tops, truth, [0.0, 0.95])
    last = points[-1]
    # zero predictions: precision vacuously 1, recall 0
    assert last.detection_f1 == 0.0
    assert last.recognition_f1 == 0.0


def test_f1_no_logo_tops_never_predict_logo():
    truth = [("a", NO_LOGO), ("b", 3)]
    tops = [("a", NO_LOGO, 0.0), ("b", 3, 0.8)]
    (point,) = f1_curve(tops, truth, [0.0])
    assert point.detection_f1 == 1.0
    assert point.recognition_f1 == 1.0


def test_f1_duplicate_image_rejected():
    truth = [("a", 1)]
    with pytest.raises(DuplicateImage):
        f1_curve([("a", 1, 0.5), ("a", 1, 0.6)], truth, [0.5])
    with pytest.raises(DuplicateImage):
        f1_curve([("a", 1, 0.5)], [("a", 1), ("a", 2)], [0.5])


def test_f1_thresholds_must_increase():
    truth = [("a", 1)]
    tops = [("a", 1, 0.5)]
    with pytest.raises(ValueError):
        f1_curve(tops, truth, [0.5, 0.5])


def test_f1_csv_shape():
    truth = [("a", 1)]
    tops = [("a", 1, 0.5)]
    text = f1_curve_csv(f1_curve(tops, truth, [0.0, 0.5, 1.0]))
    lines = text.strip().split("\n")
    assert lines[0] == "threshold,detection_f1,recognition_f1"
    assert len(lines) == 4
