import numpy as np
import pytest

from densekit.geometry import Box, iou
from densekit.nms import Detection, NmsConfig, nms

from oracles import reference_nms


def random_detections(rng, n, span=400.0, max_side=80.0):
    dets = []
    for _ in range(n):
        x1 = float(rng.uniform(0, span))
        y1 = float(rng.uniform(0, span))
        w = float(rng.uniform(1, max_side))
        h = float(rng.uniform(1, max_side))
        dets.append(Detection(Box(x1, y1, x1 + w, y1 + h),
                              float(rng.uniform(0, 1))))
    return dets


class TestNmsConfig:
    def test_defaults_are_the_tuned_values(self):
        cfg = NmsConfig()
        assert (cfg.pre_topk, cfg.score_threshold,
                cfg.iou_threshold, cfg.max_out) == (3000, 0.05, 0.7, 400)

    def test_validation(self):
        with pytest.raises(ValueError):
            NmsConfig(pre_topk=0)
        with pytest.raises(ValueError):
            NmsConfig(score_threshold=1.5)
        with pytest.raises(ValueError):
            NmsConfig(iou_threshold=-0.1)
        with pytest.raises(ValueError):
            NmsConfig(max_out=0)

    def test_detection_score_validation(self):
        with pytest.raises(ValueError):
            Detection(Box(0, 0, 1, 1), 1.5)
        with pytest.raises(ValueError):
            Detection(Box(0, 0, 1, 1), float("nan"))


class TestNms:
    def test_empty_input(self):
        assert nms([], NmsConfig()) == []

    def test_single_detection_kept(self):
        d = Detection(Box(0, 0, 10, 10), 0.9)
        assert nms([d], NmsConfig()) == [d]

    def test_identical_boxes_keep_highest_score(self):
        lo = Detection(Box(0, 0, 10, 10), 0.8)
        hi = Detection(Box(0, 0, 10, 10), 0.9)
        out = nms([lo, hi], NmsConfig(iou_threshold=0.7))
        assert out == [hi]

    def test_score_threshold_drops_but_keeps_equal(self):
        a = Detection(Box(0, 0, 10, 10), 0.05)
        b = Detection(Box(50, 50, 60, 60), 0.04)
        out = nms([a, b], NmsConfig(score_threshold=0.05))
        assert out == [a]

    def test_equal_scores_keep_input_order(self):
        a = Detection(Box(0, 0, 10, 10), 0.5)
        b = Detection(Box(0, 0, 10, 10), 0.5)
        out = nms([a, b], NmsConfig(iou_threshold=0.5))
        assert len(out) == 1 and out[0] is a

    def test_suppression_strictly_above_threshold(self):
        # pair IoU is exactly 1/3 (inter 50, union 150)
        a = Detection(Box(0, 0, 10, 10), 0.9)
        b = Detection(Box(0, 5, 10, 15), 0.8)
        assert iou(a.box, b.box) == 1 / 3
        # at the exact threshold nothing is suppressed (strict inequality)
        assert len(nms([a, b], NmsConfig(iou_threshold=1 / 3))) == 2
        # just below, the lower-scoring box goes
        assert nms([a, b], NmsConfig(iou_threshold=0.33)) == [a]

    def test_pre_topk_truncates_before_suppression(self):
        dets = [Detection(Box(0, 0, 10, 10), 0.9),
                Detection(Box(100, 100, 110, 110), 0.8),
                Detection(Box(0, 0, 10, 10), 0.7)]
        out = nms(dets, NmsConfig(pre_topk=2, iou_threshold=0.99))
        assert out == dets[:2]

    def test_max_out_caps_output(self):
        dets = [Detection(Box(i * 50, 0, i * 50 + 10, 10), 0.9 - i * 0.01)
                for i in range(10)]
        out = nms(dets, NmsConfig(max_out=3))
        assert out == dets[:3]

    def test_output_is_subset_and_sorted(self):
        rng = np.random.default_rng(51)
        dets = random_detections(rng, 120)
        out = nms(dets, NmsConfig(pre_topk=100, score_threshold=0.1,
                                  iou_threshold=0.5, max_out=50))
        ids = {id(d) for d in dets}
        assert all(id(d) in ids for d in out)
        scores = [d.score for d in out]
        assert scores == sorted(scores, reverse=True)

    def test_output_pairwise_iou_bounded(self):
        rng = np.random.default_rng(52)
        dets = random_detections(rng, 150, span=150.0)
        thr = 0.3
        out = nms(dets, NmsConfig(iou_threshold=thr))
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                assert iou(out[i].box, out[j].box) <= thr

    def test_score_threshold_monotonicity(self):
        rng = np.random.default_rng(53)
        dets = random_detections(rng, 100)
        lo = nms(dets, NmsConfig(score_threshold=0.2))
        hi = nms(dets, NmsConfig(score_threshold=0.4))
        assert {id(d) for d in hi} <= {id(d) for d in lo}

    def test_determinism(self):
        rng = np.random.default_rng(54)
        dets = random_detections(rng, 80)
        cfg = NmsConfig(iou_threshold=0.4)
        assert nms(dets, cfg) == nms(dets, cfg)

    def test_matches_reference_on_random_cases(self):
        rng = np.random.default_rng(55)
        for _ in range(300):
            n = int(rng.integers(0, 200))
            dets = random_detections(rng, n, span=float(rng.uniform(50, 500)))
            cfg = NmsConfig(
                pre_topk=int(rng.integers(1, 250)),
                score_threshold=float(rng.uniform(0, 0.5)),
                iou_threshold=float(rng.uniform(0, 1)),
                max_out=int(rng.integers(1, 250)),
            )
            ours = nms(dets, cfg)
            ref = reference_nms(dets, cfg.pre_topk, cfg.score_threshold,
                                cfg.iou_threshold, cfg.max_out)
            assert [id(d) for d in ours] == [id(d) for d in ref]

    def test_matches_reference_with_tied_scores(self):
        rng = np.random.default_rng(56)
        for _ in range(50):
            n = int(rng.integers(2, 120))
            dets = random_detections(rng, n)
            # quantize scores hard so ties are common
            dets = [Detection(d.box, round(d.score, 1)) for d in dets]
            cfg = NmsConfig(pre_topk=60, score_threshold=0.1,
                            iou_threshold=0.45, max_out=40)
            ours = nms(dets, cfg)
            ref = reference_nms(dets, 60, 0.1, 0.45, 40)
            assert [id(d) for d in ours] == [id(d) for d in ref]
