import numpy as np
import pytest

from textperc.detect import (
    connected_components,
    instance_polygon,
    match_head_tail,
    overlay_classes,
    polygon_iou,
)
from textperc.geom import annotate
from textperc.labels import RegionClass, gen_score_maps
from textperc.pipeline import detect_instances

from .conftest import ribbon_points


def one_hot(labels):
    """Ideal per-class scores from a hard label map."""
    scores = np.zeros(labels.shape + (5,), dtype=float)
    for cls in RegionClass:
        scores[labels == cls, int(cls)] = 1.0
    return scores


def rect(x0, y0, x1, y1):
    return annotate(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float))


class TestOverlay:
    def test_gt_one_hot_round_trip(self):
        score = gen_score_maps([rect(0, 0, 100, 32)], (64, 128))
        assert np.array_equal(overlay_classes(one_hot(score.labels)), score.labels)

    def test_priority_order(self):
        # a pixel firing on every class ends up as top/bottom boundary
        scores = np.zeros((1, 2, 5))
        scores[0, 0, :] = 1.0
        scores[0, 1, [RegionClass.Center, RegionClass.Head]] = 1.0
        labels = overlay_classes(scores)
        assert labels[0, 0] == RegionClass.TopBottomBoundary
        assert labels[0, 1] == RegionClass.Head

    def test_below_threshold_is_background(self):
        scores = np.full((2, 2, 5), 0.49)
        assert (overlay_classes(scores) == RegionClass.Background).all()

    def test_per_class_thresholds(self):
        scores = np.zeros((1, 1, 5))
        scores[0, 0, RegionClass.Center] = 0.3
        assert overlay_classes(scores)[0, 0] == RegionClass.Background
        got = overlay_classes(scores, {RegionClass.Center: 0.25})
        assert got[0, 0] == RegionClass.Center

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            overlay_classes(np.zeros((4, 4, 3)))


class TestComponents:
    def test_two_blobs(self):
        labels = np.zeros((8, 12), dtype=np.uint8)
        labels[1:4, 1:4] = RegionClass.Center
        labels[5:7, 8:11] = RegionClass.Center
        comps = connected_components(labels, RegionClass.Center)
        assert comps.count == 2
        assert sorted(comps.component_area) == [6, 9]

    def test_diagonal_checkerboard_is_one_component(self):
        labels = np.indices((6, 6)).sum(axis=0) % 2
        labels = (labels * int(RegionClass.Center)).astype(np.uint8)
        comps = connected_components(labels, RegionClass.Center)
        assert comps.count == 1

    def test_other_classes_ignored(self):
        labels = np.zeros((4, 4), dtype=np.uint8)
        labels[0, 0] = RegionClass.Head
        assert connected_components(labels, RegionClass.Center).count == 0


class TestMatching:
    def _labels(self):
        labels = np.zeros((16, 48), dtype=np.uint8)
        labels[4:12, 10:38] = RegionClass.Center
        labels[4:12, 4:10] = RegionClass.Head
        labels[4:12, 38:44] = RegionClass.Tail
        return labels

    def test_simple_pairing(self):
        instances, _ = detect_instances(self._labels())
        assert len(instances) == 1
        inst = instances[0]
        assert not inst.filtered
        assert inst.head_component == 1 and inst.tail_component == 1

    def test_missing_head_filtered(self):
        labels = self._labels()
        labels[labels == RegionClass.Head] = RegionClass.Background
        instances, _ = detect_instances(labels)
        assert instances[0].filtered
        assert instances[0].filter_reason == "missing head"

    def test_missing_both_reason(self):
        labels = np.zeros((8, 8), dtype=np.uint8)
        labels[2:6, 2:6] = RegionClass.Center
        instances, _ = detect_instances(labels)
        assert instances[0].filter_reason == "missing head+tail"

    def test_max_area_candidate_wins(self):
        labels = self._labels()
        # a second, larger head blob also adjacent to the same center
        labels[12:16, 8:14] = RegionClass.Head  # touches the dilated center
        instances, comps = detect_instances(labels)
        inst = instances[0]
        areas = comps.head.component_area
        chosen = inst.head_component
        assert areas[chosen - 1] == areas.max()

    def test_far_blob_not_matched(self):
        labels = self._labels()
        labels[0, 47] = RegionClass.Tail  # isolated, far from the center
        instances, comps = detect_instances(labels)
        inst = instances[0]
        tail_mask = comps.tail.mask(inst.tail_component)
        assert not tail_mask[0, 47]

    def test_enumeration_order_independent(self):
        labels = self._labels()
        flipped = labels[:, ::-1].copy()
        a, _ = detect_instances(labels)
        b, _ = detect_instances(flipped)
        assert len(a) == len(b) == 1
        assert a[0].filtered == b[0].filtered is False

    def test_three_instance_gt_round_trip(self):
        anns = [
            annotate(ribbon_points(start=(20, 40))),
            rect(30, 120, 160, 156),
            rect(20, 180, 150, 214),
        ]
        score = gen_score_maps(anns, (240, 200))
        instances, _ = detect_instances(overlay_classes(one_hot(score.labels)))
        assert len(instances) == 3
        assert all(not inst.filtered for inst in instances)


class TestPolygons:
    def test_polygon_requires_fiducials(self):
        instances, _ = detect_instances(np.zeros((4, 4), dtype=np.uint8))
        assert instances == []
        from textperc.detect import DetectedInstance

        with pytest.raises(ValueError, match="fiducial"):
            instance_polygon(DetectedInstance(center_component=1))

    def test_self_intersection_flagged(self):
        from textperc.detect import DetectedInstance
        from textperc.fiducials import FiducialSet

        bow = np.array([[0, 0], [10, 10], [10, 0], [0, 10]], dtype=float)
        inst = DetectedInstance(center_component=1)
        inst.fiducials = FiducialSet(points=bow, n=2, provenance=[])
        instance_polygon(inst)
        assert inst.self_intersecting

    def test_iou_identity(self):
        sq = np.array([[0, 0], [4, 0], [4, 4], [0, 4]], dtype=float)
        assert polygon_iou(sq, sq) == pytest.approx(1.0)

    def test_iou_disjoint(self):
        a = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        b = a + 10
        assert polygon_iou(a, b) == 0.0

    def test_iou_half_overlap(self):
        a = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], dtype=float)
        b = a + [1, 0]
        # intersection 2, union 6
        assert polygon_iou(a, b) == pytest.approx(1 / 3)
