import numpy as np
import pytest

from textperc.detect import connected_components
from textperc.geom import annotate
from textperc.labels import (
    BandWidthConfig,
    RegionClass,
    deserialize_labels,
    gen_geometry_maps,
    gen_labels,
    gen_score_maps,
    nearest_on_polyline,
    serialize_labels,
)
from textperc.tensorio import TensorFormatError

from .conftest import ribbon_points


def rect(x0, y0, x1, y1):
    return annotate(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float))


def classify_rect_pixel(x, y, x0, y0, x1, y1, cfg=BandWidthConfig()):
    """Signed-distance oracle for an axis-aligned rectangle's overlay class.

    Applies the same precedence as the ordered overlay: boundary band over
    tail over head over center over background.
    """
    min_len = min(x1 - x0, y1 - y0)
    tb_half = cfg.delta_topbottom * min_len / 2
    ht = cfg.delta_headtail * min_len
    inside = x0 <= x <= x1 and y0 <= y <= y1
    if min(abs(y - y0), abs(y - y1)) <= tb_half and x0 <= x <= x1:
        return RegionClass.TopBottomBoundary
    if not inside:
        return RegionClass.Background
    if x1 - x <= ht:
        return RegionClass.Tail
    if x - x0 <= ht:
        return RegionClass.Head
    return RegionClass.Center


class TestScoreMaps:
    def test_rectangle_spot_checks(self):
        score = gen_score_maps([rect(0, 0, 100, 32)], (64, 128))
        assert score.labels[16, 50] == RegionClass.Center
        assert score.labels[16, 2] == RegionClass.Head  # head band is 9.6 px deep
        assert score.labels[1, 50] == RegionClass.TopBottomBoundary  # 6.4 px straddling y=0

    def test_rectangle_matches_signed_distance_oracle(self):
        score = gen_score_maps([rect(10, 8, 110, 40)], (64, 128))
        mismatches = 0
        for y in range(64):
            for x in range(128):
                expected = classify_rect_pixel(x, y, 10, 8, 110, 40)
                if score.labels[y, x] != expected:
                    mismatches += 1
        # rasterization boundary pixels may differ from the open/closed
        # conventions of the oracle; the interiors must agree exactly
        assert mismatches <= 8

    def test_empty_annotations(self):
        score = gen_score_maps([], (32, 32))
        assert (score.labels == RegionClass.Background).all()
        assert (score.instance_ids == 0).all()

    def test_nonbackground_pixels_have_instance_id(self):
        score = gen_score_maps([rect(0, 0, 100, 32)], (64, 128))
        fg = score.labels != RegionClass.Background
        assert (score.instance_ids[fg] > 0).all()
        assert (score.instance_ids[~fg] == 0).all()

    def test_touching_instances_stay_separated(self):
        # stacked rectangles whose boundary bands touch
        a = rect(10, 10, 110, 42)
        b = rect(10, 44, 110, 76)
        score = gen_score_maps([a, b], (96, 128))
        comps = connected_components(score.labels, RegionClass.Center)
        assert comps.count == 2

    def test_overlay_priority_boundary_wins(self):
        # a short rectangle: head band (9.6 px) and the boundary band
        # (3.2 px in/out of the top edge) overlap near the top-left corner
        score = gen_score_maps([rect(0, 0, 100, 32)], (64, 128))
        assert score.labels[2, 2] == RegionClass.TopBottomBoundary

    def test_later_instance_overwrites(self):
        a = rect(0, 0, 60, 32)
        b = rect(30, 0, 90, 32)
        score = gen_score_maps([a, b], (64, 128))
        assert score.instance_ids[16, 45] == 2

    def test_min_region_presence(self):
        ann = annotate(ribbon_points(), fixed_layout=14)
        score = gen_score_maps([ann], (128, 192))
        for cls in (RegionClass.Center, RegionClass.Head, RegionClass.Tail):
            assert (score.labels == cls).sum() > 0

    def test_deterministic(self):
        anns = [annotate(ribbon_points(), fixed_layout=14)]
        a = gen_score_maps(anns, (128, 192))
        b = gen_score_maps(anns, (128, 192))
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.instance_ids, b.instance_ids)

    def test_tiny_instance_flagged(self):
        score = gen_score_maps([rect(5, 5, 20, 8)], (32, 32))  # minLen = 3
        assert score.tiny_ids == [1]


class TestGeometryMaps:
    def setup_method(self):
        self.ann = rect(0, 0, 100, 32)
        self.score, self.geo = gen_labels([self.ann], (64, 128))

    def test_head_pixel_corner_offsets(self):
        assert self.score.labels[10, 4] == RegionClass.Head
        assert tuple(self.geo.corner_offsets[10, 4, 0:2]) == (-4, -10)
        assert tuple(self.geo.corner_offsets[10, 4, 2:4]) == (-4, 22)

    def test_tail_pixel_corner_offsets(self):
        assert self.score.labels[10, 96] == RegionClass.Tail
        assert tuple(self.geo.corner_offsets[10, 96, 4:6]) == (4, -10)  # to (100, 0)
        assert tuple(self.geo.corner_offsets[10, 96, 6:8]) == (4, 22)  # to (100, 32)

    def test_center_pixel_boundary_offsets(self):
        assert self.score.labels[16, 50] == RegionClass.Center
        assert tuple(self.geo.boundary_offsets[16, 50, 0:2]) == (0, -16)
        assert tuple(self.geo.boundary_offsets[16, 50, 2:4]) == (0, 16)

    def test_proximity_downweights_long_axis(self):
        w = self.geo.valid_mask[16, 50, 8:12]
        assert tuple(w) == (0.1, 1.0, 0.1, 1.0)

    def test_background_mask_zero(self):
        assert (self.geo.valid_mask[60, 120] == 0).all()

    def test_vertical_rectangle_downweights_y(self):
        # vertical text: reading order runs down, so the y pair is long-axis
        pts = np.array([[30, 10], [62, 10], [62, 110], [30, 110]], dtype=float)
        ann = annotate(pts, reorient_vertical=False)
        score, geo = gen_labels([ann], (128, 96))
        ys, xs = np.nonzero(score.labels == RegionClass.Center)
        w = geo.valid_mask[ys[0], xs[0], 8:12]
        assert tuple(w) == (1.0, 0.1, 1.0, 0.1)

    def test_boundary_offset_identity_for_rectangles(self):
        # for an axis-aligned rectangle the top-chain offset cancels the
        # pixel's height above the top edge exactly
        ys, xs = np.nonzero(self.score.labels == RegionClass.Center)
        dy1 = self.geo.boundary_offsets[ys, xs, 1]
        assert np.allclose(dy1 + ys, 0.0)

    def test_band_inner_edge_mode_insets_targets(self):
        _, geo_edge = gen_labels([self.ann], (64, 128), boundary_target="band_inner_edge")
        # inner edge of the 6.4-px band sits 3.2 px below the top chain
        assert self.geo.boundary_offsets[16, 50, 1] == -16
        assert geo_edge.boundary_offsets[16, 50, 1] == pytest.approx(-12.8)

    def test_nearest_point_matches_bruteforce(self):
        rng = np.random.default_rng(0)
        chain = np.cumsum(rng.uniform(0.5, 3.0, (8, 2)), axis=0)
        queries = rng.uniform(-2, 14, (40, 2))
        got = nearest_on_polyline(queries, chain)
        for q, g in zip(queries, got):
            # dense sampling of the polyline as the oracle
            best = min(
                (
                    (np.linalg.norm(q - ((1 - t) * chain[i] + t * chain[i + 1])), i, t)
                    for i in range(len(chain) - 1)
                    for t in np.linspace(0, 1, 2001)
                ),
            )
            assert np.linalg.norm(g - q) <= best[0] + 1e-5

    def test_corner_offsets_only_on_head_tail(self):
        mask = self.geo.valid_mask
        head = self.score.labels == RegionClass.Head
        tail = self.score.labels == RegionClass.Tail
        assert (mask[..., 0:4][~head] == 0).all()
        assert (mask[..., 4:8][~tail] == 0).all()
        center = self.score.labels == RegionClass.Center
        assert (mask[..., 8:12][~center] == 0).all()

    def test_tiny_instance_unsupervised(self):
        score, geo = gen_labels([rect(5, 5, 20, 8)], (32, 32))
        assert (geo.valid_mask == 0).all()

    def test_orphan_instance_id_rejected(self):
        score = gen_score_maps([self.ann], (64, 128))
        with pytest.raises(ValueError, match="no annotation"):
            gen_geometry_maps([], score)


class TestSerialization:
    def test_round_trip_bit_identical(self, tmp_path):
        ann = annotate(ribbon_points(), fixed_layout=14)
        score, geo = gen_labels([ann], (128, 192))
        serialize_labels(score, geo, tmp_path / "bundle")
        score2, geo2 = deserialize_labels(tmp_path / "bundle")
        assert np.array_equal(score.labels, score2.labels)
        assert np.array_equal(score.instance_ids, score2.instance_ids)
        assert np.array_equal(geo.corner_offsets, geo2.corner_offsets)
        assert np.array_equal(geo.boundary_offsets, geo2.boundary_offsets)
        assert np.array_equal(geo.valid_mask, geo2.valid_mask)

    def test_truncated_bundle_file(self, tmp_path):
        score, geo = gen_labels([rect(0, 0, 40, 16)], (32, 64))
        serialize_labels(score, geo, tmp_path / "bundle")
        f = tmp_path / "bundle" / "labels.tpt"
        f.write_bytes(f.read_bytes()[:10])
        with pytest.raises(TensorFormatError):
            deserialize_labels(tmp_path / "bundle")

    def test_wrong_magic(self, tmp_path):
        score, geo = gen_labels([rect(0, 0, 40, 16)], (32, 64))
        serialize_labels(score, geo, tmp_path / "bundle")
        f = tmp_path / "bundle" / "corner_offsets.tpt"
        f.write_bytes(b"XXXX" + f.read_bytes()[4:])
        with pytest.raises(TensorFormatError, match="magic"):
            deserialize_labels(tmp_path / "bundle")
