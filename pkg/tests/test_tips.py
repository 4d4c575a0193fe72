import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from microseg.tips import (
    DESCRIPTOR_FIELDS,
    TEMPLATES,
    Silhouette,
    TipTrajectory,
    candidate_descriptors,
    convex_hull,
    cosine,
    instrument_silhouette,
    load_references,
    localize_tip,
    measure_reference,
    polygon_centroid,
    rasterize_convex,
    read_silhouettes,
    rle_decode,
    rle_encode,
    select_tip,
    to_global,
    vertex_descriptor,
    wedge_polygon,
    write_silhouettes,
)
from oracles import brute_hull, cross

int_points = st.lists(st.tuples(st.integers(-6, 6), st.integers(-6, 6)), min_size=1, max_size=25)


@given(int_points)
def test_hull_matches_brute_force(points):
    hull = convex_hull(points)
    assert set(hull) == brute_hull(points)


@given(int_points)
def test_hull_is_counter_clockwise_and_strictly_convex(points):
    hull = convex_hull(points)
    if len(hull) >= 3:
        for i in range(len(hull)):
            assert cross(hull[i], hull[(i + 1) % len(hull)], hull[(i + 2) % len(hull)]) > 0


def test_hull_edge_cases():
    with pytest.raises(ValueError):
        convex_hull([])
    assert convex_hull([(1, 1), (1, 1)]) == [(1.0, 1.0)]
    assert set(convex_hull([(0, 0), (1, 1), (2, 2)])) == {(0.0, 0.0), (2.0, 2.0)}


def test_centroid_of_square_and_triangle():
    assert np.allclose(polygon_centroid([(0, 0), (2, 0), (2, 2), (0, 2)]), [1, 1])
    assert np.allclose(polygon_centroid([(0, 0), (3, 0), (0, 3)]), [1, 1])
    assert np.allclose(polygon_centroid([(0, 0), (2, 0)]), [1, 0])  # degenerate: vertex mean


def test_square_vertices_share_one_descriptor():
    sq = [(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]
    descs = [vertex_descriptor(sq, i, (4, 4)) for i in range(4)]
    for d in descs[1:]:
        assert np.allclose(d, descs[0])
    assert descs[0][0] == pytest.approx(0.0)  # right angle
    assert len(descs[0]) == len(DESCRIPTOR_FIELDS)


def test_sharp_vertex_has_largest_angle_cosine():
    tri = convex_hull([(0, 0), (10, 1), (10, -1)])
    sharp = [vertex_descriptor(tri, i, (10, 2))[0] for i in range(3)]
    assert tri[int(np.argmax(sharp))] == (0.0, 0.0)


def test_select_tip_equals_exhaustive_scan(rng):
    for _ in range(200):
        cands = [((float(i), 0.0), rng.normal(size=7)) for i in range(int(rng.integers(1, 12)))]
        ref = rng.normal(size=7)
        point, idx, sim = select_tip(cands, ref)
        sims = [float(np.dot(d, ref) / (np.linalg.norm(d) * np.linalg.norm(ref))) for _, d in cands]
        assert idx == int(np.argmax(sims))
        assert sim == pytest.approx(max(sims), abs=1e-12)
        assert point == cands[idx][0]


def test_select_tip_ties_and_errors():
    d = np.ones(7)
    pt, idx, _ = select_tip([((0, 0), d), ((1, 1), 2 * d)], d)
    assert idx == 0
    # zero-norm candidates are skipped
    assert select_tip([((0, 0), np.zeros(7)), ((1, 1), d)], d)[1] == 1
    with pytest.raises(ValueError):
        select_tip([((0, 0), d)], np.zeros(7))
    with pytest.raises(ValueError):
        select_tip([((0, 0), np.zeros(7))], d)
    assert cosine(np.array([1.0, 0]), np.array([0, 2.0])) == 0.0


def test_isosceles_apex_is_uniquely_sharpest():
    tri = convex_hull([(0, 0), (10, 1), (10, -1)])
    sharp = [vertex_descriptor(tri, i, (10, 2))[0] for i in range(3)]
    apex = tri.index((0.0, 0.0))
    assert all(sharp[apex] > s for i, s in enumerate(sharp) if i != apex)


def test_wedge_descriptor_hand_values():
    # needle-driver template moved into its own bbox: apex at (60, 8), bbox 60 x 16
    hull = convex_hull(wedge_polygon(40.0, 8.0, 20.0) + (60.0, 8.0))
    d = vertex_descriptor(hull, hull.index((60.0, 8.0)), (60, 16))
    diag = math.sqrt(60**2 + 16**2)
    # centroid: triangle (area 320, x 100/3) and handle rectangle (area 320, x 10)
    cx = (100 / 3 + 10) / 2
    expected = [1536 / 1664, (60 - cx) / diag, 8 / diag, 8 / diag,
                math.sqrt(3664) / diag, math.sqrt(3664) / diag, 30 / (diag / 2)]
    assert np.allclose(d, expected, atol=1e-12)


def test_orthogonal_beats_opposite_candidate():
    ref = np.array([1.0, 0.0])
    assert select_tip([((0, 0), -ref), ((1, 0), np.array([0.0, 3.0]))], ref)[1] == 1


def test_selection_invariant_to_descriptor_scaling(rng):
    cands = [((i, 0), rng.normal(size=7)) for i in range(6)]
    ref = rng.normal(size=7)
    scaled = [(p, 3.7 * d) for p, d in cands]
    assert select_tip(cands, ref)[1] == select_tip(scaled, ref)[1]


def test_tip_is_translation_equivariant():
    ref = load_references()[1]
    a = instrument_silhouette(1, (40.5, 30.5), 1.1)
    b = Silhouette(a.mask, (a.origin[0] + 100, a.origin[1] - 7))
    ta, tb = localize_tip(a, ref), localize_tip(b, ref)
    assert (tb[0] - ta[0], tb[1] - ta[1]) == (100.0, -7.0)
    assert to_global((10, 5), (100, 50)) == (110.0, 55.0)


@pytest.mark.parametrize("cls", sorted(TEMPLATES))
def test_wedge_tip_within_a_pixel_over_rotations(cls):
    refs = load_references()
    # apex on a pixel centre: the mask samples pixel centres only
    apex = np.array([120.5, 95.5])
    for k in range(0, 36, 3):
        tip = localize_tip(instrument_silhouette(cls, apex, 2 * math.pi * k / 36), refs[cls])
        assert math.dist(tip, apex) <= 1.0


def test_reference_file_matches_measurement():
    refs = load_references()
    assert sorted(refs) == sorted(TEMPLATES)
    for c, v in refs.items():
        assert np.allclose(v, measure_reference(c), atol=1e-12)


def test_rasterize_rejects_non_convex():
    with pytest.raises(ValueError):
        rasterize_convex([(0, 0), (4, 0), (1, 1), (0, 4)])
    with pytest.raises(ValueError):
        Silhouette(np.zeros((3, 3)), (0, 0))


@given(st.lists(st.booleans(), min_size=1, max_size=40))
def test_rle_round_trip(bits):
    mask = np.array(bits).reshape(1, -1)
    runs = rle_encode(mask)
    assert sum(runs) == mask.size
    assert np.array_equal(rle_decode(runs, mask.shape), mask)


def test_rle_decode_checks_length():
    with pytest.raises(ValueError):
        rle_decode([1, 2], (2, 2))


def test_silhouette_file_round_trip(tmp_path):
    sil = instrument_silhouette(2, (50.5, 40.5), 0.7)
    write_silhouettes(tmp_path / "s.jsonl", [(3, 1, sil)])
    [(f, tid, back)] = read_silhouettes(tmp_path / "s.jsonl")
    assert (f, tid, back.origin) == (3, 1, sil.origin)
    assert np.array_equal(back.mask, sil.mask)
    (tmp_path / "bad.jsonl").write_text('{"frame": 0}\n')
    with pytest.raises(ValueError, match="bad.jsonl:1"):
        read_silhouettes(tmp_path / "bad.jsonl")


def test_trajectory_contract(tmp_path):
    t = TipTrajectory(frame_size=(100, 100))
    t.add(2, 1, (3.0, 4.0), 0)
    t.add(0, 1, (1.0, 2.0), 0)
    t.add(1, 2, (5.0, 5.0), 2)
    with pytest.raises(ValueError):
        t.add(2, 1, (0.0, 0.0))
    with pytest.raises(ValueError):
        t.add(5, 1, (150.0, 0.0))
    frames, xy = t.track(1)
    assert frames.tolist() == [0, 2] and xy.tolist() == [[1, 2], [3, 4]]
    assert t.track_ids() == [1, 2] and t.track_class(2) == 2
    t.to_csv(tmp_path / "tips.csv")
    back = TipTrajectory.from_csv(tmp_path / "tips.csv")
    assert np.array_equal(back.track(1)[1], xy)
    with pytest.raises(ValueError):
        t.merge(TipTrajectory.from_arrays(1, [0], [[0.0, 0.0]]))


def test_candidate_descriptors_cover_hull():
    hull = convex_hull(wedge_polygon(*TEMPLATES[0]))
    cands = candidate_descriptors(hull, (60, 16))
    assert [p for p, _ in cands] == hull
