# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import math

import numpy as np
import pytest

from drivesa.awareness.features import (
    DEFAULT_RADII,
    OBJECT_PROPERTY_COLUMNS,
    FeatureError,
    FeatureTable,
    SensoryRadii,
    align_to_frames,
    box_distances,
    derive_area_change,
    extract_all,
    family_columns,
    feature_columns,
    gaze_box_distance,
    object_property_features,
    sensory_columns,
)
from drivesa.awareness.naive import NaiveExtractor, point_in_polygon
from drivesa.awareness.scene import (
    Contrast,
    Dataset,
    GazeTrack,
    Movement,
    ObjectKind,
    ObjectProperties,
    ObjectTrack,
    SceneRecord,
)
from drivesa.awareness.synthetic import GenConfig, gen_dataset


def row(table, participant, scene, obj):
    frame = table.frame
    match = frame[
        (frame["participant"] == participant)
        & (frame["scene"] == scene)
        & (frame["object"] == obj)
    ]
    assert len(match) == 1
    return match.iloc[0]


def test_column_order():
    columns = feature_columns()
    assert len(columns) == 30
    assert len(set(columns)) == 30
    assert columns[:7] == [
        "G_pause",
        "G_min",
        "G_average",
        "OS_proximity",
        "OS_duration",
        "OP_relevance",
        "OP_light",
    ]
    assert columns[17] == "OP_change"
    assert set(columns[:18]) == {
        *family_columns("gaze_point"),
        *family_columns("object_spatial"),
        *OBJECT_PROPERTY_COLUMNS,
    }
    assert columns[18:21] == ["HV_elapse_2.5", "HV_dwell_2.5", "HV_average_2.5"]
    assert columns[-1] == "HV_average_15"
    assert family_columns("sensory") == sensory_columns(DEFAULT_RADII)


def test_radii_must_increase():
    with pytest.raises(FeatureError):
        SensoryRadii((4.1, 2.5))
    with pytest.raises(FeatureError):
        SensoryRadii((0.0, 2.5))


def test_distance_inside_and_outside():
    assert gaze_box_distance((1, 1), (0, 0, 2, 2)) == 0.0
    assert gaze_box_distance((2, 1), (0, 0, 2, 2)) == 0.0
    assert gaze_box_distance((5, 6), (0, 0, 2, 2)) == 5.0
    assert gaze_box_distance((-3, 1), (0, 0, 2, 2)) == 3.0


def test_vectorized_distances_match_scalar():
    rng = np.random.default_rng(1)
    gx, gy = rng.uniform(-20, 20, (2, 1000))
    lo = rng.uniform(-10, 10, (1000, 2))
    boxes = np.hstack([lo, lo + rng.uniform(0, 5, (1000, 2))])
    d = box_distances(gx, gy, boxes)
    for i in range(1000):
        assert d[i] == pytest.approx(
            gaze_box_distance((gx[i], gy[i]), tuple(boxes[i])), abs=1e-12
        )


def test_align_to_frames():
    frames = np.array([1.0, 1.1, 1.2, 1.3])
    times = np.array([0.99, 1.12, 1.17, 1.3])
    assert align_to_frames(times, frames, 0.1).tolist() == [0, 1, 2, 3]
    assert align_to_frames(times[:2], frames, 0.1).tolist() == [0, 1, -1, -1]
    assert align_to_frames(np.array([]), frames, 0.1).tolist() == [-1] * 4
    # nothing within half a period
    assert align_to_frames(np.array([1.05]), np.array([1.0]), 0.1).tolist() == [-1]


def test_property_one_hot_sums():
    for kind in ObjectKind:
        for contrast in Contrast:
            for movement in Movement:
                props = ObjectProperties(kind, True, False, contrast, movement, True)
                values = object_property_features(props)
                assert sum(values[4:7]) == 1.0
                assert sum(values[7:11]) == 1.0
                assert set(values) <= {0.0, 1.0}


def test_static_fixture_rows(static_table):
    assert len(static_table) == 10
    assert static_table.report() == {
        "flag_no_covisible": 0,
        "flag_gaze_pause_fallback": 0,
        "flag_box_pause_fallback": 0,
    }


def test_static_fixation_on_car(static_table):
    r = row(static_table, "P1", "S1", "car1")
    assert (r["G_pause"], r["G_min"], r["G_average"]) == (0.0, 0.0, 0.0)
    for radius in ("2.5", "4.1", "9.1", "15"):
        assert r[f"HV_dwell_{radius}"] == pytest.approx(1.0)
        assert r[f"HV_elapse_{radius}"] == 0.0
        assert r[f"HV_average_{radius}"] == 0.0
    assert r["OS_size"] == pytest.approx(4 / 3)
    assert r["OS_density"] == 3.0
    assert r["OS_duration"] == pytest.approx(1.0)
    assert r["OP_relevance"] == 1.0 and r["OP_contrast_high"] == 1.0


def test_static_late_glance_at_pedestrian(static_table):
    r = row(static_table, "P2", "S1", "ped1")
    far = math.sqrt(80)
    assert r["G_pause"] == 0.0
    assert r["G_min"] == 0.0
    assert r["G_average"] == pytest.approx(far / 2)
    assert r["HV_dwell_2.5"] == pytest.approx(0.3)
    assert r["HV_elapse_2.5"] == 0.0
    assert r["HV_average_2.5"] == 0.0
    assert r["HV_dwell_9.1"] == pytest.approx(0.6)
    assert r["HV_average_9.1"] == pytest.approx(far / 2)
    assert r["OS_proximity"] == pytest.approx(math.sqrt(22.5))
    assert r["OS_duration"] == pytest.approx(0.6)
    assert r["OS_size"] == pytest.approx(1.0)
    assert r["OP_type"] == 1.0 and r["OP_light"] == 1.0


def test_static_no_gaze_within_radius(static_table):
    """invalid samples drop out, and radii never reached fall back to the
    window length and the co-visible mean"""
    r = row(static_table, "P2", "S1", "car1")
    covisible_mean = (6 * math.sqrt(68) + 3 * 6.5) / 9
    assert r["G_pause"] == 6.5
    assert r["G_min"] == 6.5
    assert r["G_average"] == pytest.approx(covisible_mean)
    assert r["HV_elapse_2.5"] == 1.0
    assert r["HV_dwell_2.5"] == 0.0
    assert r["HV_average_2.5"] == pytest.approx(covisible_mean)
    assert r["HV_dwell_9.1"] == pytest.approx(0.9)


def test_static_derived_area_change(static_table):
    assert row(static_table, "P1", "S2", "car3")["OP_change"] == 1.0
    assert row(static_table, "P1", "S2", "ped2")["OP_change"] == 0.0


def test_non_targets_are_extracted(static_table):
    r = row(static_table, "P1", "S1", "car2")
    assert not r["is_target"]
    assert len(static_table.targets()) == 8


def test_area_change_matches_naive(static_dataset, synthetic):
    ds, _ = synthetic
    for dataset in (static_dataset, ds):
        naive = NaiveExtractor(dataset)
        for scene, obj in dataset.iter_objects():
            if scene.regions:
                assert derive_area_change(obj, scene) == naive.area_change(
                    scene.scene_id, obj.object_id
                )


def test_points_in_polygon_matches_naive():
    from drivesa.awareness.features import points_in_polygon

    rng = np.random.default_rng(5)
    for _ in range(50):
        angles = np.sort(rng.uniform(0, 2 * math.pi, 6))
        radii = rng.uniform(1, 5, 6)
        vertices = list(zip(radii * np.cos(angles), radii * np.sin(angles)))
        px, py = rng.uniform(-6, 6, (2, 40))
        vectorized = points_in_polygon(px, py, vertices)
        for i in range(40):
            assert vectorized[i] == point_in_polygon(px[i], py[i], vertices)


def test_features_match_naive(synthetic, synthetic_table):
    """every feature against a per-frame recomputation, exact for counts"""
    ds, _ = synthetic
    naive = NaiveExtractor(ds, reference_heights=None)
    participants = ds.participants[:2]
    checked = 0
    for scene, obj in ds.iter_objects():
        for participant in participants:
            expected = naive.features(participant, scene.scene_id, obj.object_id)
            actual = row(synthetic_table, participant, scene.scene_id, obj.object_id)
            for column in feature_columns():
                if column == "OS_density" or column.startswith("OP_"):
                    assert actual[column] == expected[column], column
                else:
                    assert actual[column] == pytest.approx(
                        expected[column], rel=1e-9, abs=1e-9
                    ), column
            checked += 1
    assert checked > 0


def test_features_match_naive_on_many_scenes():
    cfg = GenConfig(
        seed=11, n_scenes=100, n_participants=1, window_len=1.0, frame_rate=20.0
    )
    ds, _ = gen_dataset(cfg)
    table = extract_all(ds)
    naive = NaiveExtractor(ds, reference_heights=None)
    assert len(set(table.frame["scene"])) == 100
    for key in table.keys():
        expected = naive.features(*key)
        actual = row(table, *key)
        for column in feature_columns():
            assert actual[column] == pytest.approx(
                expected[column], rel=1e-9, abs=1e-9
            ), (key, column)


def test_static_features_match_naive(static_dataset, static_table):
    naive = NaiveExtractor(static_dataset)
    for key in static_table.keys():
        expected = naive.features(*key)
        actual = row(static_table, *key)
        for column in feature_columns():
            assert actual[column] == pytest.approx(expected[column], abs=1e-9)


def test_hv_monotone_in_radius(synthetic_table):
    """larger radii can only see more of the gaze"""
    frame = synthetic_table.frame
    radii = ["2.5", "4.1", "9.1", "15"]
    for small, large in zip(radii, radii[1:]):
        assert (frame[f"HV_dwell_{small}"] <= frame[f"HV_dwell_{large}"] + 1e-12).all()
        assert (
            frame[f"HV_elapse_{small}"] >= frame[f"HV_elapse_{large}"] - 1e-12
        ).all()


def test_feature_bounds(synthetic, synthetic_table):
    ds, _ = synthetic
    frame = synthetic_table.frame
    window = ds.scenes[0].window_len
    assert (frame["G_min"] <= frame["G_average"] + 1e-12).all()
    assert (frame["G_min"] <= frame["G_pause"] + 1e-12).all()
    for column in sensory_columns():
        if "elapse" in column or "dwell" in column:
            assert frame[column].between(0, window + 1e-9).all(), column
    assert (frame["OS_duration"] <= window).all()


def test_missing_gaze_uses_caps(static_dataset):
    ds = Dataset(
        static_dataset.scenes,
        tuple(g for g in static_dataset.gaze if g.participant_id != "P2"),
        static_dataset.labels,
    )
    table = extract_all(ds, max_distance_deg=42.0)
    r = row(table, "P2", "S1", "ped1")
    assert r["flag_no_covisible"]
    assert (r["G_pause"], r["G_min"], r["G_average"]) == (42.0, 42.0, 42.0)
    assert r["HV_elapse_2.5"] == 1.0
    assert r["HV_dwell_15"] == 0.0
    assert r["HV_average_9.1"] == 42.0
    assert table.report()["flag_no_covisible"] == 5
    # object features do not depend on the gaze
    assert r["OS_proximity"] == pytest.approx(math.sqrt(22.5))


def test_custom_radii(static_dataset):
    table = extract_all(static_dataset, radii=SensoryRadii((1.0, 20.0)))
    assert "HV_dwell_1" in table.columns and "HV_dwell_20" in table.columns
    assert len(table.columns) == 7 + 11 + 6


def test_threads_do_not_change_results(synthetic):
    ds, _ = synthetic
    one = extract_all(ds, threads=1)
    four = extract_all(ds, threads=4)
    assert one.frame.equals(four.frame)


def test_csv_round_trip(static_table, tmp_path):
    path = tmp_path / "features.csv"
    static_table.write_csv(path)
    table = FeatureTable.read_csv(path)
    assert table.radii == static_table.radii
    assert table.keys() == static_table.keys()
    np.testing.assert_array_equal(
        table.matrix(table.columns), static_table.matrix(static_table.columns)
    )
    header = path.read_text().splitlines()[0].split(",")
    assert header[:6] == [
        "participant",
        "scene",
        "object",
        "kind",
        "is_target",
        "raw_height",
    ]


def test_reference_heights_rescale(static_table):
    assert static_table.reference_heights() == {"pedestrian": 3.0, "vehicle": 3.0}
    scaled = static_table.with_reference_heights({"pedestrian": 1.5, "vehicle": 2.0})
    assert row(scaled, "P1", "S1", "car1")["OS_size"] == 2.0
    assert row(scaled, "P2", "S1", "ped1")["OS_size"] == 2.0
    with pytest.raises(FeatureError):
        static_table.with_reference_heights({"vehicle": 2.0})


def test_object_seen_once_at_window_start():
    props = ObjectProperties(
        ObjectKind.VEHICLE, False, False, Contrast.LOW, Movement.STATIC, False
    )
    # 12 ms after the window start, nearest to the first 60 Hz frame
    obj = ObjectTrack("o", True, [[0.012, -1.0, -1.0, 1.0, 1.0]], props)
    scene = SceneRecord("s", 10.0, (0.0, 0.0), 30.0, (obj,))
    gaze = GazeTrack("p", "s", [10.0], [0.0], [0.0], [True])
    table = extract_all(Dataset((scene,), (gaze,), ()))
    r = row(table, "p", "s", "o")
    assert r["flag_box_pause_fallback"]
    assert r["OS_duration"] == pytest.approx(1 / 60)
    assert r["OS_size"] == pytest.approx(1.0)
