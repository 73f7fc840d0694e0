# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import numpy as np
import pytest

from drivesa.awareness.scene import (
    Dataset,
    DatasetError,
    GazeTrack,
    ObjectProperties,
    ObjectTrack,
    RegionPolygon,
    SceneRecord,
    TimestampError,
    deg_to_px,
    frame_times,
    px_to_deg,
    window_of,
)

PROPS = ObjectProperties.from_dict(
    {
        "kind": "vehicle",
        "relevance": False,
        "light_green": False,
        "contrast": "low",
        "movement": "static",
        "area_change": False,
    }
)


def make_scene(**kwargs):
    obj = ObjectTrack("car", True, [[10.0, 0, 0, 1, 1]], PROPS)
    params = dict(
        scene_id="s",
        pause_time=10.0,
        vanishing_point=(0.0, 0.0),
        pixels_per_degree=30.0,
        objects=(obj,),
    )
    params.update(kwargs)
    return SceneRecord(**params)


def test_px_deg_inverse():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        p = tuple(rng.uniform(-2000, 2000, 2))
        calib = rng.uniform(5, 80)
        x, y = deg_to_px(px_to_deg(p, calib), calib)
        assert x == pytest.approx(p[0], rel=1e-12, abs=1e-9)
        assert y == pytest.approx(p[1], rel=1e-12, abs=1e-9)


@pytest.mark.parametrize("calib", [0.0, -1.0])
def test_calibration_must_be_positive(calib):
    with pytest.raises(DatasetError):
        px_to_deg((1, 1), calib)
    with pytest.raises(DatasetError):
        deg_to_px((1, 1), calib)


def test_window_and_frames():
    scene = make_scene(window_len=1.0, frame_rate=10.0)
    assert window_of(scene) == (9.0, 10.0)
    frames = frame_times(scene)
    assert len(frames) == 10
    assert frames[-1] == 10.0
    assert frames[0] > 9.0
    np.testing.assert_allclose(np.diff(frames), 0.1)


def test_default_window_has_600_frames():
    assert len(frame_times(make_scene())) == 600


def test_object_needs_a_box_in_window():
    late = ObjectTrack("late", False, [[12.0, 0, 0, 1, 1]], PROPS)
    with pytest.raises(DatasetError, match="analysis window"):
        make_scene(objects=(late,))


def test_box_on_window_start_is_outside():
    edge = ObjectTrack("edge", False, [[0.0, 0, 0, 1, 1]], PROPS)
    with pytest.raises(DatasetError):
        make_scene(objects=(edge,))


def test_duplicate_object_ids():
    obj = ObjectTrack("car", True, [[10.0, 0, 0, 1, 1]], PROPS)
    with pytest.raises(DatasetError, match="duplicate"):
        make_scene(objects=(obj, obj))


def test_box_min_max_order():
    with pytest.raises(DatasetError, match="min > max"):
        ObjectTrack("car", True, [[10.0, 2, 0, 1, 1]], PROPS)


def test_box_times_increasing():
    with pytest.raises(TimestampError):
        ObjectTrack("car", True, [[10.0, 0, 0, 1, 1], [10.0, 0, 0, 1, 1]], PROPS)


def test_gaze_timestamps_increasing():
    with pytest.raises(TimestampError):
        GazeTrack("p", "s", [1.0, 0.5], [0, 0], [0, 0], [True, True])


def test_gaze_column_lengths():
    with pytest.raises(DatasetError):
        GazeTrack("p", "s", [1.0, 2.0], [0], [0, 0], [True, True])


def test_region_needs_three_vertices():
    with pytest.raises(DatasetError):
        RegionPolygon("r", ((0.0, 0.0), (1.0, 1.0)))


def test_properties_reject_unknown_values():
    d = PROPS.to_dict()
    d["contrast"] = "blinding"
    with pytest.raises(DatasetError, match="contrast"):
        ObjectProperties.from_dict(d)
    d = PROPS.to_dict()
    del d["movement"]
    with pytest.raises(DatasetError, match="movement"):
        ObjectProperties.from_dict(d)


def test_dataset_lookup():
    scene = make_scene()
    gaze = GazeTrack("p1", "s", [10.0], [0.0], [0.0], [True])
    ds = Dataset((scene,), (gaze,), ())
    assert ds.scene("s") is scene
    assert ds.gaze_for("p1", "s") is gaze
    assert len(ds.gaze_for("p2", "s")) == 0
    assert scene.object("car").is_target
    with pytest.raises(DatasetError):
        scene.object("bus")
    with pytest.raises(DatasetError):
        ds.scene("other")


def test_error_location_rendering():
    e = DatasetError("bad value", path="labels.csv", line=3, field="aware")
    assert str(e) == "labels.csv:3: aware: bad value"


def test_object_box_must_align_to_a_frame():
    # inside the window, but farther than half a period from the first frame
    stray = ObjectTrack("stray", False, [[0.005, 0, 0, 1, 1]], PROPS)
    with pytest.raises(DatasetError, match="aligned to a frame"):
        make_scene(objects=(stray,))
    near = ObjectTrack("near", False, [[0.012, 0, 0, 1, 1]], PROPS)
    scene = make_scene(objects=(near,))
    assert scene.has_object("near")
