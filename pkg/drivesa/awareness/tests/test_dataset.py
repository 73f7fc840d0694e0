# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

import json
import shutil

import numpy as np
import pytest

from drivesa.awareness.dataset import load_dataset, write_dataset
from drivesa.awareness.scene import (
    DatasetError,
    LabelCountError,
    ReferentialIntegrityError,
    TimestampError,
)

from .conftest import DATA_DIR


@pytest.fixture
def dataset_copy(tmp_path):
    root = tmp_path / "dataset"
    shutil.copytree(DATA_DIR, root)
    return root


def test_load_static(static_dataset):
    ds = static_dataset
    assert ds.scene_ids == ["S1", "S2"]
    assert ds.participants == ["P1", "P2"]
    assert len(ds.labels) == 8
    assert len(ds.gaze) == 4
    assert [o.object_id for o in ds.scene("S1").targets] == ["car1", "ped1"]


def test_pixel_units_are_converted(static_dataset):
    s1 = static_dataset.scene("S1")
    assert s1.vanishing_point == (0.0, 2.0)
    np.testing.assert_array_equal(s1.object("car1").boxes[0, 1:], [-6, -2, -2, 2])
    gaze = static_dataset.gaze_for("P2", "S1")
    assert gaze.x[-1] == 4.5 and gaze.y[-1] == 0.5
    assert not gaze.valid[3]


def test_area_change_derived_from_regions(static_dataset):
    s2 = static_dataset.scene("S2")
    assert s2.object("car3").properties.area_change
    assert not s2.object("ped2").properties.area_change


def test_labels_accept_both_flag_spellings(static_dataset):
    index = static_dataset.label_index()
    assert index[("P1", "S1", "car1")] is True
    assert index[("P1", "S2", "car3")] is True
    assert index[("P1", "S2", "ped2")] is False


def test_write_then_load(static_dataset, tmp_path):
    write_dataset(static_dataset, tmp_path)
    ds = load_dataset(tmp_path)
    assert ds.scene_ids == static_dataset.scene_ids
    assert ds.label_index() == static_dataset.label_index()
    for scene in static_dataset.scenes:
        other = ds.scene(scene.scene_id)
        assert other.vanishing_point == scene.vanishing_point
        for obj in scene.objects:
            np.testing.assert_array_equal(
                other.object(obj.object_id).boxes, obj.boxes
            )
            assert other.object(obj.object_id).properties == obj.properties
    for g in static_dataset.gaze:
        np.testing.assert_array_equal(ds.gaze_for(g.participant_id, g.scene_id).x, g.x)


def test_write_is_deterministic(synthetic, tmp_path):
    ds, _ = synthetic
    write_dataset(ds, tmp_path / "a")
    write_dataset(ds, tmp_path / "b")
    for path in sorted((tmp_path / "a").rglob("*")):
        if path.is_file():
            twin = tmp_path / "b" / path.relative_to(tmp_path / "a")
            assert path.read_bytes() == twin.read_bytes()


def test_corrupt_manifest_names_the_field(dataset_copy):
    manifest = json.loads((dataset_copy / "manifest.json").read_text())
    manifest["scenes"][0]["pixels_per_degree"] = "thirty"
    (dataset_copy / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(DatasetError) as excinfo:
        load_dataset(dataset_copy)
    assert excinfo.value.field == "pixels_per_degree"


def test_invalid_json(dataset_copy):
    (dataset_copy / "manifest.json").write_text("{")
    with pytest.raises(DatasetError, match="invalid JSON"):
        load_dataset(dataset_copy)


def test_missing_labels(dataset_copy):
    (dataset_copy / "labels.csv").unlink()
    with pytest.raises(DatasetError, match="missing file"):
        load_dataset(dataset_copy)


def _append_label(root, line):
    with open(root / "labels.csv", "a") as f:
        f.write(line + "\n")


@pytest.mark.parametrize(
    "line,match",
    [
        ("P1,S3,car1,1", "unknown scene"),
        ("P1,S1,bus,1", "unknown object"),
        ("P1,S1,car2,1", "not a target"),
    ],
)
def test_label_referential_integrity(dataset_copy, line, match):
    _append_label(dataset_copy, line)
    with pytest.raises(ReferentialIntegrityError, match=match) as excinfo:
        load_dataset(dataset_copy)
    assert excinfo.value.line == 10


def test_duplicate_label(dataset_copy):
    _append_label(dataset_copy, "P1,S1,car1,0")
    with pytest.raises(DatasetError, match="duplicate"):
        load_dataset(dataset_copy)


def test_bad_label_flag(dataset_copy):
    _append_label(dataset_copy, "P3,S1,car1,maybe")
    with pytest.raises(DatasetError, match="0/1"):
        load_dataset(dataset_copy)


def test_gaze_timestamps_not_increasing(dataset_copy):
    path = dataset_copy / "gaze" / "P1" / "S1.csv"
    lines = path.read_text().splitlines()
    lines[3], lines[4] = lines[4], lines[3]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TimestampError) as excinfo:
        load_dataset(dataset_copy)
    assert excinfo.value.field == "t"


def test_gaze_rate_mismatch(dataset_copy):
    path = dataset_copy / "gaze" / "P1" / "S1.csv"
    rows = ["t,x,y,valid"] + [f"{1 + 0.2 * i:.1f},0,0,1" for i in range(6)]
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(TimestampError, match="frame rate"):
        load_dataset(dataset_copy)


def test_gaze_for_unknown_scene(dataset_copy):
    shutil.copy(
        dataset_copy / "gaze" / "P1" / "S1.csv", dataset_copy / "gaze" / "P1" / "S9.csv"
    )
    with pytest.raises(ReferentialIntegrityError):
        load_dataset(dataset_copy)


def test_missing_gaze_track_is_empty(dataset_copy, caplog):
    (dataset_copy / "gaze" / "P2" / "S2.csv").unlink()
    ds = load_dataset(dataset_copy)
    assert len(ds.gaze_for("P2", "S2")) == 0
    assert "No gaze track for participant P2 in scene S2" in caplog.text


def test_missing_area_change_without_regions(dataset_copy):
    path = dataset_copy / "objects.jsonl"
    records = [json.loads(line) for line in path.read_text().splitlines()]
    del records[0]["properties"]["area_change"]
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    with pytest.raises(DatasetError) as excinfo:
        load_dataset(dataset_copy)
    assert excinfo.value.field == "area_change"
    assert excinfo.value.line == 1


def test_gaze_without_valid_sample_in_window(dataset_copy):
    path = dataset_copy / "gaze" / "P1" / "S1.csv"
    rows = ["t,x,y,valid"] + [f"{1.1 + 0.1 * i:.1f},0,0,0" for i in range(10)]
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(TimestampError, match="no valid sample") as excinfo:
        load_dataset(dataset_copy)
    assert excinfo.value.path == path


def test_every_target_needs_a_label(dataset_copy):
    path = dataset_copy / "labels.csv"
    lines = path.read_text().splitlines()
    path.write_text("\n".join(line for line in lines if "P2,S2,car3" not in line))
    with pytest.raises(LabelCountError, match="P2/S2/car3"):
        load_dataset(dataset_copy)
