# Copyright (C) 2026  The drivesa developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

from pathlib import Path

import pytest

from drivesa.awareness.config import check_config
from drivesa.awareness.dataset import load_dataset, write_dataset
from drivesa.awareness.features import extract_all
from drivesa.awareness.synthetic import GenConfig, gen_dataset

AWARENESS_TESTS_ROOT = Path(__file__).parents[0]
DATA_DIR = AWARENESS_TESTS_ROOT / "dataset"

# small enough for the whole suite to run in a few minutes
SMALL_GEN = GenConfig(
    seed=3,
    n_scenes=4,
    n_participants=6,
    window_len=3.0,
    lead_time=0.5,
    frame_rate=30.0,
)

# training settings that keep the SVM solver cheap
FAST_CONF = {
    "svm_max_iter": 1500,
    "memory_sweep": [],
    "threads": 1,
}


@pytest.fixture(scope="session")
def static_dataset():
    return load_dataset(DATA_DIR)


@pytest.fixture(scope="session")
def static_table(static_dataset):
    return extract_all(static_dataset)


@pytest.fixture(scope="session")
def synthetic():
    """(dataset, oracle trace) of a small synthetic benchmark"""
    return gen_dataset(SMALL_GEN)


@pytest.fixture(scope="session")
def synthetic_table(synthetic):
    ds, _ = synthetic
    return extract_all(ds)


@pytest.fixture(scope="session")
def synthetic_dir(synthetic, tmp_path_factory):
    ds, trace = synthetic
    root = tmp_path_factory.mktemp("synthetic")
    write_dataset(ds, root)
    return root


@pytest.fixture
def fast_conf():
    return check_config(FAST_CONF)
