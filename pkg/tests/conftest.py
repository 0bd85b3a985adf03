import pathlib

import pytest

from explaudit.space import FeatureSpace
from explaudit.tree import load_tree, load_training_csv

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> pathlib.Path:
    return FIXTURES / name


@pytest.fixture(scope="session")
def door_space():
    return FeatureSpace.load(fixture_path("door_space.yaml"))


@pytest.fixture(scope="session")
def door_tree():
    return load_tree(fixture_path("door_tree.yaml"))


@pytest.fixture(scope="session")
def door_training(door_space):
    return load_training_csv(fixture_path("door_train.csv"), door_space)
