import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from explaudit.errors import ConformanceError, DataFormatError, UnsupportedDomainError
from explaudit.space import (DISCRIMINATIVE, LEGIT, Categorical, FeatureSpace,
                             FeatureSpec, IntRange, RealInterval, merge_parts,
                             split_instance)

from randgen import random_instance, random_space


def test_split_orders_parts_by_feature_position(door_space):
    legit, discr = split_instance(("yes", "pink", 49), door_space)
    assert legit == ("yes", "pink")
    assert discr == (49,)


def test_merge_is_split_inverse(door_space):
    x = ("no", "other", 75)
    legit, discr = split_instance(x, door_space)
    assert merge_parts(legit, discr, door_space) == x


def test_split_merge_inverse_on_random_spaces():
    rng = random.Random(11)
    for _ in range(200):
        space = random_space(rng)
        x = random_instance(space, rng)
        legit, discr = space.split(x)
        assert space.merge(legit, discr) == x
        assert space.legit_part(x) == legit


def test_counts(door_space):
    assert door_space.count_instances() == 2 * 2 * 82
    assert door_space.count_legit_assignments() == 4
    assert len(list(door_space.legit_assignments())) == 4
    assert len(list(door_space.discriminative_assignments())) == 82


def test_instances_enumeration_is_complete_and_unique():
    space = FeatureSpace([
        FeatureSpec("a", Categorical(("u", "v")), LEGIT),
        FeatureSpec("b", IntRange(0, 2), DISCRIMINATIVE),
    ])
    got = list(space.instances())
    assert len(got) == len(set(got)) == space.count_instances() == 6
    assert got[0] == ("u", 0)


def test_validate_rejects_wrong_arity(door_space):
    with pytest.raises(ConformanceError):
        door_space.validate(("yes", "pink"))


def test_validate_rejects_out_of_domain(door_space):
    with pytest.raises(ConformanceError):
        door_space.validate(("maybe", "pink", 49))
    with pytest.raises(ConformanceError):
        door_space.validate(("yes", "pink", 200))


def test_int_range_rejects_bool_and_float():
    domain = IntRange(0, 1)
    assert domain.contains(1)
    assert not domain.contains(True)
    assert not domain.contains(0.5)


def test_real_interval_not_enumerable():
    space = FeatureSpace([
        FeatureSpec("score", RealInterval(0.0, 1.0), LEGIT),
        FeatureSpec("g", IntRange(0, 1), DISCRIMINATIVE),
    ])
    assert not space.enumerable
    with pytest.raises(UnsupportedDomainError):
        space.require_enumerable()
    with pytest.raises(UnsupportedDomainError):
        space.count_instances()
    # classification over the interval still works
    assert space.validate((0.25, 1)) == (0.25, 1)


def test_instance_from_mapping(door_space):
    x = door_space.instance_from_mapping({"age": 49, "disguised": "yes", "socks": "pink"})
    assert x == ("yes", "pink", 49)
    with pytest.raises(ConformanceError):
        door_space.instance_from_mapping({"disguised": "yes", "socks": "pink"})
    with pytest.raises(ConformanceError):
        door_space.instance_from_mapping(
            {"disguised": "yes", "socks": "pink", "age": 49, "hat": "tall"})


def test_is_discriminative_by_name(door_space):
    assert door_space.is_discriminative("age")
    assert not door_space.is_discriminative("socks")
    with pytest.raises(ConformanceError):
        door_space.is_discriminative("hat")


def test_space_needs_a_legit_feature():
    with pytest.raises(DataFormatError):
        FeatureSpace([FeatureSpec("g", IntRange(0, 1), DISCRIMINATIVE)])


def test_duplicate_names_rejected():
    with pytest.raises(DataFormatError):
        FeatureSpace([
            FeatureSpec("a", IntRange(0, 1), LEGIT),
            FeatureSpec("a", IntRange(0, 1), LEGIT),
        ])


def test_empty_domains_rejected():
    with pytest.raises(DataFormatError):
        IntRange(3, 2)
    with pytest.raises(DataFormatError):
        Categorical(())
    with pytest.raises(DataFormatError):
        Categorical(("x", "x"))


def test_doc_round_trip(door_space):
    assert FeatureSpace.from_doc(door_space.to_doc()) == door_space


def test_save_load_round_trip(tmp_path, door_space):
    path = tmp_path / "space.yaml"
    door_space.save(path)
    assert FeatureSpace.load(path) == door_space


@settings(max_examples=60)
@given(seed=st.integers(0, 2**32 - 1))
def test_doc_round_trip_random(seed):
    space = random_space(random.Random(seed))
    assert FeatureSpace.from_doc(space.to_doc()) == space
