"""Legitimacy oracles: exhaustive checks, tabulated classifiers, Dirac surrogates.

A classifier here is anything with a deterministic ``predict(instance) -> 0|1``.
The oracles in this module quantify over whole (small) spaces, so they insist
on finitely enumerable domains and refuse to run past a hard size guard.
"""

import itertools
from dataclasses import dataclass

from .errors import CapacityError
from .space import FeatureSpace, Instance

# Tabulation guards: oracles exist to verify desk-scale statements, not to
# scale. 20 legit assignments means 2^20 enumerable classifiers.
MAX_LEGIT_ASSIGNMENTS = 20
MAX_INSTANCES = 1 << 20


@dataclass(frozen=True)
class TabulatedLegitClassifier:
    """Explicit truth table over the ordered legit assignments of a space."""

    space: FeatureSpace
    table: tuple

    def __post_init__(self):
        index = {xl: i for i, xl in enumerate(self.space.legit_assignments())}
        if len(self.table) != len(index):
            raise CapacityError(
                f"table of {len(self.table)} entries for {len(index)} legit assignments")
        object.__setattr__(self, "_index", index)

    def label_for_legit(self, legit_part) -> int:
        return self.table[self._index[tuple(legit_part)]]

    def predict(self, x: Instance) -> int:
        return self.label_for_legit(self.space.legit_part(self.space.validate(x)))


@dataclass(frozen=True)
class TabulatedClassifier:
    """Explicit truth table over all instances of a space (legit or not)."""

    space: FeatureSpace
    table: tuple

    def __post_init__(self):
        index = {x: i for i, x in enumerate(self.space.instances())}
        if len(self.table) != len(index):
            raise CapacityError(
                f"table of {len(self.table)} entries for {len(index)} instances")
        object.__setattr__(self, "_index", index)

    def predict(self, x: Instance) -> int:
        return self.table[self._index[self.space.validate(x)]]


@dataclass(frozen=True)
class DiracSurrogate:
    """Legitimate classifier that agrees with decision ``label`` exactly at
    one legit point and answers the opposite everywhere else."""

    space: FeatureSpace
    legit_point: tuple
    label: int

    def predict(self, x: Instance) -> int:
        xl = self.space.legit_part(self.space.validate(x))
        return self.label if xl == self.legit_point else 1 - self.label


def dirac_surrogate(x: Instance, y: int, space: FeatureSpace) -> DiracSurrogate:
    """Degenerate coherent-and-legitimate surrogate for the query (x, y)."""
    legit, _ = space.split(x)
    return DiracSurrogate(space=space, legit_point=legit, label=int(y))


def is_legitimate(classifier, space: FeatureSpace) -> bool:
    """Exhaustively decide whether the decision ignores every discriminative
    feature: within each legit assignment, all discriminative variations must
    receive the same label."""
    if space.count_instances() > MAX_INSTANCES:
        raise CapacityError(f"more than {MAX_INSTANCES} instances to enumerate")
    discr_assignments = list(space.discriminative_assignments())
    for xl in space.legit_assignments():
        first = None
        for xd in discr_assignments:
            label = classifier.predict(space.merge(xl, xd))
            if first is None:
                first = label
            elif label != first:
                return False
    return True


def _guard_legit_tabulation(space: FeatureSpace) -> int:
    n = space.count_legit_assignments()
    if n > MAX_LEGIT_ASSIGNMENTS:
        raise CapacityError(
            f"{n} legit assignments exceed the tabulation guard of {MAX_LEGIT_ASSIGNMENTS}")
    return n


def enumerate_legit_classifiers(space: FeatureSpace):
    """Yield all 2^n functions from legit assignments to {0,1} as truth tables."""
    n = _guard_legit_tabulation(space)
    for table in itertools.product((0, 1), repeat=n):
        yield TabulatedLegitClassifier(space=space, table=table)


def enumerate_classifiers(space: FeatureSpace):
    """Yield all 2^|X| functions over the full instance space."""
    n = space.count_instances()
    if n > MAX_LEGIT_ASSIGNMENTS:
        raise CapacityError(
            f"{n} instances exceed the tabulation guard of {MAX_LEGIT_ASSIGNMENTS}")
    for table in itertools.product((0, 1), repeat=n):
        yield TabulatedClassifier(space=space, table=table)


def count_pr_functions(space: FeatureSpace, x: Instance, y: int):
    """Count enumerated legit classifiers that are coherent with decision y at x.

    Returns (coherent_count, total_count); the counting is done by brute
    force, so the halving identity is observed rather than assumed.
    """
    legit, _ = space.split(x)
    coherent = 0
    total = 0
    for clf in enumerate_legit_classifiers(space):
        total += 1
        if clf.label_for_legit(legit) == y:
            coherent += 1
    return coherent, total
