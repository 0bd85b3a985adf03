"""Random spaces, trees and instances for the property suites.

Everything takes an explicit random.Random so failures replay from a seed.
Spaces stay tiny on purpose: the oracles enumerate them exhaustively.
"""

import random

from explaudit.predicates import make_in, make_le
from explaudit.space import (DISCRIMINATIVE, LEGIT, Categorical, FeatureSpace,
                             FeatureSpec, IntRange)
from explaudit.tree import DecisionTree, Leaf, Node


def random_space(rng: random.Random) -> FeatureSpace:
    n_legit = rng.randint(1, 3)
    n_discr = rng.randint(1, 2)
    tags = [LEGIT] * n_legit + [DISCRIMINATIVE] * n_discr
    rng.shuffle(tags)
    specs = []
    for i, tag in enumerate(tags):
        if rng.random() < 0.5:
            k = rng.randint(2, 4)
            domain = Categorical(tuple(f"v{j}" for j in range(k)))
        else:
            lo = rng.randint(-3, 3)
            domain = IntRange(lo, lo + rng.randint(1, 5))
        specs.append(FeatureSpec(name=f"f{i}", domain=domain, tag=tag))
    return FeatureSpace(specs)


def random_predicate(space: FeatureSpace, rng: random.Random):
    spec = space.features[rng.randrange(len(space))]
    if isinstance(spec.domain, Categorical):
        values = list(spec.domain.values())
        subset = rng.sample(values, rng.randint(1, len(values) - 1))
        return make_in(space, spec.name, subset)
    # half-open threshold keeps both branches reachable
    return make_le(space, spec.name, rng.randint(spec.domain.lo, spec.domain.hi - 1) + 0.5)


def random_tree(space: FeatureSpace, rng: random.Random, max_depth: int = 4) -> DecisionTree:
    def grow(depth):
        if depth >= max_depth or rng.random() < 0.3:
            return Leaf(rng.randint(0, 1))
        return Node(random_predicate(space, rng), grow(depth + 1), grow(depth + 1))

    root = Node(random_predicate(space, rng), grow(1), grow(1))
    return DecisionTree(space, root)


def random_instance(space: FeatureSpace, rng: random.Random):
    return tuple(f.domain.sample(rng) for f in space.features)
