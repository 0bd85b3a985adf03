"""Feature spaces: per-feature domains, legit/discriminative tags, instances.

An instance is a plain tuple of values in feature order. Every feature is
either ``legit`` or ``discriminative``; the split/merge helpers move between
the full tuple and its (legit, discriminative) parts.
"""

import itertools
from dataclasses import dataclass

import yaml

from .errors import CapacityError, ConformanceError, DataFormatError, UnsupportedDomainError

LEGIT = "legit"
DISCRIMINATIVE = "discriminative"

Instance = tuple


@dataclass(frozen=True)
class IntRange:
    """Integer domain, inclusive on both ends."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise DataFormatError(f"empty integer range [{self.lo}, {self.hi}]")

    def contains(self, value) -> bool:
        return isinstance(value, int) and not isinstance(value, bool) and self.lo <= value <= self.hi

    def values(self):
        return range(self.lo, self.hi + 1)

    @property
    def size(self):
        return self.hi - self.lo + 1

    enumerable = True

    def sample(self, rng):
        return rng.randint(self.lo, self.hi)

    def to_doc(self):
        return {"type": "int", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Categorical:
    """Finite value set; declaration order is the canonical order."""

    values_: tuple

    def __post_init__(self):
        if not self.values_:
            raise DataFormatError("empty categorical domain")
        if len(set(self.values_)) != len(self.values_):
            raise DataFormatError(f"duplicate categorical values: {self.values_}")

    def contains(self, value) -> bool:
        return value in self.values_

    def values(self):
        return self.values_

    @property
    def size(self):
        return len(self.values_)

    enumerable = True

    def sample(self, rng):
        return rng.choice(self.values_)

    def to_doc(self):
        return {"type": "categorical", "values": list(self.values_)}


@dataclass(frozen=True)
class RealInterval:
    """Closed real interval. Usable for classification, never for enumeration."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise DataFormatError(f"empty real interval [{self.lo}, {self.hi}]")

    def contains(self, value) -> bool:
        return isinstance(value, (int, float)) and not isinstance(value, bool) \
            and self.lo <= value <= self.hi

    def values(self):
        raise UnsupportedDomainError(f"real interval [{self.lo}, {self.hi}] is not enumerable")

    @property
    def size(self):
        raise UnsupportedDomainError(f"real interval [{self.lo}, {self.hi}] is not enumerable")

    enumerable = False

    def sample(self, rng):
        return rng.uniform(self.lo, self.hi)

    def to_doc(self):
        return {"type": "real", "lo": self.lo, "hi": self.hi}


def domain_from_doc(doc) -> IntRange | Categorical | RealInterval:
    kind = doc.get("type")
    if kind == "int":
        return IntRange(int(doc["lo"]), int(doc["hi"]))
    if kind == "categorical":
        return Categorical(tuple(doc["values"]))
    if kind == "real":
        return RealInterval(float(doc["lo"]), float(doc["hi"]))
    raise DataFormatError(f"unknown domain type {kind!r}")


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    domain: IntRange | Categorical | RealInterval
    tag: str = LEGIT

    def __post_init__(self):
        if self.tag not in (LEGIT, DISCRIMINATIVE):
            raise DataFormatError(f"feature {self.name!r}: unknown tag {self.tag!r}")


class FeatureSpace:
    """Ordered feature list; the order defines the instance layout."""

    def __init__(self, features):
        features = tuple(features)
        names = [f.name for f in features]
        if len(set(names)) != len(names):
            raise DataFormatError(f"duplicate feature names: {names}")
        if not any(f.tag == LEGIT for f in features):
            raise DataFormatError("feature space must contain at least one legit feature")
        self.features = features
        self._index = {f.name: i for i, f in enumerate(features)}
        self.legit_indices = tuple(i for i, f in enumerate(features) if f.tag == LEGIT)
        self.discriminative_indices = tuple(
            i for i, f in enumerate(features) if f.tag == DISCRIMINATIVE)

    def __len__(self):
        return len(self.features)

    def __eq__(self, other):
        return isinstance(other, FeatureSpace) and self.features == other.features

    def index(self, name: str) -> int:
        if name not in self._index:
            raise ConformanceError(f"unknown feature {name!r}")
        return self._index[name]

    def has_feature(self, name: str) -> bool:
        return name in self._index

    def is_discriminative(self, name: str) -> bool:
        return self.features[self.index(name)].tag == DISCRIMINATIVE

    def validate(self, values) -> Instance:
        """Return the canonical tuple form of ``values``, or raise ConformanceError."""
        values = tuple(values)
        if len(values) != len(self.features):
            raise ConformanceError(
                f"expected {len(self.features)} values, got {len(values)}")
        for spec, v in zip(self.features, values):
            if not spec.domain.contains(v):
                raise ConformanceError(
                    f"value {v!r} outside domain of feature {spec.name!r}")
        return values

    def instance_from_mapping(self, mapping) -> Instance:
        missing = [f.name for f in self.features if f.name not in mapping]
        if missing:
            raise ConformanceError(f"missing features: {missing}")
        extra = [k for k in mapping if k not in self._index]
        if extra:
            raise ConformanceError(f"unknown features: {extra}")
        return self.validate(tuple(mapping[f.name] for f in self.features))

    # -- enumeration -------------------------------------------------------

    @property
    def enumerable(self) -> bool:
        return all(f.domain.enumerable for f in self.features)

    def require_enumerable(self):
        for f in self.features:
            if not f.domain.enumerable:
                raise UnsupportedDomainError(
                    f"feature {f.name!r} has a non-enumerable domain")

    def count_instances(self) -> int:
        self.require_enumerable()
        n = 1
        for f in self.features:
            n *= f.domain.size
        return n

    def count_legit_assignments(self) -> int:
        self.require_enumerable()
        n = 1
        for i in self.legit_indices:
            n *= self.features[i].domain.size
        return n

    def instances(self):
        self.require_enumerable()
        return itertools.product(*(f.domain.values() for f in self.features))

    def legit_assignments(self):
        self.require_enumerable()
        return itertools.product(
            *(self.features[i].domain.values() for i in self.legit_indices))

    def discriminative_assignments(self):
        self.require_enumerable()
        return itertools.product(
            *(self.features[i].domain.values() for i in self.discriminative_indices))

    # -- split / merge -----------------------------------------------------

    def split(self, x: Instance):
        x = self.validate(x)
        legit = tuple(x[i] for i in self.legit_indices)
        discr = tuple(x[i] for i in self.discriminative_indices)
        return legit, discr

    def legit_part(self, x: Instance):
        return tuple(x[i] for i in self.legit_indices)

    def merge(self, legit, discr) -> Instance:
        if len(legit) != len(self.legit_indices) or len(discr) != len(self.discriminative_indices):
            raise ConformanceError("part arity does not match the space")
        out = [None] * len(self.features)
        for i, v in zip(self.legit_indices, legit):
            out[i] = v
        for i, v in zip(self.discriminative_indices, discr):
            out[i] = v
        return self.validate(out)

    # -- config document ---------------------------------------------------

    def to_doc(self):
        return {
            "features": [
                {"name": f.name, "domain": f.domain.to_doc(), "tag": f.tag}
                for f in self.features
            ]
        }

    @classmethod
    def from_doc(cls, doc):
        try:
            rows = doc["features"]
        except (TypeError, KeyError):
            raise DataFormatError("feature space document needs a 'features' list")
        features = []
        for row in rows:
            features.append(FeatureSpec(
                name=str(row["name"]),
                domain=domain_from_doc(row["domain"]),
                tag=row.get("tag", LEGIT),
            ))
        return cls(features)

    def save(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_doc(), fh, sort_keys=False)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_doc(yaml.safe_load(fh))


def split_instance(x, space: FeatureSpace):
    """Decompose a conformant instance into (legit part, discriminative part)."""
    return space.split(x)


def merge_parts(legit, discr, space: FeatureSpace) -> Instance:
    """Inverse of split_instance: rebuild the instance in feature order."""
    return space.merge(legit, discr)
