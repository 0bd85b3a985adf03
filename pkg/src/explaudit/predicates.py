"""Single-feature node predicates shared by trees and explanations."""

from dataclasses import dataclass

from .errors import DataFormatError, MalformedExplanationError
from .space import Categorical, FeatureSpace, IntRange, RealInterval

OP_LE = "le"    # numeric: value <= threshold
OP_IN = "in"    # categorical: value in subset
OP_EQ = "eq"    # equality on any domain (Dirac-style explanations)

WIRE_OPS = {OP_LE: "<=", OP_IN: "in", OP_EQ: "=="}
OPS_FROM_WIRE = {v: k for k, v in WIRE_OPS.items()}


@dataclass(frozen=True)
class NodePredicate:
    feature: str
    op: str
    value: object
    index: int  # column resolved against the governing space

    def evaluate(self, x) -> bool:
        v = x[self.index]
        if self.op == OP_LE:
            return v <= self.value
        if self.op == OP_IN:
            return v in self.value
        return v == self.value

    def describe(self) -> str:
        if self.op == OP_LE:
            return f"{self.feature} <= {self.value}"
        if self.op == OP_IN:
            return f"{self.feature} in {{{', '.join(map(str, self.value))}}}"
        return f"{self.feature} == {self.value}"


def make_le(space: FeatureSpace, feature: str, threshold) -> NodePredicate:
    idx = space.index(feature)
    domain = space.features[idx].domain
    if isinstance(domain, Categorical):
        raise DataFormatError(f"feature {feature!r} is categorical, needs a subset test")
    if not (domain.lo <= threshold <= domain.hi):
        raise DataFormatError(
            f"threshold {threshold} outside [{domain.lo}, {domain.hi}] of {feature!r}")
    return NodePredicate(feature=feature, op=OP_LE, value=threshold, index=idx)


def make_in(space: FeatureSpace, feature: str, subset) -> NodePredicate:
    idx = space.index(feature)
    domain = space.features[idx].domain
    if not isinstance(domain, Categorical):
        raise DataFormatError(f"feature {feature!r} is not categorical")
    subset = frozenset(subset)
    if not subset or not subset <= set(domain.values_):
        raise DataFormatError(f"subset {set(subset)} invalid for feature {feature!r}")
    return NodePredicate(feature=feature, op=OP_IN, value=subset, index=idx)


def make_eq(space: FeatureSpace, feature: str, value) -> NodePredicate:
    idx = space.index(feature)
    if not space.features[idx].domain.contains(value):
        raise DataFormatError(f"value {value!r} outside domain of feature {feature!r}")
    return NodePredicate(feature=feature, op=OP_EQ, value=value, index=idx)


@dataclass(frozen=True)
class OrientedPredicate:
    """A node predicate together with the branch outcome actually taken."""

    predicate: NodePredicate
    branch: bool

    def holds(self, x) -> bool:
        return self.predicate.evaluate(x) == self.branch

    def describe(self) -> str:
        text = self.predicate.describe()
        return text if self.branch else f"not({text})"


def _subset_sorted(domain: Categorical, subset):
    order = {v: i for i, v in enumerate(domain.values_)}
    return sorted(subset, key=order.__getitem__)


def predicate_to_doc(pred: NodePredicate, space: FeatureSpace):
    doc = {"feature": pred.feature, "op": WIRE_OPS[pred.op]}
    if pred.op == OP_IN:
        domain = space.features[pred.index].domain
        doc["value"] = _subset_sorted(domain, pred.value)
    else:
        doc["value"] = pred.value
    return doc


def predicate_from_doc(doc, space: FeatureSpace) -> NodePredicate:
    try:
        feature = doc["feature"]
        op = OPS_FROM_WIRE[doc["op"]]
        value = doc["value"]
    except (TypeError, KeyError):
        raise MalformedExplanationError(f"bad predicate document: {doc!r}")
    if not space.has_feature(feature):
        raise MalformedExplanationError(f"predicate references unknown feature {feature!r}")
    if op == OP_LE:
        return make_le(space, feature, value)
    if op == OP_IN:
        return make_in(space, feature, value)
    return make_eq(space, feature, value)
