"""Explanations and the three checks a remote user can actually run.

A user who queries a classify-and-explain service gets back a decision and a
conjunction of oriented predicates. Remotely she can verify exactly three
things: the explanation talks about her input (apropos), it explains the
decision she actually received (consequent), and it never mentions a feature
she considers discriminative. Nothing stronger is checkable from one reply.
"""

from dataclasses import dataclass

from .errors import MalformedExplanationError
from .predicates import OrientedPredicate, predicate_from_doc, predicate_to_doc
from .space import FeatureSpace, Instance

HONEST = "honest"
SURROGATE = "surrogate"


@dataclass(frozen=True)
class Explanation:
    """Conjunction of oriented predicates plus the label they lead to.

    ``provenance`` is server-side bookkeeping for test oracles; it is stripped
    before transmission and never trusted on the user side.
    """

    predicates: tuple
    label: int
    provenance: str = HONEST

    def describe(self) -> str:
        if not self.predicates:
            return f"(always) => {self.label}"
        body = " AND ".join(p.describe() for p in self.predicates)
        return f"{body} => {self.label}"


def _check_known(a: Explanation, space: FeatureSpace):
    for oriented in a.predicates:
        name = oriented.predicate.feature
        if not space.has_feature(name):
            raise MalformedExplanationError(
                f"explanation references unknown feature {name!r}")


def is_apropos(a: Explanation, x: Instance, space: FeatureSpace) -> bool:
    """Every oriented predicate holds on the queried instance."""
    _check_known(a, space)
    x = space.validate(x)
    return all(p.holds(x) for p in a.predicates)


def is_consequent(a: Explanation, y: int) -> bool:
    """The explanation explains the decision actually returned."""
    return a.label == y


def mentions_discriminative(a: Explanation, space: FeatureSpace) -> bool:
    """Syntactic check: does any predicate touch a discriminative feature?"""
    _check_known(a, space)
    return any(space.is_discriminative(p.predicate.feature) for p in a.predicates)


def passes_user_checks(a: Explanation, x: Instance, y: int, space: FeatureSpace) -> bool:
    """The full battery available to a remote user on a single reply."""
    return (is_apropos(a, x, space)
            and is_consequent(a, y)
            and not mentions_discriminative(a, space))


def explanation_to_doc(a: Explanation, space: FeatureSpace):
    """Wire form: provenance is intentionally dropped."""
    return {
        "predicates": [
            {**predicate_to_doc(p.predicate, space), "branch": bool(p.branch)}
            for p in a.predicates
        ],
        "label": int(a.label),
    }


def explanation_from_doc(doc, space: FeatureSpace) -> Explanation:
    try:
        rows = doc["predicates"]
        label = int(doc["label"])
    except (TypeError, KeyError):
        raise MalformedExplanationError(f"bad explanation document: {doc!r}")
    preds = []
    for row in rows:
        if "branch" not in row:
            raise MalformedExplanationError(f"predicate missing branch: {row!r}")
        preds.append(OrientedPredicate(
            predicate=predicate_from_doc(row, space),
            branch=bool(row["branch"]),
        ))
    return Explanation(predicates=tuple(preds), label=label)
