"""Binary decision trees: gini training, path explanations, and the
surrogate-by-splicing attack that removes every discriminative node.

Convention: the ``left`` child is taken when the node predicate holds.
"""

from dataclasses import dataclass

import yaml

from .errors import DataFormatError
from .explain import Explanation, HONEST, SURROGATE
from .predicates import NodePredicate, OrientedPredicate, make_in, make_le, predicate_from_doc, predicate_to_doc
from .space import Categorical, FeatureSpace, Instance


@dataclass(frozen=True)
class Leaf:
    label: int

    is_leaf = True


@dataclass(frozen=True)
class Node:
    predicate: NodePredicate
    left: "Node | Leaf"   # predicate holds
    right: "Node | Leaf"  # predicate fails

    is_leaf = False


@dataclass(frozen=True)
class TrainConfig:
    max_depth: int = 8
    min_samples_split: int = 2
    impurity: str = "gini"
    feature_whitelist: frozenset | None = None

    def __post_init__(self):
        if self.max_depth < 1:
            raise DataFormatError("max_depth must be >= 1")
        if self.min_samples_split < 1:
            raise DataFormatError("min_samples_split must be >= 1")
        if self.impurity != "gini":
            raise DataFormatError(f"unsupported impurity {self.impurity!r}")


class DecisionTree:
    """Immutable proper binary tree over a feature space."""

    def __init__(self, space: FeatureSpace, root):
        self.space = space
        self.root = root

    def predict(self, x: Instance) -> int:
        x = self.space.validate(x)
        node = self.root
        while not node.is_leaf:
            node = node.left if node.predicate.evaluate(x) else node.right
        return node.label

    def node_count(self) -> int:
        def count(node):
            if node.is_leaf:
                return 1
            return 1 + count(node.left) + count(node.right)
        return count(self.root)

    def depth(self) -> int:
        def d(node):
            if node.is_leaf:
                return 0
            return 1 + max(d(node.left), d(node.right))
        return d(self.root)

    def __eq__(self, other):
        return (isinstance(other, DecisionTree)
                and self.space == other.space
                and self.root == other.root)

    def render(self, indent: str = "") -> str:
        lines = []

        def walk(node, prefix, tag):
            if node.is_leaf:
                lines.append(f"{prefix}{tag}label={node.label}")
            else:
                lines.append(f"{prefix}{tag}[{node.predicate.describe()}]")
                walk(node.left, prefix + "  ", "Y: ")
                walk(node.right, prefix + "  ", "N: ")

        walk(self.root, indent, "")
        return "\n".join(lines)


def path_explanation(tree: DecisionTree, x: Instance, provenance: str = HONEST) -> Explanation:
    """Explanation read off the evaluation path, each predicate oriented by
    the branch actually taken; its label equals the tree's decision."""
    x = tree.space.validate(x)
    oriented = []
    node = tree.root
    while not node.is_leaf:
        taken = node.predicate.evaluate(x)
        oriented.append(OrientedPredicate(predicate=node.predicate, branch=taken))
        node = node.left if taken else node.right
    return Explanation(predicates=tuple(oriented), label=node.label, provenance=provenance)


def uses_discriminative(tree: DecisionTree, space: FeatureSpace | None = None) -> bool:
    """Syntactic check: does any node test a discriminative feature?

    A tree can test a discriminative feature and still be semantically
    legitimate (both children identical); this check does not chase that.
    """
    space = space or tree.space

    def walk(node):
        if node.is_leaf:
            return False
        if space.is_discriminative(node.predicate.feature):
            return True
        return walk(node.left) or walk(node.right)

    return walk(tree.root)


def pr_attack_prune(tree: DecisionTree, x: Instance,
                    collapse_untaken_legit: bool = False) -> DecisionTree:
    """Per-query surrogate: splice out every discriminative node.

    Each node testing a discriminative feature (on-path or not) is replaced by
    whichever child its predicate selects on x, so the surrogate behaves like
    the original with the discriminative features frozen at x's values. Legit
    nodes and their subtrees are kept intact, which is what makes the
    partial-evaluation law hold on every legit assignment, not just x's.

    ``collapse_untaken_legit=True`` switches to the cruder variant that also
    replaces the untaken child of every legit node on the evaluation path with
    a leaf deciding the opposite label. It still yields a coherent legitimate
    surrogate for x, but it destroys behaviour away from x's path; it is kept
    only for comparison.
    """
    x = tree.space.validate(x)
    space = tree.space

    if collapse_untaken_legit:
        y = tree.predict(x)
        root = _splice_collapsing(tree.root, x, space, 1 - y)
    else:
        root = _splice(tree.root, x, space)
    return DecisionTree(space, root)


def _splice(node, x, space):
    if node.is_leaf:
        return node
    if space.is_discriminative(node.predicate.feature):
        taken = node.left if node.predicate.evaluate(x) else node.right
        return _splice(taken, x, space)
    return Node(
        predicate=node.predicate,
        left=_splice(node.left, x, space),
        right=_splice(node.right, x, space),
    )


def _splice_collapsing(node, x, space, dummy_label):
    if node.is_leaf:
        return node
    taken_left = node.predicate.evaluate(x)
    taken = node.left if taken_left else node.right
    if space.is_discriminative(node.predicate.feature):
        return _splice_collapsing(taken, x, space, dummy_label)
    pruned_taken = _splice_collapsing(taken, x, space, dummy_label)
    dummy = Leaf(dummy_label)
    if taken_left:
        return Node(predicate=node.predicate, left=pruned_taken, right=dummy)
    return Node(predicate=node.predicate, left=dummy, right=pruned_taken)


# -- training ---------------------------------------------------------------

def _gini(counts, total):
    p1 = counts / total
    p0 = 1.0 - p1
    return 1.0 - p0 * p0 - p1 * p1


def _majority(labels):
    ones = sum(labels)
    zeros = len(labels) - ones
    return 1 if ones > zeros else 0


def _candidate_predicates(space, feat_idx, values):
    """Deterministic candidate tests for one feature over the sample values."""
    spec = space.features[feat_idx]
    if isinstance(spec.domain, Categorical):
        order = {v: i for i, v in enumerate(spec.domain.values_)}
        present = sorted(set(values), key=order.__getitem__)
        return [make_in(space, spec.name, {v}) for v in present]
    distinct = sorted(set(values))
    preds = []
    for lo, hi in zip(distinct, distinct[1:]):
        preds.append(make_le(space, spec.name, (lo + hi) / 2))
    return preds


def train(space: FeatureSpace, rows, labels, cfg: TrainConfig = TrainConfig()) -> DecisionTree:
    """Greedy top-down gini induction.

    Deterministic given the input order: candidate splits are scanned in
    feature-index order, numeric thresholds ascending, categorical singletons
    in domain order, and only a strictly better gain displaces the incumbent.
    """
    rows = [space.validate(r) for r in rows]
    labels = [int(y) for y in labels]
    if not rows:
        raise DataFormatError("empty training set")
    if len(rows) != len(labels):
        raise DataFormatError("rows and labels differ in length")
    if any(y not in (0, 1) for y in labels):
        raise DataFormatError("labels must be binary")

    if cfg.feature_whitelist is not None:
        allowed = {space.index(name) for name in cfg.feature_whitelist}
    else:
        allowed = set(range(len(space)))

    def build(idxs, depth):
        ys = [labels[i] for i in idxs]
        ones = sum(ys)
        if ones == 0 or ones == len(ys):
            return Leaf(ys[0])
        if depth >= cfg.max_depth or len(idxs) < cfg.min_samples_split:
            return Leaf(_majority(ys))

        parent = _gini(ones, len(ys))
        best = None  # (gain, predicate, left_idxs, right_idxs)
        for feat_idx in range(len(space)):
            if feat_idx not in allowed:
                continue
            values = [rows[i][feat_idx] for i in idxs]
            for pred in _candidate_predicates(space, feat_idx, values):
                left, right = [], []
                left_ones = 0
                for i in idxs:
                    if pred.evaluate(rows[i]):
                        left.append(i)
                        left_ones += labels[i]
                    else:
                        right.append(i)
                if not left or not right:
                    continue
                right_ones = ones - left_ones
                child = (len(left) * _gini(left_ones, len(left))
                         + len(right) * _gini(right_ones, len(right))) / len(idxs)
                gain = parent - child
                if best is None or gain > best[0]:
                    best = (gain, pred, left, right)

        if best is None or best[0] <= 0.0:
            return Leaf(_majority(ys))
        _, pred, left, right = best
        return Node(predicate=pred,
                    left=build(left, depth + 1),
                    right=build(right, depth + 1))

    return DecisionTree(space, build(list(range(len(rows))), 0))


# -- serialization ------------------------------------------------------------

def _node_to_doc(node, space):
    if node.is_leaf:
        return {"leaf": int(node.label)}
    return {
        **predicate_to_doc(node.predicate, space),
        "left": _node_to_doc(node.left, space),
        "right": _node_to_doc(node.right, space),
    }


def _node_from_doc(doc, space):
    if "leaf" in doc:
        label = int(doc["leaf"])
        if label not in (0, 1):
            raise DataFormatError(f"leaf label must be 0 or 1, got {label}")
        return Leaf(label)
    if "left" not in doc or "right" not in doc:
        raise DataFormatError(f"internal node needs both children: {doc!r}")
    return Node(
        predicate=predicate_from_doc(doc, space),
        left=_node_from_doc(doc["left"], space),
        right=_node_from_doc(doc["right"], space),
    )


def tree_to_doc(tree: DecisionTree):
    return {"space": tree.space.to_doc(), "root": _node_to_doc(tree.root, tree.space)}


def tree_from_doc(doc) -> DecisionTree:
    try:
        space = FeatureSpace.from_doc(doc["space"])
        root_doc = doc["root"]
    except (TypeError, KeyError):
        raise DataFormatError("tree document needs 'space' and 'root'")
    return DecisionTree(space, _node_from_doc(root_doc, space))


def save_tree(tree: DecisionTree, path):
    with open(path, "w") as fh:
        yaml.safe_dump(tree_to_doc(tree), fh, sort_keys=False)


def load_tree(path) -> DecisionTree:
    with open(path) as fh:
        return tree_from_doc(yaml.safe_load(fh))


def load_training_csv(path, space: FeatureSpace):
    """Read (rows, labels) from a CSV whose header names every feature of the
    space plus a 'label' column, in any column order. Values are parsed per
    domain: numeric ranges as numbers, categories verbatim."""
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file")
        positions = {name: i for i, name in enumerate(header)}
        missing = [f.name for f in space.features if f.name not in positions]
        if missing:
            raise DataFormatError(f"{path}: header lacks columns {missing}")
        if "label" not in positions:
            raise DataFormatError(f"{path}: header lacks a 'label' column")

        rows, labels = [], []
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != len(header):
                raise DataFormatError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
            values = []
            for spec in space.features:
                raw = fields[positions[spec.name]]
                if isinstance(spec.domain, Categorical):
                    values.append(raw)
                else:
                    try:
                        values.append(float(raw) if "." in raw else int(raw))
                    except ValueError:
                        raise DataFormatError(
                            f"{path}:{lineno}: non-numeric {spec.name!r} value {raw!r}")
            raw_label = fields[positions["label"]]
            if raw_label not in ("0", "1"):
                raise DataFormatError(f"{path}:{lineno}: label must be 0 or 1, got {raw_label!r}")
            rows.append(space.validate(tuple(values)))
            labels.append(int(raw_label))
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return rows, labels
