"""Credit-scoring data plumbing.

Reads the 25-column whitespace-separated numeric export of the German credit
data (24 integer attributes plus a class column where 1 means good and 2 means
bad), builds a feature space from observed column ranges, and marks the
protected columns via a name-to-column mapping supplied by configuration.

The numeric export interleaves expanded categorical codes, so column positions
vary between copies found in the wild; DEFAULT_COLUMN_MAP is a best-effort
guess that any experiment config can override.
"""

import os

import numpy as np

from .errors import DataFormatError
from .space import DISCRIMINATIVE, LEGIT, FeatureSpace, FeatureSpec, IntRange

N_FEATURES = 24
GERMAN_DATA_ENV = "EXPLAUDIT_GERMAN_DATA"

REQUIRED_DISCRIMINATIVE = ("employment", "sex_status", "age", "foreigner")

DEFAULT_COLUMN_MAP = {
    "employment": 6,
    "sex_status": 8,
    "age": 12,
    "foreigner": 19,
}


def discriminative_feature_map(config) -> dict:
    """Resolve the four protected attribute names to column indices.

    config is a mapping that either is, or carries under 'column_map', a
    name -> column-index table. All of REQUIRED_DISCRIMINATIVE must resolve.
    """
    if not isinstance(config, dict):
        raise DataFormatError("config must be a mapping")
    table = config.get("column_map", config)
    if not isinstance(table, dict):
        raise DataFormatError("'column_map' must be a mapping")
    missing = [name for name in REQUIRED_DISCRIMINATIVE if name not in table]
    if missing:
        raise DataFormatError(f"column map lacks protected attributes: {missing}")
    resolved = {name: table[name] for name in REQUIRED_DISCRIMINATIVE}
    validate_column_map(resolved)
    return resolved


def load_german_numeric(source):
    """Parse the whitespace-separated numeric export into (X, y) int arrays.

    source is a path or an open text stream. y is 1 for class 1
    (creditworthy) and 0 for class 2.
    """
    if hasattr(source, "read"):
        return _parse_numeric(source, getattr(source, "name", "<stream>"))
    with open(source) as fh:
        return _parse_numeric(fh, source)


def _parse_numeric(fh, label):
    rows = []
    labels = []
    for lineno, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != N_FEATURES + 1:
            raise DataFormatError(
                f"{label}:{lineno}: expected {N_FEATURES + 1} columns, got {len(fields)}")
        try:
            values = [int(f) for f in fields]
        except ValueError:
            raise DataFormatError(f"{label}:{lineno}: non-integer field")
        cls = values[-1]
        if cls not in (1, 2):
            raise DataFormatError(f"{label}:{lineno}: class must be 1 or 2, got {cls}")
        rows.append(values[:-1])
        labels.append(1 if cls == 1 else 0)
    if not rows:
        raise DataFormatError(f"{label}: no data rows")
    return np.array(rows, dtype=int), np.array(labels, dtype=int)


def save_german_numeric(X, y, path):
    X = np.asarray(X, dtype=int)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[1] != N_FEATURES or X.shape[0] != y.shape[0]:
        raise DataFormatError(f"need ({y.shape[0]}, {N_FEATURES}) attributes with one label per row")
    with open(path, "w") as fh:
        for row, label in zip(X, y):
            cls = 1 if label == 1 else 2
            fh.write(" ".join(str(int(v)) for v in row) + f" {cls}\n")


def locate_german_data() -> str | None:
    """Path to the canonical dataset from the environment, if configured."""
    path = os.environ.get(GERMAN_DATA_ENV)
    if path and os.path.isfile(path):
        return path
    return None


def validate_column_map(column_map, n_features: int = N_FEATURES):
    if not column_map:
        raise DataFormatError("column map is empty")
    seen = set()
    for name, idx in column_map.items():
        if not name or not isinstance(name, str):
            raise DataFormatError(f"bad column name {name!r}")
        if not isinstance(idx, int) or isinstance(idx, bool) or not 0 <= idx < n_features:
            raise DataFormatError(f"column {name!r} index {idx!r} out of range 0..{n_features - 1}")
        if idx in seen:
            raise DataFormatError(f"column index {idx} mapped twice")
        seen.add(idx)


def build_feature_space(X, column_map=DEFAULT_COLUMN_MAP, domain_overrides=None) -> FeatureSpace:
    """Feature space over the data columns: mapped columns become the named
    discriminative features, the rest are legitimate a1..a24 with ranges
    observed in the data (widen via domain_overrides, name -> (lo, hi))."""
    X = np.asarray(X, dtype=int)
    if X.ndim != 2:
        raise DataFormatError("X must be 2-d")
    validate_column_map(column_map, X.shape[1])
    overrides = dict(domain_overrides or {})
    by_index = {idx: name for name, idx in column_map.items()}

    specs = []
    for j in range(X.shape[1]):
        name = by_index.get(j, f"a{j + 1}")
        lo, hi = int(X[:, j].min()), int(X[:, j].max())
        if name in overrides:
            olo, ohi = overrides.pop(name)
            if olo > lo or ohi < hi:
                raise DataFormatError(
                    f"override [{olo}, {ohi}] for {name!r} excludes observed values [{lo}, {hi}]")
            lo, hi = int(olo), int(ohi)
        tag = DISCRIMINATIVE if j in by_index else LEGIT
        specs.append(FeatureSpec(name=name, domain=IntRange(lo, hi), tag=tag))
    if overrides:
        raise DataFormatError(f"domain overrides for unknown features: {sorted(overrides)}")
    return FeatureSpace(specs)


def profiles_from_rows(X):
    """Numpy rows to plain-int instance tuples."""
    return [tuple(int(v) for v in row) for row in np.asarray(X)]


def synthesize_credit_like(n: int, seed: int, column_map=DEFAULT_COLUMN_MAP):
    """Fabricated data with the same shape and column style as the numeric
    export: integer codes, an age-like column, and a planted dependence of the
    label on the sex_status column so trained models are discriminative.

    This exists to exercise the pipeline; its numbers say nothing about the
    real dataset.
    """
    if n < 8:
        raise DataFormatError("need at least 8 rows")
    validate_column_map(column_map)
    if "sex_status" not in column_map:
        raise DataFormatError("synthesis plants its bias on 'sex_status'; map that column")
    rng = np.random.default_rng(seed)
    X = np.empty((n, N_FEATURES), dtype=int)
    for j in range(N_FEATURES):
        if j == column_map.get("age"):
            X[:, j] = rng.integers(19, 76, size=n)
        elif j == column_map.get("foreigner"):
            X[:, j] = rng.integers(1, 3, size=n)
        elif j == column_map.get("sex_status"):
            X[:, j] = rng.integers(1, 5, size=n)
        elif j == column_map.get("employment"):
            X[:, j] = rng.integers(1, 6, size=n)
        else:
            X[:, j] = rng.integers(0, 5, size=n)
    score = (1.2 * X[:, 0] - 0.9 * X[:, 2] + 0.7 * X[:, 4]
             + 1.5 * (X[:, column_map["sex_status"]] == 1)
             + rng.normal(0.0, 1.0, size=n))
    y = (score > np.median(score)).astype(int)
    return X, y
