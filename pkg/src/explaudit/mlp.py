"""Small dense network for binary decisions: one sigmoid hidden layer, a
sigmoid output, binary cross-entropy, Adam. Everything is numpy; the model
carries its own input standardization so callers always feed raw feature rows.
"""

from dataclasses import dataclass

import numpy as np
import yaml

from .errors import DataFormatError


@dataclass(frozen=True)
class TrainSpec:
    hidden: int = 23
    epochs: int = 100
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    val_fraction: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1:
            raise DataFormatError("hidden must be >= 1")
        if self.epochs < 0:
            raise DataFormatError("epochs must be >= 0")
        if self.lr <= 0:
            raise DataFormatError("lr must be positive")
        if self.batch_size < 1:
            raise DataFormatError("batch_size must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise DataFormatError("val_fraction must be in (0, 1)")


@dataclass(frozen=True)
class EpochStat:
    epoch: int
    train_loss: float
    val_accuracy: float


@dataclass(frozen=True)
class TrainResult:
    model: "MlpModel"
    history: tuple
    train_idx: np.ndarray
    val_idx: np.ndarray

    @property
    def final_val_accuracy(self) -> float:
        if not self.history:
            raise DataFormatError("no epochs were trained")
        return self.history[-1].val_accuracy


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _bce_from_logits(z, y):
    # mean(softplus(z) - y z), stable for large |z|
    sp = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return float(np.mean(sp - y * z))


class MlpModel:
    """Weights plus the standardization fitted on the training split."""

    def __init__(self, W1, b1, W2, b2, mu, sigma):
        self.W1 = np.asarray(W1, dtype=float)
        self.b1 = np.asarray(b1, dtype=float)
        self.W2 = np.asarray(W2, dtype=float)
        self.b2 = np.asarray(b2, dtype=float)
        self.mu = np.asarray(mu, dtype=float)
        self.sigma = np.asarray(sigma, dtype=float)

    @property
    def n_inputs(self) -> int:
        return self.W1.shape[0]

    def standardize(self, X):
        X = np.asarray(X, dtype=float)
        return (X - self.mu) / self.sigma

    def logits(self, X):
        Xs = self.standardize(X)
        a1 = _sigmoid(Xs @ self.W1 + self.b1)
        return a1 @ self.W2 + self.b2

    def predict_proba(self, X):
        return _sigmoid(self.logits(X))

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(int)

    def decide(self, x) -> int:
        """Single-row convenience for service plumbing."""
        row = np.asarray(x, dtype=float).reshape(1, -1)
        if row.shape[1] != self.n_inputs:
            raise DataFormatError(
                f"expected {self.n_inputs} features, got {row.shape[1]}")
        return int(self.predict(row)[0, 0])

    def parameters(self):
        return [self.W1, self.b1, self.W2, self.b2]


def _init_model(n_inputs, hidden, rng) -> MlpModel:
    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return MlpModel(
        W1=glorot(n_inputs, hidden),
        b1=np.zeros(hidden),
        W2=glorot(hidden, 1),
        b2=np.zeros(1),
        mu=np.zeros(n_inputs),
        sigma=np.ones(n_inputs),
    )


def _grads(model, Xs, y):
    """Backprop on already-standardized inputs; returns grads in
    parameters() order for the mean BCE over the batch."""
    B = Xs.shape[0]
    z1 = Xs @ model.W1 + model.b1
    a1 = _sigmoid(z1)
    z2 = a1 @ model.W2 + model.b2
    p = _sigmoid(z2)
    dz2 = (p - y) / B
    dW2 = a1.T @ dz2
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ model.W2.T
    dz1 = da1 * a1 * (1.0 - a1)
    dW1 = Xs.T @ dz1
    db1 = dz1.sum(axis=0)
    return [dW1, db1, dW2, db2]


class _Adam:
    def __init__(self, params, spec: TrainSpec):
        self.spec = spec
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        s = self.spec
        self.t += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = s.beta1 * self.m[i] + (1.0 - s.beta1) * g
            self.v[i] = s.beta2 * self.v[i] + (1.0 - s.beta2) * g * g
            mhat = self.m[i] / (1.0 - s.beta1 ** self.t)
            vhat = self.v[i] / (1.0 - s.beta2 ** self.t)
            p -= s.lr * mhat / (np.sqrt(vhat) + s.eps)


def split_train_val(n: int, val_fraction: float, rng):
    """Shuffled index split; validation takes floor(n * val_fraction) rows."""
    order = rng.permutation(n)
    n_val = int(n * val_fraction)
    if n_val == 0 or n_val == n:
        raise DataFormatError(
            f"validation split of {n} rows at fraction {val_fraction} is empty on one side")
    return order[n_val:], order[:n_val]


def train_mlp(X, y, spec: TrainSpec = TrainSpec()) -> TrainResult:
    """The standardization is fitted on the training split only and baked into
    the model; validation rows never touch it."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DataFormatError("X must be 2-d with one label per row")
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataFormatError("labels must be binary")

    rng = np.random.default_rng(spec.seed)
    train_idx, val_idx = split_train_val(X.shape[0], spec.val_fraction, rng)
    X_train, y_train = X[train_idx], y[train_idx]
    X_val, y_val = X[val_idx], y[val_idx]
    if len(np.unique(y)) == 2 and len(np.unique(y_train)) < 2:
        raise DataFormatError(
            "training split degenerated to a single class; reshuffle or grow the data")

    mu = X_train.mean(axis=0)
    sigma = X_train.std(axis=0)
    sigma[sigma == 0.0] = 1.0

    model = _init_model(X.shape[1], spec.hidden, rng)
    model.mu, model.sigma = mu, sigma
    opt = _Adam(model.parameters(), spec)

    Xs_train = model.standardize(X_train)
    history = []
    for epoch in range(1, spec.epochs + 1):
        order = rng.permutation(Xs_train.shape[0])
        for start in range(0, len(order), spec.batch_size):
            batch = order[start:start + spec.batch_size]
            grads = _grads(model, Xs_train[batch], y_train[batch])
            opt.step(model.parameters(), grads)
        history.append(EpochStat(
            epoch=epoch,
            train_loss=_bce_from_logits(model.logits(X_train), y_train),
            val_accuracy=accuracy(model, X_val, y_val),
        ))
    return TrainResult(model=model, history=tuple(history),
                       train_idx=train_idx, val_idx=val_idx)


def accuracy(model: MlpModel, X, y) -> float:
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    return float(np.mean(model.predict(X) == y))


def loss(model: MlpModel, X, y) -> float:
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    return _bce_from_logits(model.logits(X), y)


def gradient_check(model: MlpModel, X, y, h: float = 1e-5) -> float:
    """Max relative error between backprop and central finite differences of
    the mean BCE over (X, y). Healthy implementations sit well under 1e-4."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    Xs = model.standardize(X)
    analytic = _grads(model, Xs, y)

    worst = 0.0
    for p, g in zip(model.parameters(), analytic):
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            ix = it.multi_index
            keep = p[ix]
            p[ix] = keep + h
            up = loss_std(model, Xs, y)
            p[ix] = keep - h
            down = loss_std(model, Xs, y)
            p[ix] = keep
            numeric = (up - down) / (2.0 * h)
            denom = max(abs(numeric) + abs(g[ix]), 1e-8)
            worst = max(worst, abs(numeric - g[ix]) / denom)
            it.iternext()
    return worst


def loss_std(model: MlpModel, Xs, y) -> float:
    """Mean BCE on pre-standardized inputs; the gradient check perturbs
    weights between calls, so this recomputes the full forward pass."""
    a1 = _sigmoid(Xs @ model.W1 + model.b1)
    z2 = a1 @ model.W2 + model.b2
    return _bce_from_logits(z2, y)


# -- serialization ------------------------------------------------------------

def mlp_to_doc(model: MlpModel):
    return {
        "W1": model.W1.tolist(),
        "b1": model.b1.tolist(),
        "W2": model.W2.tolist(),
        "b2": model.b2.tolist(),
        "mu": model.mu.tolist(),
        "sigma": model.sigma.tolist(),
    }


def mlp_from_doc(doc) -> MlpModel:
    try:
        return MlpModel(**{k: doc[k] for k in ("W1", "b1", "W2", "b2", "mu", "sigma")})
    except (TypeError, KeyError) as exc:
        raise DataFormatError(f"bad model document: {exc}")


def save_mlp(model: MlpModel, path):
    with open(path, "w") as fh:
        yaml.safe_dump(mlp_to_doc(model), fh, sort_keys=False)


def load_mlp(path) -> MlpModel:
    with open(path) as fh:
        return mlp_from_doc(yaml.safe_load(fh))
