"""Probabilistic predictors, small trainers and the model file format.

Every predictor returns the probability of the positive class (class 1) for a
single instance and counts how many instances it has been asked about.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess
import threading
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

from .datamodel import Dataset
from .errors import ContractError, ModelLoadError, UnsupportedError

log = logging.getLogger(__name__)

SELFTEST_TOLERANCE = 1e-9


class Predictor:
    """Base contract: ``predict_proba`` on one instance, with a query counter."""

    n_features: int

    def __init__(self, n_features: int):
        self.n_features = int(n_features)
        self._count = 0
        self._lock = threading.Lock()

    @property
    def query_count(self) -> int:
        return self._count

    def _tick(self, n: int = 1):
        with self._lock:
            self._count += n

    def _check(self, X: np.ndarray):
        if X.shape[-1] != self.n_features:
            raise ContractError(f"instance has {X.shape[-1]} values, model expects {self.n_features}")

    def _forward(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_proba(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(-1)
        self._check(x)
        self._tick()
        return float(self._forward(x[None, :])[0])

    def predict_proba_batch(self, X) -> np.ndarray:
        """Row-wise probabilities; counts one query per row."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self._check(X)
        self._tick(X.shape[0])
        return np.asarray(self._forward(X), dtype=float).reshape(-1)

    def predicted_class(self, x) -> int:
        return int(self.predict_proba(x) >= 0.5)


class LinearModel(Predictor):
    def __init__(self, weights, bias: float = 0.0):
        weights = np.asarray(weights, dtype=float).reshape(-1)
        super().__init__(weights.shape[0])
        self.weights = weights
        self.weights.setflags(write=False)
        self.bias = float(bias)
        self.history: list[float] = []

    def _forward(self, X):
        return expit(X @ self.weights + self.bias)

    def to_dict(self) -> dict:
        return {"kind": "linear", "weights": self.weights.tolist(), "bias": self.bias}


class MlpModel(Predictor):
    """ReLU hidden layers, sigmoid output unit."""

    def __init__(self, layers: Sequence[tuple[np.ndarray, np.ndarray]]):
        layers = [(np.asarray(W, dtype=float), np.asarray(b, dtype=float).reshape(-1)) for W, b in layers]
        if not layers:
            raise ContractError("an MLP needs at least the output layer")
        for i, (W, b) in enumerate(layers):
            if W.ndim != 2 or W.shape[1] != b.shape[0]:
                raise ContractError(f"layer {i}: weight shape {W.shape} does not match bias {b.shape}")
            if i and W.shape[0] != layers[i - 1][0].shape[1]:
                raise ContractError(f"layer {i}: input width {W.shape[0]} != previous output {layers[i - 1][0].shape[1]}")
        if layers[-1][0].shape[1] != 1:
            raise ContractError("output layer must have exactly one unit")
        super().__init__(layers[0][0].shape[0])
        self.layers = layers
        self.history: list[float] = []

    def _forward(self, X):
        h = X
        for W, b in self.layers[:-1]:
            h = np.maximum(h @ W + b, 0.0)
        W, b = self.layers[-1]
        return expit(h @ W + b)[:, 0]

    def to_dict(self) -> dict:
        return {
            "kind": "mlp",
            "layers": [{"weights": W.tolist(), "bias": b.tolist()} for W, b in self.layers],
        }


class FunctionPredictor(Predictor):
    """Wraps a plain callable ``f(x) -> probability``; handy for scripted models."""

    def __init__(self, fn: Callable[[np.ndarray], float], n_features: int):
        super().__init__(n_features)
        self.fn = fn

    def _forward(self, X):
        return np.array([float(self.fn(row.copy())) for row in X])


class ClassView(Predictor):
    """Probability of class 0 or 1 of an underlying positive-class predictor.

    Queries are forwarded, so both this view and the wrapped model count them.
    """

    def __init__(self, base: Predictor, target_class: int):
        if target_class not in (0, 1):
            raise ContractError("target class must be 0 or 1")
        super().__init__(base.n_features)
        self.base = base
        self.target_class = target_class

    def predict_proba(self, x) -> float:
        self._tick()
        p = self.base.predict_proba(x)
        return p if self.target_class == 1 else 1.0 - p

    def predict_proba_batch(self, X) -> np.ndarray:
        p = self.base.predict_proba_batch(X)
        self._tick(p.shape[0])
        return p if self.target_class == 1 else 1.0 - p


def for_class(m: Predictor, target_class: int) -> Predictor:
    return m if target_class == 1 else ClassView(m, target_class)


class SubprocessPredictor(Predictor):
    """Talks to an external model over a line protocol on stdin/stdout.

    Request: one line of comma-separated feature values.
    Response: one line holding a decimal probability.
    """

    def __init__(self, command: str | Sequence[str], n_features: int):
        super().__init__(n_features)
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
        )
        self._io_lock = threading.Lock()

    def _ask(self, row: np.ndarray) -> float:
        line = ",".join(format(float(v), ".17g") for v in row)
        with self._io_lock:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
            reply = self._proc.stdout.readline()
        if not reply:
            raise ContractError("subprocess predictor closed its output")
        p = float(reply.strip())
        if not 0.0 <= p <= 1.0:
            raise ContractError(f"subprocess predictor returned {p}, outside [0, 1]")
        return p

    def _forward(self, X):
        return np.array([self._ask(row) for row in X])

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# --------------------------------------------------------------------------
# training

def _binary_labels(ds: Dataset) -> np.ndarray:
    if ds.labels is None:
        raise UnsupportedError("training needs a labelled dataset")
    y = np.asarray(ds.labels)
    if not np.all(np.isin(y, (0, 1))):
        raise UnsupportedError("only binary 0/1 labels are supported")
    return y.astype(float)


def _log_loss(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def _standardiser(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    mu = ds.means
    sd = ds.stds.copy()
    sd[sd == 0] = 1.0
    return mu, sd


def train_mlp(ds: Dataset, hidden: Sequence[int] = (), epochs: int = 1000, lr: float = 0.1,
              seed: int = 0) -> MlpModel:
    """Full-batch gradient descent on mean log-loss.

    Inputs are standardised during training and the scaling is folded back into
    the first layer, so the returned model consumes raw feature values. Hidden
    layers get He-normal initialisation from ``seed``; the output layer starts at
    zero, which makes ``hidden=()`` coincide with logistic regression.
    """
    if epochs < 1:
        raise ContractError("epochs must be at least 1")
    if lr <= 0:
        raise ContractError("learning rate must be positive")
    y = _binary_labels(ds)
    mu, sd = _standardiser(ds)
    X = (ds.rows - mu) / sd
    n = X.shape[0]

    rng = np.random.default_rng(seed)
    sizes = [X.shape[1], *hidden, 1]
    Ws, bs = [], []
    for i, (a, b) in enumerate(zip(sizes, sizes[1:])):
        if i == len(sizes) - 2:
            Ws.append(np.zeros((a, b)))
        else:
            Ws.append(rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)))
        bs.append(np.zeros(b))

    history = []
    for _ in range(epochs):
        acts = [X]
        for W, b in zip(Ws[:-1], bs[:-1]):
            acts.append(np.maximum(acts[-1] @ W + b, 0.0))
        p = expit(acts[-1] @ Ws[-1] + bs[-1])[:, 0]
        history.append(_log_loss(p, y))
        delta = ((p - y) / n)[:, None]
        for k in range(len(Ws) - 1, -1, -1):
            gW = acts[k].T @ delta
            gb = delta.sum(axis=0)
            if k:
                delta = (delta @ Ws[k].T) * (acts[k] > 0)
            Ws[k] -= lr * gW
            bs[k] -= lr * gb

    # fold the standardisation into the first layer
    W0 = Ws[0] / sd[:, None]
    b0 = bs[0] - (mu / sd) @ Ws[0]
    layers = [(W0, b0)] + list(zip(Ws[1:], bs[1:]))
    model = MlpModel(layers)
    model.history = history
    return model


def train_logistic(ds: Dataset, epochs: int = 1000, lr: float = 0.1) -> LinearModel:
    mlp = train_mlp(ds, hidden=(), epochs=epochs, lr=lr, seed=0)
    W, b = mlp.layers[0]
    model = LinearModel(W[:, 0], float(b[0]))
    model.history = mlp.history
    return model


def f1_score(model: Predictor, ds: Dataset) -> float:
    y = _binary_labels(ds)
    pred = (model.predict_proba_batch(ds.rows) >= 0.5).astype(float)
    tp = float(np.sum((pred == 1) & (y == 1)))
    fp = float(np.sum((pred == 1) & (y == 0)))
    fn = float(np.sum((pred == 0) & (y == 1)))
    return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)


def accuracy(model: Predictor, ds: Dataset) -> float:
    y = _binary_labels(ds)
    pred = (model.predict_proba_batch(ds.rows) >= 0.5).astype(float)
    return float(np.mean(pred == y))


# --------------------------------------------------------------------------
# serialisation

def model_to_dict(model: LinearModel | MlpModel, selftest_inputs=None) -> dict:
    if not isinstance(model, (LinearModel, MlpModel)):
        raise UnsupportedError(f"cannot serialise {type(model).__name__}")
    doc = model.to_dict()
    if selftest_inputs is None:
        selftest_inputs = np.zeros((1, model.n_features))
    X = np.atleast_2d(np.asarray(selftest_inputs, dtype=float))
    outputs = model._forward(X)
    doc["selftest"] = [{"input": row.tolist(), "output": float(p)} for row, p in zip(X, outputs)]
    return doc


def save_model(model: LinearModel | MlpModel, path: str | Path, selftest_inputs=None):
    Path(path).write_text(json.dumps(model_to_dict(model, selftest_inputs), indent=2), encoding="utf-8")


def predictor_from_dict(doc: dict) -> Predictor:
    kind = doc.get("kind")
    try:
        if kind == "linear":
            model = LinearModel(doc["weights"], doc.get("bias", 0.0))
        elif kind == "mlp":
            model = MlpModel([(layer["weights"], layer["bias"]) for layer in doc["layers"]])
        else:
            raise ModelLoadError(f"unknown model kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelLoadError):
            raise
        raise ModelLoadError(f"malformed {kind} model: {exc}") from exc

    for case in doc.get("selftest", []):
        x = np.asarray(case["input"], dtype=float)
        if x.shape != (model.n_features,):
            raise ModelLoadError(f"self-test input has {x.size} values, model expects {model.n_features}")
        got = float(model._forward(x[None, :])[0])
        if abs(got - float(case["output"])) > SELFTEST_TOLERANCE:
            raise ModelLoadError(f"self-test failed: expected {case['output']}, got {got}")
    return model


def load_predictor(source: str | Path) -> Predictor:
    try:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"{source}: not valid JSON ({exc})") from exc
    return predictor_from_dict(doc)
