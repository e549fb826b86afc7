"""Feature-importance techniques producing a signed vector per instance.

Four techniques are provided: the intrinsic coefficients of a linear model,
permutation importance (global magnitude, locally signed), a LIME-style
weighted ridge surrogate fitted on standardised noise and mapped back to raw
units, and a kernel-SHAP-style weighted least squares over feature coalitions
with mean imputation.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace
from math import comb

import numpy as np

from .datamodel import Dataset, as_instance
from .errors import ContractError, NumericalError, UnsupportedError
from .models import ClassView, LinearModel, Predictor

DEFAULT_RIDGE = 1e-3
FD_FRACTION = 1e-2


@dataclass(frozen=True)
class ImportanceVector:
    technique: str
    values: np.ndarray
    instance: np.ndarray
    baseline_probability: float
    excluded: tuple[bool, ...] = ()
    neighborhood_std: np.ndarray | None = None
    weighted_neighborhood_std: np.ndarray | None = None
    neutral_band: float | None = None
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "instance", np.asarray(self.instance, dtype=float).reshape(-1))
        if self.instance.shape != values.shape:
            raise ContractError("importance vector and instance differ in length")
        if not self.excluded:
            object.__setattr__(self, "excluded", (False,) * values.shape[0])
        elif len(self.excluded) != values.shape[0]:
            raise ContractError("exclusion mask has the wrong length")

    def __len__(self):
        return self.values.shape[0]

    @property
    def kept(self) -> list[int]:
        return [j for j, gone in enumerate(self.excluded) if not gone]

    def to_dict(self) -> dict:
        doc = {
            "technique": self.technique,
            "z": self.values.tolist(),
            "baseline": self.baseline_probability,
            "instance": self.instance.tolist(),
        }
        if any(self.excluded):
            doc["excluded"] = list(self.excluded)
        if self.neutral_band is not None:
            doc["neutral_band"] = self.neutral_band
        if self.neighborhood_std is not None:
            doc["neighborhood_std"] = self.neighborhood_std.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict, instance=None) -> "ImportanceVector":
        """Import an externally computed explanation (e.g. real LIME/SHAP output)."""
        x = doc.get("instance", instance)
        if x is None:
            raise ContractError("importance document carries no instance and none was given")
        nstd = doc.get("neighborhood_std")
        return cls(
            technique=doc["technique"],
            values=np.asarray(doc["z"], dtype=float),
            instance=np.asarray(x, dtype=float),
            baseline_probability=float(doc["baseline"]),
            excluded=tuple(bool(e) for e in doc.get("excluded", ())),
            neighborhood_std=None if nstd is None else np.asarray(nstd, dtype=float),
            neutral_band=doc.get("neutral_band"),
        )

    def with_values(self, values, **changes) -> "ImportanceVector":
        return replace(self, values=np.asarray(values, dtype=float), **changes)


def perturbation_scale(ds: Dataset, x: np.ndarray) -> np.ndarray:
    """Per-feature spread; zero-variance features fall back to max(|v|, 1) / 10."""
    scale = ds.stds
    flat = scale == 0
    scale[flat] = np.maximum(np.abs(x[flat]), 1.0) * 0.1
    return scale


def intrinsic_linear(m: Predictor, x, product: bool = False) -> ImportanceVector:
    """Raw coefficients of a linear model (``product=True`` gives w_j * v_j)."""
    sign = 1.0
    base = m
    if isinstance(m, ClassView):
        base = m.base
        sign = 1.0 if m.target_class == 1 else -1.0
    if not isinstance(base, LinearModel):
        raise UnsupportedError("intrinsic importance needs a linear model")
    x = as_instance(x, base.n_features)
    z = sign * base.weights * (x if product else 1.0)
    return ImportanceVector("intrinsic", z, x, m.predict_proba(x))


def _log_loss(p, y):
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def permutation_scores(m: Predictor, ds: Dataset, repeats: int = 5, seed: int = 0) -> np.ndarray:
    """Mean increase of log-loss when each column is shuffled (global, unsigned).

    Unlabelled datasets are scored against the model's own hard predictions.
    """
    if repeats < 1:
        raise ContractError("repeats must be at least 1")
    if ds.n_rows < 1:
        raise ContractError("empty dataset")
    rng = np.random.default_rng(seed)
    X = np.array(ds.rows)
    p = m.predict_proba_batch(X)
    if ds.labels is None:
        y = (p >= 0.5).astype(float)
    else:
        y = np.asarray(ds.labels, dtype=float)
        if isinstance(m, ClassView) and m.target_class == 0:
            y = 1.0 - y
    base = _log_loss(p, y)
    scores = np.zeros(ds.n_features)
    for j in range(ds.n_features):
        acc = 0.0
        for _ in range(repeats):
            Xp = X.copy()
            Xp[:, j] = X[rng.permutation(X.shape[0]), j]
            acc += _log_loss(m.predict_proba_batch(Xp), y) - base
        scores[j] = acc / repeats
    return scores


def local_direction(m: Predictor, ds: Dataset, x: np.ndarray) -> np.ndarray:
    """Sign of the central finite difference of the tracked probability at x."""
    h = FD_FRACTION * perturbation_scale(ds, x)
    n = x.shape[0]
    up = np.repeat(x[None, :], n, axis=0) + np.diag(h)
    down = np.repeat(x[None, :], n, axis=0) - np.diag(h)
    return np.sign(m.predict_proba_batch(up) - m.predict_proba_batch(down))


def permutation_importance(m: Predictor, ds: Dataset, x, repeats: int = 5, seed: int = 0,
                           scores: np.ndarray | None = None) -> ImportanceVector:
    """Permutation importance magnitude, signed by the local response direction.

    ``scores`` may carry precomputed :func:`permutation_scores` so a benchmark
    does not reshuffle the dataset for every instance.
    """
    if repeats < 1:
        raise ContractError("repeats must be at least 1")
    x = as_instance(x, ds.n_features)
    if scores is None:
        scores = permutation_scores(m, ds, repeats, seed)
    direction = local_direction(m, ds, x)
    z = direction * np.abs(scores)
    return ImportanceVector("permutation", z, x, m.predict_proba(x),
                            details={"raw_scores": np.asarray(scores).tolist()})


def lime_like(m: Predictor, ds: Dataset, x, n_samples: int = 1000, kernel_width: float | None = None,
              seed: int = 0, ridge: float = DEFAULT_RIDGE) -> ImportanceVector:
    x = as_instance(x, ds.n_features)
    n_features = ds.n_features
    if n_samples < n_features + 1:
        raise ContractError(f"need at least {n_features + 1} samples")
    if kernel_width is None:
        kernel_width = 0.75 * np.sqrt(n_features)
    if kernel_width <= 0:
        raise ContractError("kernel width must be positive")

    rng = np.random.default_rng(seed)
    scale = perturbation_scale(ds, x)
    noise = rng.normal(size=(n_samples, n_features))
    noise[0] = 0.0  # the instance itself is the first neighbour
    Z = x + noise * scale
    d2 = np.sum(noise ** 2, axis=1)
    w = np.exp(-d2 / kernel_width ** 2)
    y = m.predict_proba_batch(Z)

    sw = w.sum()
    mu_n = (w @ noise) / sw
    mu_y = (w @ y) / sw
    A = noise - mu_n
    b = y - mu_y
    gram = (A * w[:, None]).T @ A + ridge * np.eye(n_features)
    try:
        beta_std = np.linalg.solve(gram, (A * w[:, None]).T @ b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("weighted surrogate design is singular") from exc
    z = beta_std / scale

    mu_z = (w @ Z) / sw
    wstd = np.sqrt((w @ (Z - mu_z) ** 2) / sw)
    return ImportanceVector(
        "lime", z, x, m.predict_proba(x),
        neighborhood_std=Z.std(axis=0),
        weighted_neighborhood_std=wstd,
        details={"intercept": float(mu_y - beta_std @ mu_n)},
    )


def shapley_kernel_weight(n_features: int, size: int) -> float:
    return (n_features - 1) / (comb(n_features, size) * size * (n_features - size))


def _all_coalitions(n_features: int) -> tuple[np.ndarray, np.ndarray]:
    masks, weights = [], []
    for s in range(1, n_features):
        w = shapley_kernel_weight(n_features, s)
        for members in itertools.combinations(range(n_features), s):
            row = np.zeros(n_features, dtype=bool)
            row[list(members)] = True
            masks.append(row)
            weights.append(w)
    return np.array(masks), np.array(weights)


def _sampled_coalitions(n_features: int, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    sizes = np.arange(1, n_features)
    size_p = np.array([(n_features - 1) / (s * (n_features - s)) for s in sizes])
    size_p /= size_p.sum()
    counts: dict[bytes, list] = {}
    for s in rng.choice(sizes, size=n, p=size_p):
        row = np.zeros(n_features, dtype=bool)
        row[rng.choice(n_features, size=s, replace=False)] = True
        key = row.tobytes()
        if key in counts:
            counts[key][1] += 1.0
        else:
            counts[key] = [row, 1.0]
    masks = np.array([v[0] for v in counts.values()])
    weights = np.array([v[1] for v in counts.values()])
    return masks, weights


def kernel_shap_like(m: Predictor, ds: Dataset, x, n_coalitions: int | None = None, seed: int = 0,
                     exhaustive: bool | None = None, ridge: float = DEFAULT_RIDGE) -> ImportanceVector:
    """Shapley-kernel weighted least squares with features off the coalition set to dataset means.

    All 2^|F| - 2 proper coalitions are used when ``exhaustive`` is true, or when
    it is left as None and the budget covers them; the result is then the exact
    Shapley decomposition. The efficiency constraint is imposed exactly.
    """
    x = as_instance(x, ds.n_features)
    M = ds.n_features
    full = 2 ** M - 2
    if n_coalitions is None:
        n_coalitions = min(full, 2048) if M <= 11 else 2048
    if n_coalitions < min(2 * M, full):
        raise ContractError(f"need at least {min(2 * M, full)} coalitions")
    background = ds.means
    fx = m.predict_proba(x)
    f0 = m.predict_proba(background)
    delta = fx - f0
    if M == 1:
        return ImportanceVector("kernel_shap", [delta], x, fx, details={"null_probability": f0})

    if exhaustive is None:
        exhaustive = n_coalitions >= full
    if exhaustive:
        masks, weights = _all_coalitions(M)
    else:
        masks, weights = _sampled_coalitions(M, n_coalitions, np.random.default_rng(seed))

    y = m.predict_proba_batch(np.where(masks, x, background))
    last = masks[:, -1].astype(float)
    A = masks[:, :-1].astype(float) - last[:, None]
    b = y - f0 - last * delta
    AtW = A.T * weights
    gram = AtW @ A
    if np.linalg.matrix_rank(gram) < M - 1:
        warnings.warn("coalition design is underdetermined; adding ridge regularisation", RuntimeWarning)
        gram = gram + ridge * np.eye(M - 1)
    try:
        head = np.linalg.solve(gram, AtW @ b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("coalition design is singular") from exc
    phi = np.append(head, delta - head.sum())
    return ImportanceVector("kernel_shap", phi, x, fx,
                            details={"null_probability": f0, "coalitions": int(masks.shape[0])})


TECHNIQUES = ("intrinsic", "permutation", "lime", "kernel_shap")
