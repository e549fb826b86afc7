"""Perturbation tests checking that each importance's sign matches the model's response.

For every feature the value is pushed up and down once; the tracked probability
must move the way the importance's sign predicts (or stay within ``delta`` for a
neutral importance). A feature passes only when both alterations behave.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .datamodel import Dataset, FeatureKind, FeatureMeta, as_instance
from .errors import ContractError
from .importance import ImportanceVector
from .models import Predictor

DEFAULT_DELTA = 0.01
DEFAULT_ZETA = 1e-6
DEFAULT_VOTES = 5


class Imp(str, Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    NEUTRAL = "Neutral"


class Alt(str, Enum):
    INCREASING = "Increasing"
    DECREASING = "Decreasing"


class Exp(str, Enum):
    INCREASING = "Increasing"
    DECREASING = "Decreasing"
    STABLE = "Remaining Stable"


class Neighbourhood(str, Enum):
    TRAINING = "training"
    LOCAL = "local"
    LOCAL_WEIGHTED = "local_weighted"


EXPECTATION = {
    Imp.POSITIVE: {Alt.INCREASING: Exp.INCREASING, Alt.DECREASING: Exp.DECREASING},
    Imp.NEGATIVE: {Alt.INCREASING: Exp.DECREASING, Alt.DECREASING: Exp.INCREASING},
    Imp.NEUTRAL: {Alt.INCREASING: Exp.STABLE, Alt.DECREASING: Exp.STABLE},
}


@dataclass(frozen=True)
class Mode:
    """Deterministic (one +/- std step) or stochastic (|N(0, std^2)| steps, majority vote)."""

    stochastic: bool = False
    seed: int = 0
    votes: int = DEFAULT_VOTES

    @classmethod
    def parse(cls, text: str, seed: int = 0, votes: int = DEFAULT_VOTES) -> "Mode":
        if text == "deterministic":
            return cls()
        if text == "stochastic":
            return cls(True, seed, votes)
        raise ContractError(f"unknown perturbation mode {text!r}")

    @property
    def name(self) -> str:
        return "stochastic" if self.stochastic else "deterministic"


DETERMINISTIC = Mode()


@dataclass(frozen=True)
class AlterationRecord:
    alt: Alt
    altered_value: float
    expected: Exp
    observed: Exp
    probability_before: float
    probability_after: float

    @property
    def matched(self) -> bool:
        return self.expected is self.observed

    def to_dict(self) -> dict:
        return {
            "alteration": self.alt.value,
            "altered_value": self.altered_value,
            "expected": self.expected.value,
            "observed": self.observed.value,
            "probability_before": self.probability_before,
            "probability_after": self.probability_after,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AlterationRecord":
        return cls(Alt(doc["alteration"]), float(doc["altered_value"]), Exp(doc["expected"]),
                   Exp(doc["observed"]), float(doc["probability_before"]), float(doc["probability_after"]))


@dataclass(frozen=True)
class FeatureEvidence:
    feature: int
    name: str
    importance: float
    imp: Imp
    increasing: AlterationRecord
    decreasing: AlterationRecord

    def __post_init__(self):
        if self.increasing.alt is not Alt.INCREASING or self.decreasing.alt is not Alt.DECREASING:
            raise ContractError("evidence needs one Increasing and one Decreasing record")
        for rec in self.records:
            if rec.expected is not EXPECTATION[self.imp][rec.alt]:
                raise ContractError(f"record for {rec.alt.value} contradicts the expectation table")

    @property
    def records(self) -> tuple[AlterationRecord, AlterationRecord]:
        return (self.increasing, self.decreasing)

    @property
    def truthful(self) -> bool:
        return self.increasing.matched and self.decreasing.matched

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "name": self.name,
            "importance": self.importance,
            "imp": self.imp.value,
            "truthful": self.truthful,
            "tests": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureEvidence":
        inc, dec = (AlterationRecord.from_dict(t) for t in doc["tests"])
        return cls(int(doc["feature"]), doc["name"], float(doc["importance"]), Imp(doc["imp"]), inc, dec)


@dataclass(frozen=True)
class TruthReport:
    technique: str
    evidence: tuple[FeatureEvidence, ...]
    delta: float = DEFAULT_DELTA
    neutral_band: float = 0.0
    mode: str = "deterministic"
    delta_scope: str = "all"

    @property
    def features(self) -> list[int]:
        return [e.feature for e in self.evidence]

    @property
    def truthful(self) -> frozenset[int]:
        return frozenset(e.feature for e in self.evidence if e.truthful)

    @property
    def untruthful(self) -> frozenset[int]:
        return frozenset(e.feature for e in self.evidence if not e.truthful)

    def for_feature(self, j: int) -> FeatureEvidence:
        for e in self.evidence:
            if e.feature == j:
                return e
        raise KeyError(j)

    def to_dict(self) -> dict:
        return {
            "technique": self.technique,
            "delta": self.delta,
            "neutral_band": self.neutral_band,
            "mode": self.mode,
            "delta_scope": self.delta_scope,
            "truthful": sorted(self.truthful),
            "untruthful": sorted(self.untruthful),
            "evidence": [e.to_dict() for e in self.evidence],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TruthReport":
        return cls(doc["technique"], tuple(FeatureEvidence.from_dict(e) for e in doc["evidence"]),
                   float(doc.get("delta", DEFAULT_DELTA)), float(doc.get("neutral_band", 0.0)),
                   doc.get("mode", "deterministic"), doc.get("delta_scope", "all"))


def classify_direction(p_before: float, p_after: float, delta: float = DEFAULT_DELTA) -> Exp:
    diff = p_after - p_before
    if abs(diff) <= delta:
        return Exp.STABLE
    return Exp.INCREASING if diff > delta else Exp.DECREASING


def neutral_band(values: np.ndarray, zeta: float = DEFAULT_ZETA) -> float:
    """Absolute neutrality threshold: ``zeta`` times the largest |z|."""
    values = np.asarray(values, dtype=float)
    return float(zeta * np.max(np.abs(values))) if values.size else 0.0


def classify_importance(z: float, band: float) -> Imp:
    if abs(z) <= band:
        return Imp.NEUTRAL
    return Imp.POSITIVE if z > 0 else Imp.NEGATIVE


def fallback_step(v: float) -> float:
    return max(abs(v), 1.0) * 0.1


def perturb(meta: FeatureMeta, v: float, alt: Alt, mode: Mode = DETERMINISTIC, rng=None) -> float:
    """Altered value of one feature. Stochastic mode draws from ``rng``."""
    up = alt is Alt.INCREASING
    if meta.kind is FeatureKind.BINARY:
        return 1.0 if up else 0.0
    if meta.kind is FeatureKind.ORDINAL:
        levels = meta.levels
        i = int(np.argmin([abs(level - v) for level in levels]))
        i = min(i + 1, len(levels) - 1) if up else max(i - 1, 0)
        return float(levels[i])
    std = meta.std_dev if meta.std_dev > 0 else fallback_step(v)
    if mode.stochastic:
        if rng is None:
            rng = np.random.default_rng(mode.seed)
        step = abs(float(rng.normal(0.0, std)))
    else:
        step = std
    return v + step if up else v - step


def _feature_meta(ds: Dataset, z: ImportanceVector, j: int, neighbourhood: Neighbourhood) -> FeatureMeta:
    meta = ds.features[j]
    if neighbourhood is Neighbourhood.LOCAL and z.neighborhood_std is not None:
        return meta.with_std(z.neighborhood_std[j])
    if neighbourhood is Neighbourhood.LOCAL_WEIGHTED and z.weighted_neighborhood_std is not None:
        return meta.with_std(z.weighted_neighborhood_std[j])
    return meta


def _observe(m: Predictor, x: np.ndarray, j: int, meta: FeatureMeta, alt: Alt, p0: float,
             expected: Exp, delta: float, mode: Mode, rng) -> AlterationRecord:
    if not mode.stochastic:
        v = perturb(meta, float(x[j]), alt, mode)
        xa = x.copy()
        xa[j] = v
        p1 = m.predict_proba(xa)
        return AlterationRecord(alt, v, expected, classify_direction(p0, p1, delta), p0, p1)

    draws = []
    for _ in range(mode.votes):
        v = perturb(meta, float(x[j]), alt, mode, rng)
        xa = x.copy()
        xa[j] = v
        p1 = m.predict_proba(xa)
        draws.append((v, p1, classify_direction(p0, p1, delta)))
    tally = Counter(label for _, _, label in draws).most_common()
    if len(tally) > 1 and tally[0][1] == tally[1][1]:
        # tied vote: fall back to the mean response of all draws
        observed = classify_direction(p0, float(np.mean([p for _, p, _ in draws])), delta)
    else:
        observed = tally[0][0]
    voters = [(v, p) for v, p, label in draws if label is observed] or [(v, p) for v, p, _ in draws]
    v_mean = float(np.mean([v for v, _ in voters]))
    p_mean = float(np.mean([p for _, p in voters]))
    return AlterationRecord(alt, v_mean, expected, observed, p0, p_mean)


def investigate(
    m: Predictor,
    z: ImportanceVector,
    x=None,
    ds: Dataset | None = None,
    delta: float = DEFAULT_DELTA,
    mode: Mode = DETERMINISTIC,
    neighbourhood: Neighbourhood | str = Neighbourhood.TRAINING,
    zeta: float = DEFAULT_ZETA,
    features=None,
    delta_scope: str = "all",
) -> TruthReport:
    """Run the two alteration tests on each feature (or on ``features`` only).

    Deterministic mode issues exactly one baseline query plus two per tested feature.
    The neutrality band is taken from ``z.neutral_band`` when set, otherwise
    ``zeta`` times the largest |z_j|. With ``delta_scope="neutral"`` the
    tolerance only applies to neutral importances; signed ones are read from the
    bare sign of the change, so saturated probabilities still count as moving.
    """
    if delta_scope not in ("all", "neutral"):
        raise ContractError(f"unknown delta scope {delta_scope!r}")
    if ds is None:
        raise ContractError("a dataset is needed for perturbation statistics")
    if delta < 0:
        raise ContractError("delta must be non-negative")
    x = as_instance(z.instance if x is None else x, ds.n_features)
    if len(z) != ds.n_features or m.n_features != ds.n_features:
        raise ContractError("model, importance vector and dataset disagree on the number of features")
    neighbourhood = Neighbourhood(neighbourhood)
    band = z.neutral_band if z.neutral_band is not None else neutral_band(z.values, zeta)
    features = range(ds.n_features) if features is None else sorted(features)

    rng = np.random.default_rng(mode.seed) if mode.stochastic else None
    p0 = m.predict_proba(x)
    evidence = []
    for j in features:
        imp = classify_importance(float(z.values[j]), band)
        meta = _feature_meta(ds, z, j, neighbourhood)
        tol = delta if delta_scope == "all" or imp is Imp.NEUTRAL else 0.0
        inc, dec = (
            _observe(m, x, j, meta, alt, p0, EXPECTATION[imp][alt], tol, mode, rng)
            for alt in (Alt.INCREASING, Alt.DECREASING)
        )
        evidence.append(FeatureEvidence(j, ds.features[j].name, float(z.values[j]), imp, inc, dec))
    return TruthReport(z.technique, tuple(evidence), delta, band, mode.name, delta_scope)
