import numpy as np
import pytest

from fitruth.cli import bundled_data
from fitruth.datamodel import Dataset, load_dataset
from fitruth.investigator import EXPECTATION, Alt, AlterationRecord, Exp, FeatureEvidence, Imp, TruthReport
from fitruth.models import FunctionPredictor


@pytest.fixture(scope="session")
def banknote():
    data, schema = bundled_data()
    return load_dataset(data, schema)


def step_model(threshold=1.0, above=0.85, below=0.7):
    """One-feature predictor: ``above`` when x > threshold, else ``below``."""
    return FunctionPredictor(lambda x: above if x[0] > threshold else below, 1)


def step_dataset():
    # std = sqrt(2/3) ~ 0.816, so from x = 1 the up-step crosses the threshold
    return Dataset.from_arrays([[0.0], [1.0], [2.0]], ["f1"], labels=[0, 1, 1])


def lookup_model(table, default):
    """Predictor answering from {rounded tuple(x): p}, else ``default``."""
    def fn(x):
        return table.get(tuple(np.round(x, 6)), default)
    return fn


_OPPOSITE = {Exp.INCREASING: Exp.DECREASING, Exp.DECREASING: Exp.INCREASING, Exp.STABLE: Exp.INCREASING}


def evidence(j, imp, inc_ok=True, dec_ok=True, name=None, value=1.0):
    imp = Imp(imp)
    recs = []
    for alt, ok in ((Alt.INCREASING, inc_ok), (Alt.DECREASING, dec_ok)):
        exp = EXPECTATION[imp][alt]
        obs = exp if ok else _OPPOSITE[exp]
        recs.append(AlterationRecord(alt, 0.0, exp, obs, 0.5, 0.5))
    return FeatureEvidence(j, name or f"f{j}", value, imp, *recs)


def random_report(rng, max_features=10):
    n = int(rng.integers(1, max_features + 1))
    evs = []
    for j in range(n):
        imp = list(Imp)[int(rng.integers(3))]
        evs.append(evidence(j, imp, bool(rng.random() < 0.8), bool(rng.random() < 0.8)))
    return TruthReport("random", tuple(evs))
