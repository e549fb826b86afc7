import warnings

import numpy as np
import pytest
from conftest import evidence, step_dataset, step_model
from scipy.special import expit

from fitruth.argumentation import Judgement
from fitruth.config import Config
from fitruth.datamodel import Dataset
from fitruth.errors import ContractError
from fitruth.importance import ImportanceVector
from fitruth.investigator import Imp, Mode, TruthReport, investigate
from fitruth.models import FunctionPredictor, LinearModel
from fitruth.selector import evaluate_instance, reduce, reexamine, select_best

NAMES = ["variance", "skew", "curtosis", "entropy"]


def bump_scenario():
    """Monotone in the first three features, peaked in entropy at the instance."""
    rng = np.random.default_rng(0)
    X = rng.normal(size=(300, 4))
    ds = Dataset.from_arrays(X, NAMES, labels=(X[:, 0] - X[:, 1] > 0).astype(int))
    m = FunctionPredictor(lambda v: float(expit(0.8 * v[0] - 0.8 * v[1] + 0.5 * v[2] + 1.5 - 3 * v[3] ** 2)), 4)
    return m, ds, np.array([0.3, -0.2, 0.1, 0.0])


def test_reduce_without_untruthful_is_identity():
    z = ImportanceVector("t", [0.4, -0.2], [1.0, 1.0], 0.5)
    report = TruthReport("t", (evidence(0, Imp.POSITIVE), evidence(1, Imp.NEGATIVE)))
    reduced = reduce(report, z)
    assert reduced.values.tolist() == [0.4, -0.2]
    assert reduced.kept == [0, 1]


def test_reduce_zeroes_and_flags():
    z = ImportanceVector("t", [0.4, -0.2], [1.0, 1.0], 0.5)
    report = TruthReport("t", (evidence(0, Imp.POSITIVE, inc_ok=False), evidence(1, Imp.NEGATIVE)))
    reduced = reduce(report, z)
    assert reduced.values.tolist() == [0.0, -0.2]
    assert reduced.excluded == (True, False)
    with pytest.raises(ContractError):
        reduce(report, ImportanceVector("other", [0.4, -0.2], [1.0, 1.0], 0.5))


def test_every_feature_excluded_gives_empty_interpretation():
    ds = step_dataset()
    m = step_model()
    z = ImportanceVector("t", [0.5], [1.0], 0.7)
    reduced = reduce(investigate(m, z, ds=ds), z)
    with pytest.warns(RuntimeWarning):
        again = reexamine(m, reduced, [1.0], ds)
    assert again.empty and again.judgement is Judgement.UNWARRANTED and again.tree is None


def test_reexamine_keeps_only_truthful_features():
    ds = Dataset.from_arrays(np.random.default_rng(0).normal(size=(50, 3)))
    m = LinearModel([1.0, -1.0, 0.5])
    x = ds.instance(0)
    z = ImportanceVector("t", [1.0, 1.0, 0.5], x, 0.5)  # feature 1 has the wrong sign
    reduced = reduce(investigate(m, z, ds=ds), z)
    assert reduced.kept == [0, 2]
    before = m.query_count
    again = reexamine(m, reduced, x, ds)
    assert m.query_count - before == 1 + 2 * 2
    assert again.report.features == [0, 2]
    assert again.judgement is Judgement.UNWARRANTED


def test_stochastic_reexamination_records_seed():
    ds = Dataset.from_arrays(np.random.default_rng(0).normal(size=(50, 2)))
    m = LinearModel([1.0, -1.0])
    z = ImportanceVector("t", [1.0, -1.0], ds.instance(0), 0.5)
    a = reexamine(m, z, ds.instance(0), ds, mode=Mode(True, 3))
    b = reexamine(m, z, ds.instance(0), ds, mode=Mode(True, 3))
    assert a.seed == b.seed is not None
    assert a.report.to_dict() == b.report.to_dict()


def test_select_best_prefers_fewest_then_priority():
    assert select_best({"lime": 2, "kernel_shap": 1, "permutation": 3}) == "kernel_shap"
    counts = {"lime": 1, "kernel_shap": 2, "permutation": 1}
    assert select_best(counts, ["permutation", "kernel_shap", "lime"]) == "permutation"
    assert select_best(counts, ["lime"]) == "lime"
    assert select_best({"b": 0, "a": 0}) == "b"
    with pytest.raises(ContractError):
        select_best({})


def test_peaked_entropy_is_excluded_and_permutation_chosen():
    m, ds, x = bump_scenario()
    config = Config(priority=("permutation", "kernel_shap", "lime"))
    result = evaluate_instance(m, ["lime", "kernel_shap", "permutation"], x, ds, config)
    assert result.untruthful_counts == {"lime": 1, "kernel_shap": 2, "permutation": 1}
    assert result.chosen_technique == "permutation"
    assert 3 in result.reports["permutation"].untruthful
    assert result.truthful_features == [0, 1, 2]
    assert result.reduced_importance.values[3] == 0.0
    assert result.judgements["permutation"] is Judgement.WARRANTED
    assert result.final_judgement is Judgement.UNWARRANTED
    assert not result.empty_interpretation
    assert len(result.justification) == 3 + 4 * 3


def test_evaluate_instance_argument_checks():
    m, ds, x = bump_scenario()
    with pytest.raises(ContractError):
        evaluate_instance(m, [], x, ds)
    with pytest.raises(ContractError):
        evaluate_instance(m, ["bogus"], x, ds)
    with pytest.raises(ContractError):
        evaluate_instance(LinearModel([1.0]), ["lime"], x, ds)


def test_target_class_choice_flips_intrinsic_signs():
    ds = Dataset.from_arrays(np.random.default_rng(0).normal(size=(40, 2)))
    m = LinearModel([1.0, -1.0], -3.0)
    x = ds.instance(0)
    pos = evaluate_instance(m, ["intrinsic"], x, ds)
    neg = evaluate_instance(m, ["intrinsic"], x, ds, Config(target_class="negative"))
    pred = evaluate_instance(m, ["intrinsic"], x, ds, Config(target_class="predicted"))
    assert pos.target_class == 1 and neg.target_class == 0
    assert pred.target_class == m.predicted_class(x)
    assert neg.importances["intrinsic"].values.tolist() == [-1.0, 1.0]


def test_result_serialises_and_is_deterministic():
    m, ds, x = bump_scenario()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a = evaluate_instance(m, ["lime", "permutation"], x, ds, Config(seed=5)).to_dict()
    b = evaluate_instance(m, ["lime", "permutation"], x, ds, Config(seed=5)).to_dict()
    assert a == b
    assert a["chosen_technique"] in ("lime", "permutation")
