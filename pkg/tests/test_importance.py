import numpy as np
import pytest
from oracles import brute_force_shapley, exact_permutation_scores

from fitruth.datamodel import Dataset
from fitruth.errors import ContractError, UnsupportedError
from fitruth.importance import (
    ImportanceVector,
    intrinsic_linear,
    kernel_shap_like,
    lime_like,
    permutation_importance,
    permutation_scores,
    shapley_kernel_weight,
)
from fitruth.models import ClassView, FunctionPredictor, LinearModel, MlpModel


def gaussian_data(seed, n_rows=200, n_features=4):
    rng = np.random.default_rng(seed)
    return Dataset.from_arrays(rng.normal(size=(n_rows, n_features)), labels=rng.integers(0, 2, n_rows))


def random_mlp(rng, n):
    return MlpModel([(rng.normal(size=(n, 5)), rng.normal(size=5)), (rng.normal(size=(5, 1)), rng.normal(size=1))])


# intrinsic

def test_intrinsic_reads_coefficients():
    z = intrinsic_linear(LinearModel([2.0, -1.0, 0.0], 0.3), [5.0, 5.0, 5.0])
    assert z.values.tolist() == [2.0, -1.0, 0.0]
    assert z.technique == "intrinsic"


def test_intrinsic_product_and_negative_class():
    m = LinearModel([2.0, -1.0], 0.0)
    assert intrinsic_linear(m, [3.0, 2.0], product=True).values.tolist() == [6.0, -2.0]
    assert intrinsic_linear(ClassView(m, 0), [3.0, 2.0]).values.tolist() == [-2.0, 1.0]


def test_intrinsic_needs_linear_model():
    with pytest.raises(UnsupportedError):
        intrinsic_linear(FunctionPredictor(lambda x: 0.5, 1), [0.0])


# permutation

def test_permutation_ignores_unused_feature():
    X = gaussian_data(0).rows
    m = LinearModel([1.5, 0.0, -0.7, 0.0])
    ds = Dataset.from_arrays(X, labels=(m.predict_proba_batch(X) >= 0.5).astype(int))
    scores = permutation_scores(m, ds, repeats=5, seed=1)
    assert scores[1] == 0.0 and scores[3] == 0.0
    assert scores[0] > scores[2] > 0.0


def test_permutation_matches_exhaustive_average():
    X = np.array([[0.0, 1.0], [1.0, 0.5], [2.0, 0.0], [3.0, 2.0]])
    y = np.array([0, 0, 1, 1])
    ds = Dataset.from_arrays(X, labels=y)
    f = LinearModel([2.0, 0.5], -3.0)
    exact = exact_permutation_scores(lambda r: f._forward(r[None, :])[0], X, y)
    est = permutation_scores(f, ds, repeats=6000, seed=2)
    np.testing.assert_allclose(est, exact, rtol=0.05)


def test_permutation_sign_follows_local_slope():
    ds = gaussian_data(1)
    z = permutation_importance(LinearModel([1.0, -1.0, 0.5, 0.0]), ds, ds.instance(0), repeats=3, seed=0)
    assert np.sign(z.values).tolist() == [1.0, -1.0, 1.0, 0.0]
    assert len(z.details["raw_scores"]) == 4


def test_permutation_repeats_checked():
    ds = gaussian_data(0)
    with pytest.raises(ContractError):
        permutation_scores(LinearModel(np.ones(4)), ds, repeats=0)
    with pytest.raises(ContractError):
        permutation_importance(LinearModel(np.ones(4)), ds, ds.instance(0), repeats=0)


# LIME-like surrogate

def test_lime_recovers_linear_signs():
    hits = 0
    for k in range(100):
        rng = np.random.default_rng(k)
        n = int(rng.integers(2, 9))
        ds = Dataset.from_arrays(rng.normal(size=(200, n)))
        w = rng.uniform(0.2, 1.5, size=n) * rng.choice([-1, 1], size=n)
        z = lime_like(LinearModel(w), ds, ds.instance(int(rng.integers(200))), seed=k)
        hits += bool(np.all(np.sign(z.values) == np.sign(w)))
    assert hits >= 95


def test_lime_constant_model_gives_zero():
    ds = gaussian_data(2)
    z = lime_like(FunctionPredictor(lambda x: 0.3, 4), ds, ds.instance(3), n_samples=200)
    np.testing.assert_allclose(z.values, 0.0, atol=1e-12)


def test_lime_is_seeded():
    ds = gaussian_data(3)
    m = LinearModel([1.0, -2.0, 0.5, 0.1])
    a = lime_like(m, ds, ds.instance(0), seed=7)
    b = lime_like(m, ds, ds.instance(0), seed=7)
    assert np.array_equal(a.values, b.values)
    assert a.neighborhood_std.shape == (4,) and a.weighted_neighborhood_std.shape == (4,)


def test_lime_argument_checks():
    ds = gaussian_data(3)
    m = LinearModel(np.ones(4))
    with pytest.raises(ContractError):
        lime_like(m, ds, ds.instance(0), n_samples=3)
    with pytest.raises(ContractError):
        lime_like(m, ds, ds.instance(0), kernel_width=0.0)


# kernel-SHAP-like

def test_kernel_weight_formula():
    assert shapley_kernel_weight(4, 1) == pytest.approx(3 / (4 * 1 * 3))
    assert shapley_kernel_weight(4, 2) == pytest.approx(3 / (6 * 2 * 2))


@pytest.mark.parametrize("seed", range(5))
def test_exhaustive_shap_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    ds = gaussian_data(seed, n_features=n)
    m = random_mlp(rng, n)
    x = ds.instance(0)
    phi = kernel_shap_like(m, ds, x, exhaustive=True).values
    oracle = brute_force_shapley(lambda v: m._forward(v[None, :])[0], x, ds.means)
    np.testing.assert_allclose(phi, oracle, atol=1e-6)


def test_shap_of_linear_function_is_exact():
    ds = gaussian_data(4)
    w = np.array([0.1, -0.05, 0.02, 0.0])
    m = FunctionPredictor(lambda v: 0.5 + w @ v, 4)
    x = ds.instance(5)
    np.testing.assert_allclose(kernel_shap_like(m, ds, x).values, w * (x - ds.means), atol=1e-12)


def test_shap_near_linear_is_proportional():
    ds = gaussian_data(5)
    w = np.array([0.02, -0.03, 0.04, 0.01])
    m = LinearModel(w)
    x = ds.instance(9)
    phi = kernel_shap_like(m, ds, x).values
    ratio = phi / (w * (x - ds.means))
    assert np.all(np.abs(ratio / ratio.mean() - 1) < 0.10)


def test_shap_constant_model_and_efficiency():
    ds = gaussian_data(6, n_features=6)
    x = ds.instance(1)
    np.testing.assert_allclose(kernel_shap_like(FunctionPredictor(lambda v: 0.4, 6), ds, x).values, 0.0, atol=1e-12)
    m = random_mlp(np.random.default_rng(6), 6)
    for kwargs in ({}, {"n_coalitions": 20, "exhaustive": False}):
        z = kernel_shap_like(m, ds, x, seed=3, **kwargs)
        assert z.values.sum() == pytest.approx(z.baseline_probability - z.details["null_probability"], abs=1e-12)


def test_shap_single_feature_and_budget():
    ds = Dataset.from_arrays([[0.0], [2.0]])
    m = LinearModel([1.0])
    z = kernel_shap_like(m, ds, [2.0])
    assert z.values[0] == pytest.approx(m.predict_proba([2.0]) - m.predict_proba([1.0]), abs=1e-15)
    two = Dataset.from_arrays([[0.0, 1.0], [2.0, 3.0]])
    assert kernel_shap_like(LinearModel([1.0, 1.0]), two, [2.0, 3.0]).details["coalitions"] == 2
    with pytest.raises(ContractError):
        kernel_shap_like(LinearModel(np.ones(4)), gaussian_data(0), np.zeros(4), n_coalitions=3)


# importance vectors

def test_vector_round_trip_and_import():
    z = ImportanceVector("lime", [0.5, -0.1], [1.0, 2.0], 0.7, excluded=(False, True), neutral_band=1e-7)
    again = ImportanceVector.from_dict(z.to_dict())
    assert again.values.tolist() == [0.5, -0.1]
    assert again.excluded == (False, True)
    assert again.kept == [0]
    ext = ImportanceVector.from_dict({"technique": "shap-lib", "z": [0.1], "baseline": 0.4}, instance=[3.0])
    assert ext.instance.tolist() == [3.0]
    with pytest.raises(ContractError):
        ImportanceVector.from_dict({"technique": "t", "z": [0.1], "baseline": 0.4})
    with pytest.raises(ContractError):
        ImportanceVector("t", [0.1, 0.2], [1.0], 0.5)
