"""Independent reference computations used by the tests."""

import itertools
from math import factorial

import numpy as np


def brute_force_shapley(f, x, background):
    """Exact Shapley values of v(S) = f(x on S, background elsewhere), by permutation averaging."""
    x = np.asarray(x, dtype=float)
    background = np.asarray(background, dtype=float)
    n = x.shape[0]
    phi = np.zeros(n)
    for order in itertools.permutations(range(n)):
        z = background.copy()
        prev = f(z)
        for j in order:
            z[j] = x[j]
            cur = f(z)
            phi[j] += cur - prev
            prev = cur
    return phi / factorial(n)


def log_loss(p, y):
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def exact_permutation_scores(f, X, y):
    """Log-loss increase averaged over every row permutation of each column."""
    X = np.asarray(X, dtype=float)
    base = log_loss(np.array([f(r) for r in X]), y)
    scores = []
    for j in range(X.shape[1]):
        total, count = 0.0, 0
        for perm in itertools.permutations(range(X.shape[0])):
            Xp = X.copy()
            Xp[:, j] = X[list(perm), j]
            total += log_loss(np.array([f(r) for r in Xp]), y) - base
            count += 1
        scores.append(total / count)
    return np.array(scores)


def marks_by_definition(children):
    """U/D marks from the fixed-point definition, by trying every labeling.

    ``children`` maps node index to a list of child indices.
    Returns every consistent labeling as a tuple of "U"/"D".
    """
    n = len(children)
    out = []
    for bits in itertools.product("UD", repeat=n):
        if all((bits[i] == "D") == any(bits[c] == "U" for c in children[i]) for i in range(n)):
            out.append(bits)
    return out
