"""Regenerate the bundled banknote-style dataset (src/fitruth/data/banknote_style.csv).

Four continuous features whose marginal means, spreads and pairwise
correlations follow the public banknote-authentication data; the label comes
from a mostly-linear score with a mild quadratic term and logistic noise.
1372 rows, seed 1372.
"""

from pathlib import Path

import numpy as np

NAMES = ["variance", "skew", "curtosis", "entropy"]
MEAN = np.array([0.434, 1.922, 1.398, -1.192])
STD = np.array([2.843, 5.869, 4.310, 2.101])
CORR = np.array([
    [1.00, 0.26, -0.38, 0.28],
    [0.26, 1.00, -0.79, -0.53],
    [-0.38, -0.79, 1.00, 0.32],
    [0.28, -0.53, 0.32, 1.00],
])


def generate(n=1372, seed=1372):
    rng = np.random.default_rng(seed)
    cov = CORR * np.outer(STD, STD)
    X = rng.multivariate_normal(MEAN, cov, size=n)
    zs = (X - MEAN) / STD
    score = -3.0 * zs[:, 0] - 1.7 * zs[:, 1] - 1.9 * zs[:, 2] + 0.2 * zs[:, 3] + 0.3 * (zs[:, 0] ** 2 - 1) - 0.25
    y = (score + rng.logistic(scale=0.1, size=n) > 0).astype(int)
    return np.round(X, 5), y


def main():
    X, y = generate()
    out = Path(__file__).resolve().parents[1] / "src" / "fitruth" / "data"
    with open(out / "banknote_style.csv", "w") as fh:
        fh.write(",".join(NAMES + ["class"]) + "\n")
        for row, label in zip(X, y):
            fh.write(",".join(f"{v:.5f}" for v in row) + f",{label}\n")
    (out / "banknote_style.schema").write_text("".join(f"{n} = continuous\n" for n in NAMES) + "class = label\n")


if __name__ == "__main__":
    main()
