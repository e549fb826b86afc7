"""Mean percentage of untruthful importances per (model, technique), plus the per-instance best."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .config import Config, derive_seed
from .datamodel import Dataset
from .errors import ContractError
from .importance import permutation_scores
from .models import ClassView, LinearModel, Predictor, for_class
from .selector import evaluate_instance, resolve_target

ENSEMBLE = "Ensemble"


@dataclass
class BenchmarkSummary:
    techniques: list[str]
    percentages: dict[str, dict[str, float]]  # model -> technique -> mean %
    ensemble: dict[str, float]
    instance_count: int
    instances: list[int]
    seed: int
    delta: float
    delta_scope: str = "all"
    per_instance: dict[str, list[dict]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "techniques": self.techniques,
            "ensemble_column": ENSEMBLE,
            "rows": [
                {"model": model, "percentages": cols, "ensemble": self.ensemble[model]}
                for model, cols in self.percentages.items()
            ],
            "instance_count": self.instance_count,
            "instances": self.instances,
            "seed": self.seed,
            "delta": self.delta,
            "delta_scope": self.delta_scope,
            "per_instance": self.per_instance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def format_table(self) -> str:
        cols = self.techniques + [ENSEMBLE]
        width = max(10, *(len(c) + 2 for c in cols))
        name_w = max(8, *(len(m) + 2 for m in self.percentages))
        lines = ["model".ljust(name_w) + "".join(c.rjust(width) for c in cols)]
        for model, row in self.percentages.items():
            cells = [f"{row[t]:.2f}%" if t in row else "-" for t in self.techniques]
            cells.append(f"{self.ensemble[model]:.2f}%")
            lines.append(model.ljust(name_w) + "".join(c.rjust(width) for c in cells))
        lines.append(f"({self.instance_count} instances, seed {self.seed}, delta {self.delta}, scope {self.delta_scope})")
        return "\n".join(lines) + "\n"


def _applicable(technique: str, model: Predictor) -> bool:
    return technique != "intrinsic" or isinstance(model, LinearModel)


def sample_instances(ds: Dataset, size: int, seed: int) -> list[int]:
    if size < 1:
        raise ContractError("sample size must be at least 1")
    size = min(size, ds.n_rows)
    rng = np.random.default_rng(derive_seed(seed, "sample"))
    return sorted(int(i) for i in rng.choice(ds.n_rows, size=size, replace=False))


def run_benchmark(models: Mapping[str, Predictor], ds: Dataset, techniques: Sequence[str], sample_size: int,
                  seed: int = 0, config: Config | None = None, jobs: int = 1) -> BenchmarkSummary:
    config = (config or Config()).updated(seed=seed)
    if not models:
        raise ContractError("at least one model is required")
    if not techniques:
        raise ContractError("at least one technique is required")
    instances = sample_instances(ds, sample_size, seed)
    n_features = ds.n_features

    percentages, ensemble, per_instance = {}, {}, {}
    for model_name in sorted(models):
        model = models[model_name]
        used = [t for t in techniques if _applicable(t, model)]
        if not used:
            raise ContractError(f"no requested technique applies to model {model_name!r}")
        pi = {}
        if "permutation" in used and config.target_class != "predicted":
            tracked = for_class(model, 1 if config.target_class == "positive" else 0)
            pi["permutation"] = permutation_scores(
                tracked, ds, config.pi_repeats, derive_seed(seed, "technique", "permutation"))

        def one(idx: int) -> dict:
            x = ds.instance(idx)
            cfg = config.updated(seed=derive_seed(seed, "instance", idx))
            scores = pi
            if not scores and "permutation" in used:
                target = resolve_target(model, x, cfg.target_class)
                scores = {"permutation": permutation_scores(
                    ClassView(model, target) if target == 0 else model, ds, cfg.pi_repeats,
                    derive_seed(seed, "technique", "permutation", target))}
            result = evaluate_instance(model, used, x, ds, cfg, scores)
            counts = result.untruthful_counts
            return {
                "instance": idx,
                "untruthful": counts,
                "chosen": result.chosen_technique,
                "best_count": counts[result.chosen_technique],
            }

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(one, instances))
        else:
            rows = [one(i) for i in instances]
        rows.sort(key=lambda r: r["instance"])

        percentages[model_name] = {
            t: float(np.mean([100.0 * r["untruthful"][t] / n_features for r in rows])) for t in used
        }
        ensemble[model_name] = float(np.mean([100.0 * r["best_count"] / n_features for r in rows]))
        per_instance[model_name] = rows

    return BenchmarkSummary(list(techniques), percentages, ensemble, len(instances), instances,
                            seed, config.delta, config.delta_scope, per_instance)
