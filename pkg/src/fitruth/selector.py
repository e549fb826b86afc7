"""Maximum truthful interpretation and choice among several techniques.

Untruthful importances are zeroed and flagged, the remaining features are
re-tested, and among several techniques the one with the fewest untruthful
features wins (ties go to the earlier technique in the priority order).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .argumentation import (
    ArgumentTree,
    Judgement,
    Turn,
    build_tree,
    judge,
    mark,
    render_dialogue,
    tree_to_dict,
)
from .config import Config, derive_seed
from .datamodel import Dataset, as_instance
from .errors import ContractError
from .importance import (
    TECHNIQUES,
    ImportanceVector,
    intrinsic_linear,
    kernel_shap_like,
    lime_like,
    permutation_importance,
)
from .investigator import DEFAULT_DELTA, DETERMINISTIC, Mode, Neighbourhood, TruthReport, investigate
from .models import Predictor, for_class


def reduce(report: TruthReport, z: ImportanceVector) -> ImportanceVector:
    """Zero and flag every untruthful entry; keep the band used to classify the rest."""
    if report.technique != z.technique:
        raise ContractError(f"report is for {report.technique!r}, vector for {z.technique!r}")
    if set(report.features) - set(range(len(z))):
        raise ContractError("report and importance vector disagree on the features")
    bad = report.untruthful
    values = np.array([0.0 if j in bad else v for j, v in enumerate(z.values)])
    excluded = tuple(gone or j in bad for j, gone in enumerate(z.excluded))
    return z.with_values(values, excluded=excluded, neutral_band=report.neutral_band)


@dataclass(frozen=True)
class Reexamination:
    judgement: Judgement
    report: TruthReport | None
    tree: ArgumentTree | None
    empty: bool = False
    seed: int | None = None


def reexamine(
    m: Predictor,
    reduced: ImportanceVector,
    x,
    ds: Dataset,
    delta: float = DEFAULT_DELTA,
    mode: Mode = DETERMINISTIC,
    neighbourhood: Neighbourhood | str = Neighbourhood.TRAINING,
    delta_scope: str = "all",
) -> Reexamination:
    """Re-test only the kept features and judge the rebuilt tree.

    Stochastic runs draw from a seed derived from the mode's seed, so they
    may disagree with the first pass; ``seed`` records which one was used.
    """
    kept = reduced.kept
    if not kept:
        warnings.warn("every importance was excluded; the interpretation is empty", RuntimeWarning)
        return Reexamination(Judgement.UNWARRANTED, None, None, empty=True)
    seed = None
    if mode.stochastic:
        seed = derive_seed(mode.seed, "reexamine")
        mode = Mode(True, seed, mode.votes)
    report = investigate(m, reduced, x, ds, delta, mode, neighbourhood, features=kept, delta_scope=delta_scope)
    tree = mark(build_tree(report))
    return Reexamination(judge(tree), report, tree, seed=seed)


def select_best(results: Sequence[tuple[str, TruthReport]] | Mapping[str, int],
                priority: Sequence[str] = ()) -> str:
    """Technique with the fewest untruthful features; ties follow ``priority``, then input order."""
    if isinstance(results, Mapping):
        counts = list(results.items())
    else:
        counts = [(name, len(report.untruthful)) for name, report in results]
    if not counts:
        raise ContractError("no candidate techniques")
    order = {name: i for i, name in enumerate(priority)}
    ranked = sorted(
        enumerate(counts),
        key=lambda item: (item[1][1], order.get(item[1][0], len(order)), item[0]),
    )
    return ranked[0][1][0]


def resolve_target(m: Predictor, x: np.ndarray, target: str) -> int:
    if target == "positive":
        return 1
    if target == "negative":
        return 0
    if target == "predicted":
        return m.predicted_class(x)
    raise ContractError(f"unknown target class {target!r}")


def compute_importance(name: str, m: Predictor, ds: Dataset, x: np.ndarray, config: Config, seed: int,
                       pi_scores: np.ndarray | None = None) -> ImportanceVector:
    if name == "intrinsic":
        return intrinsic_linear(m, x, product=config.intrinsic_product)
    if name == "permutation":
        return permutation_importance(m, ds, x, config.pi_repeats, seed, scores=pi_scores)
    if name == "lime":
        return lime_like(m, ds, x, config.lime_samples, config.kernel_width, seed, config.ridge)
    if name == "kernel_shap":
        return kernel_shap_like(m, ds, x, config.shap_coalitions, seed, ridge=config.ridge)
    raise ContractError(f"unknown technique {name!r}; choose from {', '.join(TECHNIQUES)}")


@dataclass
class EvaluationResult:
    chosen_technique: str
    reduced_importance: ImportanceVector
    importances: dict[str, ImportanceVector]
    reports: dict[str, TruthReport]
    judgements: dict[str, Judgement]
    trees: dict[str, ArgumentTree]
    final_judgement: Judgement
    final_tree: ArgumentTree | None
    final_report: TruthReport | None
    justification: list[Turn]
    exclusion_dialogue: list[Turn]
    empty_interpretation: bool
    target_class: int
    feature_names: list[str] = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    @property
    def untruthful_counts(self) -> dict[str, int]:
        return {name: len(r.untruthful) for name, r in self.reports.items()}

    @property
    def truthful_features(self) -> list[int]:
        return self.reduced_importance.kept

    def to_dict(self) -> dict:
        return {
            "chosen_technique": self.chosen_technique,
            "target_class": self.target_class,
            "feature_names": self.feature_names,
            "reduced_importance": self.reduced_importance.to_dict(),
            "truthful_features": self.truthful_features,
            "untruthful_counts": self.untruthful_counts,
            "final_judgement": self.final_judgement.value,
            "empty_interpretation": self.empty_interpretation,
            "techniques": {
                name: {
                    "importance": self.importances[name].to_dict(),
                    "report": self.reports[name].to_dict(),
                    "judgement": self.judgements[name].value,
                    "tree": tree_to_dict(self.trees[name]),
                }
                for name in self.reports
            },
            "final_report": None if self.final_report is None else self.final_report.to_dict(),
            "final_tree": None if self.final_tree is None else tree_to_dict(self.final_tree),
            "dialogue": [t.to_dict() for t in self.justification],
            "exclusion_dialogue": [t.to_dict() for t in self.exclusion_dialogue],
            "settings": self.settings,
        }


def evaluate_instance(m: Predictor, techniques: Sequence[str], x, ds: Dataset,
                      config: Config | None = None,
                      pi_scores: Mapping[str, np.ndarray] | None = None) -> EvaluationResult:
    """Explain ``x`` with every technique, test each, keep the most truthful one, reduce and re-check."""
    config = config or Config()
    if not techniques:
        raise ContractError("at least one technique is required")
    for name in techniques:
        if name not in TECHNIQUES:
            raise ContractError(f"unknown technique {name!r}; choose from {', '.join(TECHNIQUES)}")
    x = as_instance(x, ds.n_features)
    if m.n_features != ds.n_features:
        raise ContractError("model and dataset disagree on the number of features")

    target = resolve_target(m, x, config.target_class)
    tracked = for_class(m, target)
    neighbourhood = Neighbourhood(config.neighbourhood)

    importances, reports, judgements, trees = {}, {}, {}, {}
    for name in techniques:
        z = compute_importance(name, tracked, ds, x, config, derive_seed(config.seed, "technique", name),
                               None if pi_scores is None else pi_scores.get(name))
        mode = Mode.parse(config.mode, derive_seed(config.seed, "investigate", name), config.votes)
        report = investigate(tracked, z, x, ds, config.delta, mode, neighbourhood, config.zeta,
                             delta_scope=config.delta_scope)
        tree = mark(build_tree(report))
        importances[name], reports[name], trees[name], judgements[name] = z, report, tree, judge(tree)

    chosen = select_best([(n, reports[n]) for n in techniques], config.priority)
    reduced = reduce(reports[chosen], importances[chosen])
    mode = Mode.parse(config.mode, derive_seed(config.seed, "investigate", chosen), config.votes)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        again = reexamine(tracked, reduced, x, ds, config.delta, mode, neighbourhood, config.delta_scope)

    exclusion = render_dialogue(trees[chosen], reports[chosen])
    justification = exclusion if again.tree is None else render_dialogue(again.tree, again.report)
    return EvaluationResult(
        chosen_technique=chosen,
        reduced_importance=reduced,
        importances=importances,
        reports=reports,
        judgements=judgements,
        trees=trees,
        final_judgement=again.judgement,
        final_tree=again.tree,
        final_report=again.report,
        justification=justification,
        exclusion_dialogue=exclusion,
        empty_interpretation=again.empty,
        target_class=target,
        feature_names=ds.feature_names,
        settings={
            "delta": config.delta, "delta_scope": config.delta_scope, "mode": config.mode,
            "neighbourhood": config.neighbourhood,
            "seed": config.seed, "priority": list(config.priority), "zeta": config.zeta,
            "reexamine_seed": again.seed,
        },
    )
