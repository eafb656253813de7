"""Arm-versus-arm experiment: how excluding deviation MRs changes completion
time models, in performance and in interpretation.

Both arms share derived per-iteration seeds, so identical arms produce
identical per-iteration results and the whole report is reproducible
byte-for-byte from (corpus, verdicts, config).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, MergeRequestRecord
from .ensembles import (
    EnsembleSpec,
    EvalMetrics,
    eval_metrics,
    impurity_importance,
    permutation_importance,
    train,
)
from .errors import DataValidationError, InsufficientDataError
from .features import (
    completion_matrix,
    completion_time,
    extract_completion_features,
    history_defaults,
    normalize_target,
)
from .stats import (
    EffectSizeLabel,
    RankTable,
    RemovalLogEntry,
    WilcoxonResult,
    bootstrap_split,
    cliffs_delta,
    correlation_filter,
    improvement_factor,
    kendall_tau,
    midranks,
    redundancy_filter,
    scott_knott_esd,
    topk_overlap,
    wilcoxon_signed_rank,
)
from .taxonomy import DeviationVerdict

ARM_WITH = "with_deviations"
ARM_WITHOUT = "without_deviations"
ARM_DEVIATIONS = "deviations_only"
ARM_REGULAR = "regular_only"

MIN_OOB_ROWS = 10


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


@dataclass(frozen=True)
class ImpactConfig:
    n_boot: int = 20
    seed: int = 7
    corr_threshold: float = 0.70
    r2_threshold: float = 0.90
    min_arm_size: int = 50
    n_trees: int = 100
    min_leaf: int = 5
    learning_rate: float = 0.1
    model_kinds: tuple[str, ...] = (
        "bagged_random_trees",
        "extra_random_trees",
        "gradient_boosted_trees",
    )
    importance: str = "permutation"  # or "impurity"
    importance_repeats: int = 5


@dataclass(frozen=True)
class BootstrapRun:
    iteration: int
    arm: str
    kind: str
    metrics: EvalMetrics
    importances: np.ndarray


@dataclass
class KindOutcome:
    kind: str
    runs: list[BootstrapRun] = field(default_factory=list)
    median: EvalMetrics | None = None
    rank_table: RankTable | None = None

    def metric_vector(self, name: str) -> np.ndarray:
        return np.array([getattr(r.metrics, name) for r in self.runs])


@dataclass
class ArmOutcome:
    arm: str
    n_rows: int
    features: tuple[str, ...]
    removal_log: list[RemovalLogEntry]
    per_kind: dict[str, KindOutcome]


@dataclass(frozen=True)
class MetricComparison:
    ratio: float
    effect: EffectSizeLabel
    wilcoxon: WilcoxonResult


@dataclass(frozen=True)
class ImpactRow:
    project_id: int
    kind: str
    mse: MetricComparison | None
    mae: MetricComparison | None
    sa: MetricComparison | None
    kendall: EffectSizeLabel
    t1: EffectSizeLabel
    t3: EffectSizeLabel
    t5: EffectSizeLabel
    common_features: tuple[str, ...]


@dataclass
class ProjectImpact:
    project_id: int
    arm_a: ArmOutcome
    arm_b: ArmOutcome
    rows: list[ImpactRow]


@dataclass
class ImpactReport:
    mode: str  # "exclude" or "split"
    config: ImpactConfig
    projects: list[ProjectImpact]

    def all_rows(self) -> list[ImpactRow]:
        return [row for proj in self.projects for row in proj.rows]


def _usable_records(corpus: Corpus, project_id: int) -> list[MergeRequestRecord]:
    recs = [r for r in corpus.for_project(project_id) if r.state == "merged"]
    return sorted(recs, key=lambda r: r.id)


def _split_with_min_oob(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    # Re-derive deterministically until the out-of-bag side can support
    # evaluation and permutation importance.
    for attempt in range(1000):
        train_idx, oob = bootstrap_split(n, derive_seed(seed, attempt))
        if len(oob) >= MIN_OOB_ROWS:
            return train_idx, oob
    raise InsufficientDataError(
        f"cannot draw a bootstrap split of {n} rows with "
        f">= {MIN_OOB_ROWS} out-of-bag rows"
    )


def _extract_once(
    records: list[MergeRequestRecord], corpus: Corpus, defaults
) -> dict[int, tuple]:
    """Completion features depend on project history, not on arm membership,
    so they are computed once per project and shared across arms."""
    return {
        r.id: (extract_completion_features(r, corpus, defaults), completion_time(r))
        for r in records
    }


def _run_arm(
    arm: str,
    records: list[MergeRequestRecord],
    extracted: dict[int, tuple],
    config: ImpactConfig,
) -> ArmOutcome:
    if len(records) < config.min_arm_size:
        raise InsufficientDataError(
            f"arm {arm!r} has {len(records)} usable MRs; "
            f"need at least {config.min_arm_size}"
        )
    vectors = [extracted[r.id][0] for r in records]
    hours = [extracted[r.id][1] for r in records]
    values, _ = normalize_target(hours)
    y = np.array([v.normalized for v in values])
    fm = completion_matrix(vectors)

    kept, log1 = correlation_filter(list(fm.names), fm.X, config.corr_threshold)
    sub = fm.select(kept)
    kept2, log2 = redundancy_filter(list(sub.names), sub.X, config.r2_threshold)
    fm = fm.select(kept2)
    removal_log = log1 + log2

    outcome = ArmOutcome(
        arm=arm,
        n_rows=len(records),
        features=tuple(kept2),
        removal_log=removal_log,
        per_kind={k: KindOutcome(kind=k) for k in config.model_kinds},
    )
    p = len(kept2)
    for it in range(config.n_boot):
        iteration_seed = config.seed + it
        train_idx, oob = _split_with_min_oob(len(records), iteration_seed)
        X_train, y_train = fm.X[train_idx], y[train_idx]
        X_oob, y_oob = fm.X[oob], y[oob]
        for kind_idx, kind in enumerate(config.model_kinds):
            spec = EnsembleSpec(
                kind=kind,
                n_trees=config.n_trees,
                min_leaf=config.min_leaf,
                learning_rate=config.learning_rate,
                seed=derive_seed(iteration_seed, kind_idx, 1),
            )
            model = train(spec, X_train, y_train)
            pred = model.predict(X_oob)
            metrics = eval_metrics(
                y_oob, pred, y_train, seed=derive_seed(iteration_seed, kind_idx, 2)
            )
            if config.importance == "impurity":
                imp = impurity_importance(model)
            else:
                imp = permutation_importance(
                    model,
                    X_oob,
                    y_oob,
                    seed=derive_seed(iteration_seed, kind_idx, 3),
                    n_repeats=config.importance_repeats,
                )
            outcome.per_kind[kind].runs.append(
                BootstrapRun(
                    iteration=it, arm=arm, kind=kind, metrics=metrics, importances=imp
                )
            )

    for kind in config.model_kinds:
        ko = outcome.per_kind[kind]
        ko.median = EvalMetrics(
            mse=float(np.median(ko.metric_vector("mse"))),
            mae=float(np.median(ko.metric_vector("mae"))),
            sa=float(np.median(ko.metric_vector("sa"))),
        )
        # Per-iteration importance ranks (1 = most important), fed to
        # Scott-Knott ESD as "rank points" so higher still means better.
        points = np.empty((config.n_boot, p))
        for i, run in enumerate(ko.runs):
            points[i] = p + 1 - midranks(-run.importances)
        groups = {name: points[:, j] for j, name in enumerate(kept2)}
        ko.rank_table = scott_knott_esd(groups)
    return outcome


def _compare_arms(
    project_id: int,
    arm_a: ArmOutcome,
    arm_b: ArmOutcome,
    config: ImpactConfig,
    with_performance: bool,
) -> list[ImpactRow]:
    """arm_a is the baseline (kept deviations / deviations-only); arm_b the
    treated arm (without deviations / regular-only)."""
    rows: list[ImpactRow] = []
    common = sorted(set(arm_a.features) & set(arm_b.features))
    for kind in config.model_kinds:
        ka, kb = arm_a.per_kind[kind], arm_b.per_kind[kind]
        comparisons: dict[str, MetricComparison | None] = {}
        for metric, direction in (
            ("mse", "lower_better"),
            ("mae", "lower_better"),
            ("sa", "higher_better"),
        ):
            if not with_performance:
                comparisons[metric] = None
                continue
            vec_a, vec_b = ka.metric_vector(metric), kb.metric_vector(metric)
            ratio = improvement_factor(
                getattr(kb.median, metric), getattr(ka.median, metric), direction
            )
            comparisons[metric] = MetricComparison(
                ratio=ratio,
                effect=cliffs_delta(vec_b, vec_a),
                wilcoxon=wilcoxon_signed_rank(vec_b, vec_a),
            )
        ta = ka.rank_table.restricted_to(set(common))
        tb = kb.rank_table.restricted_to(set(common))
        rows.append(
            ImpactRow(
                project_id=project_id,
                kind=kind,
                mse=comparisons["mse"],
                mae=comparisons["mae"],
                sa=comparisons["sa"],
                kendall=kendall_tau(ta, tb),
                t1=topk_overlap(ta, tb, 1),
                t3=topk_overlap(ta, tb, 3),
                t5=topk_overlap(ta, tb, 5),
                common_features=tuple(common),
            )
        )
    return rows


def _verdict_map(
    verdicts: list[DeviationVerdict], records: list[MergeRequestRecord]
) -> dict[int, DeviationVerdict]:
    vmap = {v.mr_id: v for v in verdicts}
    uncovered = [r.id for r in records if r.id not in vmap]
    if uncovered:
        raise DataValidationError(
            f"verdicts do not cover the corpus; missing MRs {uncovered[:5]}"
            + ("..." if len(uncovered) > 5 else "")
        )
    return vmap


def run_impact(
    corpus: Corpus, verdicts: list[DeviationVerdict], config: ImpactConfig
) -> ImpactReport:
    """Full-set versus deviation-free models over paired bootstraps."""
    defaults = history_defaults(corpus)
    projects: list[ProjectImpact] = []
    for pid in corpus.project_ids:
        usable = _usable_records(corpus, pid)
        vmap = _verdict_map(verdicts, usable)
        extracted = _extract_once(usable, corpus, defaults)
        with_arm = _run_arm(ARM_WITH, usable, extracted, config)
        regular = [r for r in usable if not vmap[r.id].is_deviation]
        without_arm = _run_arm(ARM_WITHOUT, regular, extracted, config)
        rows = _compare_arms(pid, with_arm, without_arm, config, with_performance=True)
        projects.append(
            ProjectImpact(project_id=pid, arm_a=with_arm, arm_b=without_arm, rows=rows)
        )
    return ImpactReport(mode="exclude", config=config, projects=projects)


def run_deviation_vs_regular(
    corpus: Corpus, verdicts: list[DeviationVerdict], config: ImpactConfig
) -> ImpactReport:
    """Interpretation-only comparison of deviation-trained vs regular-trained
    models; performance ratios are omitted (the populations differ)."""
    defaults = history_defaults(corpus)
    projects: list[ProjectImpact] = []
    for pid in corpus.project_ids:
        usable = _usable_records(corpus, pid)
        vmap = _verdict_map(verdicts, usable)
        extracted = _extract_once(usable, corpus, defaults)
        dev_ids = {r.id for r in usable if vmap[r.id].is_deviation}
        deviations = [r for r in usable if r.id in dev_ids]
        regular = [r for r in usable if r.id not in dev_ids]
        dev_arm = _run_arm(ARM_DEVIATIONS, deviations, extracted, config)
        reg_arm = _run_arm(ARM_REGULAR, regular, extracted, config)
        rows = _compare_arms(pid, dev_arm, reg_arm, config, with_performance=False)
        projects.append(
            ProjectImpact(project_id=pid, arm_a=dev_arm, arm_b=reg_arm, rows=rows)
        )
    return ImpactReport(mode="split", config=config, projects=projects)
