"""The deviation taxonomy and its deterministic rule-based detector.

Eight categories are known; Documentation Updates (DU) is an opt-in extra
that only some ecosystems exhibit, so it ships disabled. Every threshold and
path list is configurable; the defaults below are the calibrated ones.
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass, field, replace
from enum import Enum

from .corpus import Corpus, MergeRequestRecord
from .errors import DataValidationError
from .features import DeviationFeatureVector


class DeviationCategory(str, Enum):
    ECS = "ECS"  # empty change set
    HC = "HC"  # huge changes
    RC = "RC"  # revert commits
    EOW = "EOW"  # experimental / work in progress
    LU = "LU"  # library update
    BOCA = "BOCA"  # build or configuration adjustments
    CC = "CC"  # code cleaning
    DU = "DU"  # documentation updates (opt-in)


CATEGORY_DEFINITIONS: dict[DeviationCategory, str] = {
    DeviationCategory.EOW: "experimentation or early-stage work, drafts and WIP",
    DeviationCategory.CC: "removal of outdated or unused code without new functionality",
    DeviationCategory.LU: "dependency or library version bumps only",
    DeviationCategory.BOCA: "CI/CD, build-script, or environment configuration changes only",
    DeviationCategory.RC: "rollbacks that restore an earlier codebase state",
    DeviationCategory.HC: "bulk changes too large for line-by-line review",
    DeviationCategory.ECS: "no actual modifications",
    DeviationCategory.DU: "documentation or translation updates with no review activity",
}

# Evaluation order doubles as the priority order for the primary label.
PRIORITY_ORDER: tuple[DeviationCategory, ...] = (
    DeviationCategory.ECS,
    DeviationCategory.HC,
    DeviationCategory.RC,
    DeviationCategory.EOW,
    DeviationCategory.LU,
    DeviationCategory.BOCA,
    DeviationCategory.CC,
    DeviationCategory.DU,
)

NORMAL_LABEL = "NORMAL"

DEFAULT_MANIFEST_GLOBS = (
    "package-lock.json",
    "npm-shrinkwrap.json",
    "yarn.lock",
    "pnpm-lock.yaml",
    "package.json",
    "requirements*.txt",
    "Pipfile",
    "Pipfile.lock",
    "poetry.lock",
    "pyproject.toml",
    "setup.py",
    "Gemfile",
    "Gemfile.lock",
    "go.mod",
    "go.sum",
    "Cargo.toml",
    "Cargo.lock",
    "composer.json",
    "composer.lock",
    "pom.xml",
    "build.gradle",
    "build.gradle.kts",
    "gradle.properties",
    "*.csproj",
    "mix.lock",
)

DEFAULT_BUILD_GLOBS = (
    ".gitlab-ci.yml",
    ".gitlab/*",
    ".github/*",
    "Jenkinsfile",
    "Dockerfile",
    "Dockerfile.*",
    "docker-compose*.yml",
    "docker-compose*.yaml",
    ".dockerignore",
    "Makefile",
    "makefile",
    "*.mk",
    "CMakeLists.txt",
    "*.cmake",
    ".circleci/*",
    "ci/*",
    ".ci/*",
    "helm/*",
    "charts/*",
    "kubernetes/*",
    "k8s/*",
    "deploy/*",
    "*.jenkinsfile",
    ".pre-commit-config.yaml",
    "tox.ini",
    ".editorconfig",
    ".gitignore",
)

DEFAULT_DOCS_GLOBS = (
    "docs/*",
    "doc/*",
    "*.md",
    "*.rst",
    "*.adoc",
    "*.txt",
    "po/*",
    "*.po",
    "*.pot",
    "locale/*",
    "locales/*",
    "translations/*",
    "i18n/*",
)

DEFAULT_WIP_TITLE_PREFIXES = ("draft:", "wip", "[wip]")
DEFAULT_WIP_LABELS = ("wip", "work in progress", "draft")
DEFAULT_REVERT_PREFIXES = ("revert",)


@dataclass(frozen=True)
class RuleConfig:
    hc_commit_threshold: int = 500
    hc_churn_threshold: int = 10_000
    cc_dominance_ratio: float = 0.1
    lu_churn_cap: int = 20
    wip_title_prefixes: tuple[str, ...] = DEFAULT_WIP_TITLE_PREFIXES
    wip_labels: tuple[str, ...] = DEFAULT_WIP_LABELS
    revert_prefixes: tuple[str, ...] = DEFAULT_REVERT_PREFIXES
    manifest_globs: tuple[str, ...] = DEFAULT_MANIFEST_GLOBS
    build_globs: tuple[str, ...] = DEFAULT_BUILD_GLOBS
    docs_globs: tuple[str, ...] = DEFAULT_DOCS_GLOBS
    enable_du: bool = False

    def with_du(self, enabled: bool) -> "RuleConfig":
        return replace(self, enable_du=enabled)


@dataclass(frozen=True)
class DeviationVerdict:
    mr_id: int
    matched: tuple[tuple[DeviationCategory, str], ...]
    primary: DeviationCategory | None
    is_deviation: bool

    @property
    def label(self) -> str:
        return self.primary.value if self.primary else NORMAL_LABEL


def _path_matches(path: str, globs: tuple[str, ...]) -> bool:
    basename = path.rsplit("/", 1)[-1]
    for pattern in globs:
        if "/" in pattern:
            # Directory-style patterns match at the root or anywhere below.
            if fnmatch.fnmatch(path, pattern) or fnmatch.fnmatch(path, f"*/{pattern}"):
                return True
        elif fnmatch.fnmatch(basename, pattern):
            return True
    return False


def _all_paths_match(record: MergeRequestRecord, globs: tuple[str, ...]) -> bool:
    if not record.file_changes:
        return False
    return all(_path_matches(fc.path, globs) for fc in record.file_changes)


def _starts_with_any(text: str, prefixes: tuple[str, ...]) -> bool:
    lowered = text.strip().lower()
    return any(lowered.startswith(p) for p in prefixes)


def no_review_activity(record: MergeRequestRecord) -> bool:
    """True when nobody engaged: no non-author human comments, no approvals,
    and no reviewer or assignee set."""
    for note in record.notes:
        if not note.is_system and note.author != record.author:
            return False
    return not record.approvals and not record.reviewers and not record.assignees


def detect_deviation(
    features: DeviationFeatureVector,
    record: MergeRequestRecord,
    rules: RuleConfig | None = None,
) -> DeviationVerdict:
    """Evaluate every enabled rule and return the matches in priority order.

    The primary label is the highest-priority match; evidence strings record
    which observation fired each rule.
    """
    rules = rules or RuleConfig()
    matched: list[tuple[DeviationCategory, str]] = []

    for category in PRIORITY_ORDER:
        if category is DeviationCategory.ECS:
            if not record.file_changes:
                matched.append((category, "no file changes"))
            elif features.additions == 0 and features.deletions == 0:
                matched.append((category, "zero added and zero deleted lines"))
        elif category is DeviationCategory.HC:
            if features.n_commits > rules.hc_commit_threshold:
                matched.append(
                    (category, f"{features.n_commits} commits > {rules.hc_commit_threshold}")
                )
            elif features.code_churn >= rules.hc_churn_threshold:
                matched.append(
                    (category, f"churn {features.code_churn} >= {rules.hc_churn_threshold}")
                )
        elif category is DeviationCategory.RC:
            title_revert = _starts_with_any(record.title, rules.revert_prefixes)
            all_commits_revert = bool(record.commits) and all(
                _starts_with_any(c.message, rules.revert_prefixes) for c in record.commits
            )
            if title_revert:
                matched.append((category, "revert marker in title"))
            elif all_commits_revert:
                matched.append((category, "every commit message is a revert"))
        elif category is DeviationCategory.EOW:
            if record.is_draft_flag:
                matched.append((category, "draft flag set"))
            elif _starts_with_any(record.title, rules.wip_title_prefixes):
                matched.append((category, "WIP marker in title"))
            elif any(lbl.lower() in rules.wip_labels for lbl in record.labels):
                matched.append((category, "WIP label"))
        elif category is DeviationCategory.LU:
            if (
                _all_paths_match(record, rules.manifest_globs)
                and features.code_churn <= rules.lu_churn_cap
            ):
                matched.append(
                    (category, f"only dependency manifests, churn {features.code_churn}")
                )
        elif category is DeviationCategory.BOCA:
            if _all_paths_match(record, rules.build_globs):
                matched.append((category, "only build/CI/configuration paths"))
        elif category is DeviationCategory.CC:
            no_new_files = not any(fc.is_new_file for fc in record.file_changes)
            if (
                features.deletions > 0
                and features.additions <= rules.cc_dominance_ratio * features.deletions
                and no_new_files
            ):
                matched.append(
                    (category, f"deletions dominate ({features.deletions} vs {features.additions})")
                )
        elif category is DeviationCategory.DU:
            if (
                rules.enable_du
                and _all_paths_match(record, rules.docs_globs)
                and no_review_activity(record)
            ):
                matched.append((category, "only documentation paths and no review activity"))

    primary = matched[0][0] if matched else None
    return DeviationVerdict(
        mr_id=record.id,
        matched=tuple(matched),
        primary=primary,
        is_deviation=bool(matched),
    )


def detect_corpus(
    corpus: Corpus, rules: RuleConfig | None = None
) -> list[DeviationVerdict]:
    from .features import extract_deviation_features

    rules = rules or RuleConfig()
    return [
        detect_deviation(extract_deviation_features(r), r, rules)
        for r in corpus.records
    ]


@dataclass(frozen=True)
class ProjectPrevalence:
    project_id: int
    n_mrs: int
    n_deviations: int
    deviation_pct: float
    category_shares: dict[str, float] = field(default_factory=dict)


def prevalence_report(
    verdicts: list[DeviationVerdict], corpus: Corpus
) -> list[ProjectPrevalence]:
    """Per-project deviation rate and per-category share of deviations.

    Shares are percentages of that project's deviations (summing to 100 when
    any exist); requires exactly one verdict per corpus record.
    """
    by_id = {v.mr_id: v for v in verdicts}
    corpus_ids = {r.id for r in corpus.records}
    if set(by_id) != corpus_ids or len(verdicts) != len(corpus.records):
        raise DataValidationError(
            "verdicts do not match the corpus: one verdict per record required"
        )
    out: list[ProjectPrevalence] = []
    for pid in corpus.project_ids:
        recs = corpus.for_project(pid)
        dev_labels = [by_id[r.id].primary for r in recs if by_id[r.id].is_deviation]
        n_dev = len(dev_labels)
        shares: dict[str, float] = {}
        if n_dev:
            for cat in PRIORITY_ORDER:
                count = sum(1 for c in dev_labels if c is cat)
                if count:
                    shares[cat.value] = 100.0 * count / n_dev
        out.append(
            ProjectPrevalence(
                project_id=pid,
                n_mrs=len(recs),
                n_deviations=n_dev,
                deviation_pct=100.0 * n_dev / len(recs) if recs else 0.0,
                category_shares=shares,
            )
        )
    return out
