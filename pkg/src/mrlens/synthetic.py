"""Synthetic corpora with known ground truth.

Three generators: a rule-injection corpus where every deviation satisfies
exactly one detector rule, a completion-time scenario where deviation MRs
carry targets from an unrelated distribution, and a two-population scenario
for the deviations-vs-regular comparison. Each is deterministic per seed and
returns its injection manifest alongside the corpus.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np

from .corpus import (
    Approval,
    CommitInfo,
    Corpus,
    FileChange,
    MergeRequestRecord,
    Note,
)
from .taxonomy import NORMAL_LABEL

EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)

_CODE_PATHS = (
    "src/core/engine.py",
    "src/core/scheduler.py",
    "src/net/transport.c",
    "src/net/session.c",
    "lib/parser/tokens.py",
    "lib/util/strings.py",
)

_TITLE_WORDS = (
    "add", "fix", "improve", "support", "handle", "extend", "refactor",
    "route", "cache", "metric", "session", "retry", "parser", "timeout",
)


def _title(rng: np.random.Generator, length: int | None = None) -> str:
    words = list(rng.choice(_TITLE_WORDS, size=6))
    text = " ".join(words)
    if length is not None:
        while len(text) < length:
            text += " " + str(rng.choice(_TITLE_WORDS))
        text = text[:length]
    return text


def _base_record(
    rng: np.random.Generator,
    mr_id: int,
    project_id: int,
    created: datetime,
    title: str,
    files: tuple[FileChange, ...],
    merged_after_hours: float | None,
    author: int,
    description: str = "routine change",
    commit_messages: tuple[str, ...] | None = None,
    n_commits: int = 1,
    draft: bool = False,
    labels: tuple[str, ...] = (),
    with_review: bool = False,
) -> MergeRequestRecord:
    messages = commit_messages or tuple(
        f"{_title(rng)} part {i + 1}" for i in range(n_commits)
    )
    commits = tuple(
        CommitInfo(
            sha=f"c{mr_id:06d}{i:03d}",
            message=messages[i % len(messages)],
            author=author,
            committed_at=created - timedelta(hours=2) + timedelta(minutes=i),
        )
        for i in range(n_commits)
    )
    merged_at = (
        created + timedelta(hours=merged_after_hours)
        if merged_after_hours is not None
        else None
    )
    notes: tuple[Note, ...] = ()
    approvals: tuple[Approval, ...] = ()
    reviewers: tuple[int, ...] = ()
    if with_review and merged_at is not None:
        reviewer = author + 100
        reviewers = (reviewer,)
        notes = (
            Note(
                author=reviewer,
                body="looks good with a nit",
                created_at=created + (merged_at - created) / 3,
            ),
        )
        approvals = (
            Approval(author=reviewer, approved_at=created + (merged_at - created) / 2),
        )
    return MergeRequestRecord(
        id=mr_id,
        project_id=project_id,
        title=title,
        description=description,
        state="merged" if merged_at is not None else "open",
        created_at=created,
        merged_at=merged_at,
        source_branch=f"feature/topic-{mr_id % 17}",
        target_branch="main",
        labels=labels,
        is_draft_flag=draft,
        commits=commits,
        file_changes=files,
        notes=notes,
        reviewers=reviewers,
        assignees=reviewers,
        approvals=approvals,
        author=author,
        web_url=f"https://forge.example/proj{project_id}/-/merge_requests/{mr_id}",
    )


def _normal_files(rng: np.random.Generator, churn: int) -> tuple[FileChange, ...]:
    n_files = int(rng.integers(1, 4))
    paths = rng.choice(len(_CODE_PATHS), size=n_files, replace=False)
    adds_total = max(1, int(churn * 0.7))
    dels_total = churn - adds_total
    files = []
    for k, pi in enumerate(paths):
        share = 1.0 / n_files
        files.append(
            FileChange(
                path=_CODE_PATHS[pi],
                additions=max(1, int(adds_total * share)),
                deletions=max(0, int(dels_total * share)),
            )
        )
    return tuple(files)


def _deviation_record(
    rng: np.random.Generator,
    category: str,
    mr_id: int,
    project_id: int,
    created: datetime,
    merged_after_hours: float | None,
    author: int,
) -> MergeRequestRecord:
    if category == "ECS":
        return _base_record(
            rng, mr_id, project_id, created, "sync branch state", (),
            merged_after_hours, author, description="no changes ended up here",
        )
    if category == "HC":
        files = (
            FileChange(path="src/core/engine.py", additions=8000, deletions=2500),
            FileChange(path="src/net/transport.c", additions=1500, deletions=500),
        )
        return _base_record(
            rng, mr_id, project_id, created, "restructure module layout", files,
            merged_after_hours, author, n_commits=6,
        )
    if category == "RC":
        files = (FileChange(path="src/core/engine.py", additions=12, deletions=12),)
        return _base_record(
            rng, mr_id, project_id, created, 'Revert "add retry cache"', files,
            merged_after_hours, author,
            commit_messages=('Revert "add retry cache"',),
        )
    if category == "EOW":
        files = (FileChange(path="src/core/scheduler.py", additions=40, deletions=8),)
        return _base_record(
            rng, mr_id, project_id, created, "Draft: try new scheduler", files,
            merged_after_hours, author, draft=True,
        )
    if category == "LU":
        files = (FileChange(path="package-lock.json", additions=2, deletions=2),)
        return _base_record(
            rng, mr_id, project_id, created, "bump transitive dependencies", files,
            merged_after_hours, author,
            commit_messages=("bump transitive dependencies",),
        )
    if category == "BOCA":
        files = (FileChange(path=".gitlab-ci.yml", additions=15, deletions=4),)
        return _base_record(
            rng, mr_id, project_id, created, "tune pipeline caching", files,
            merged_after_hours, author,
        )
    if category == "CC":
        files = (
            FileChange(path="lib/util/strings.py", additions=0, deletions=180),
            FileChange(path="lib/parser/tokens.py", additions=0, deletions=60),
        )
        return _base_record(
            rng, mr_id, project_id, created, "drop unused string helpers", files,
            merged_after_hours, author,
        )
    if category == "DU":
        files = (FileChange(path="docs/usage.md", additions=30, deletions=5),)
        return _base_record(
            rng, mr_id, project_id, created, "clarify usage guide", files,
            merged_after_hours, author,
        )
    raise ValueError(f"unknown category {category}")


def injected_corpus(
    seed: int = 11,
    n_normal: int = 700,
    n_per_category: int = 50,
    categories: tuple[str, ...] = ("ECS", "HC", "RC", "EOW", "LU", "BOCA", "CC"),
    project_id: int = 101,
) -> tuple[Corpus, dict[str, int]]:
    """Corpus where each deviation satisfies exactly its own rule; returns the
    corpus and the manifest of injected counts (NORMAL included)."""
    rng = np.random.default_rng(seed)
    records: list[MergeRequestRecord] = []
    mr_id = 0
    labels: list[str] = [NORMAL_LABEL] * n_normal
    for cat in categories:
        labels.extend([cat] * n_per_category)
    for label in labels:
        mr_id += 1
        created = EPOCH + timedelta(hours=mr_id * 3)
        merged_after = float(rng.uniform(4, 120)) if rng.random() < 0.8 else None
        author = int(rng.integers(1, 25))
        if label == NORMAL_LABEL:
            churn = int(rng.integers(30, 400))
            rec = _base_record(
                rng, mr_id, project_id, created,
                _title(rng), _normal_files(rng, churn), merged_after, author,
                description=f"implements item #{mr_id}",
                n_commits=int(rng.integers(1, 5)),
                with_review=True,
            )
        else:
            rec = _deviation_record(
                rng, label, mr_id, project_id, created, merged_after, author
            )
        records.append(rec)
    manifest = {NORMAL_LABEL: n_normal}
    for cat in categories:
        manifest[cat] = manifest.get(cat, 0) + n_per_category
    corpus = Corpus(
        host="https://forge.example",
        group="synthetic",
        records=tuple(records),
        fetched_at=EPOCH + timedelta(days=400),
    )
    corpus.validate()
    return corpus, manifest


def impact_scenario(
    seed: int = 23,
    n: int = 2000,
    deviation_rate: float = 0.25,
    project_id: int = 202,
) -> tuple[Corpus, dict[str, int]]:
    """Merged-MR corpus where normal completion time follows churn and title
    length while deviation MRs draw their completion time from an unrelated
    wide distribution."""
    rng = np.random.default_rng(seed)
    records: list[MergeRequestRecord] = []
    n_dev = 0
    for i in range(1, n + 1):
        created = EPOCH + timedelta(hours=i * 2.0)
        author = int(rng.integers(1, 40))
        if rng.random() < deviation_rate:
            n_dev += 1
            category = ("LU", "EOW", "CC")[i % 3]
            hours = float(rng.uniform(0.05, 500.0))
            rec = _deviation_record(
                rng, category, i, project_id, created, hours, author
            )
        else:
            churn = int(np.exp(rng.uniform(np.log(10), np.log(2000))))
            title_len = int(rng.integers(12, 90))
            noise = float(rng.normal(0, 1.5))
            hours = max(0.05, 1.0 + churn * 0.04 + title_len * 0.25 + noise)
            rec = _base_record(
                rng, i, project_id, created,
                _title(rng, length=title_len), _normal_files(rng, churn),
                hours, author,
                description=f"change set {i} touching {churn} lines",
                n_commits=int(rng.integers(1, 5)),
                with_review=True,
            )
        records.append(rec)
    corpus = Corpus(
        host="https://forge.example",
        group="impact-scenario",
        records=tuple(records),
        fetched_at=EPOCH + timedelta(days=500),
    )
    corpus.validate()
    return corpus, {"normal": n - n_dev, "deviation": n_dev}


def split_scenario(
    seed: int = 31,
    n: int = 600,
    same_generator: bool = False,
    project_id: int = 303,
) -> tuple[Corpus, set[int]]:
    """Two-population corpus for the deviations-vs-regular comparison.

    With `same_generator`, both populations are drawn from one record and
    target process and only the membership set differs (a null scenario).
    Otherwise deviation MRs are cleanup-style records whose completion time
    tracks churn, while regular MRs' completion time tracks title length.
    Returns the corpus and the deviation member ids.
    """
    rng = np.random.default_rng(seed)
    records: list[MergeRequestRecord] = []
    dev_ids: set[int] = set()
    for i in range(1, n + 1):
        created = EPOCH + timedelta(hours=i * 2.5)
        author = int(rng.integers(1, 30))
        churn = int(np.exp(rng.uniform(np.log(10), np.log(1500))))
        title_len = int(rng.integers(12, 90))
        noise = float(rng.normal(0, 1.0))
        is_dev = i % 2 == 0
        if is_dev:
            dev_ids.add(i)
        # In the null variant both populations share a two-factor law so the
        # importance ranking has a stable head in either arm.
        churn_law = max(0.05, 1.0 + churn * 0.05 + title_len * 0.3 + noise)
        title_law = max(0.05, 1.0 + title_len * 0.6 + noise)
        if same_generator or not is_dev:
            hours = churn_law if same_generator else title_law
            rec = _base_record(
                rng, i, project_id, created, _title(rng, length=title_len),
                _normal_files(rng, churn), hours, author,
                description=f"feature work {i}", with_review=True,
            )
        else:
            files = (
                FileChange(path="lib/util/strings.py", additions=0, deletions=max(1, churn)),
            )
            rec = _base_record(
                rng, i, project_id, created, _title(rng, length=title_len),
                files, churn_law, author, description="cleanup batch",
            )
        records.append(rec)
    corpus = Corpus(
        host="https://forge.example",
        group="split-scenario",
        records=tuple(records),
        fetched_at=EPOCH + timedelta(days=500),
    )
    corpus.validate()
    return corpus, dev_ids
