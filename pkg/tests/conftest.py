from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from mrlens.corpus import (
    Approval,
    CommitInfo,
    Corpus,
    FileChange,
    MergeRequestRecord,
    Note,
)

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


def make_record(
    mr_id: int = 1,
    project_id: int = 10,
    title: str = "add parser cache",
    description: str = "speeds up repeated parses",
    state: str = "merged",
    created_at: datetime = T0,
    merged_after_hours: float | None = 24.0,
    files: tuple[FileChange, ...] | None = None,
    commits: tuple[CommitInfo, ...] | None = None,
    notes: tuple[Note, ...] = (),
    approvals: tuple[Approval, ...] = (),
    reviewers: tuple[int, ...] = (),
    assignees: tuple[int, ...] = (),
    labels: tuple[str, ...] = (),
    author: int = 7,
    draft: bool = False,
    source_branch: str = "feature/cache",
    target_branch: str = "main",
    milestone_id: int | None = None,
) -> MergeRequestRecord:
    if files is None:
        files = (FileChange(path="src/parser.py", additions=30, deletions=10),)
    if commits is None:
        commits = (
            CommitInfo(
                sha=f"sha-{mr_id}-1",
                message="add parser cache",
                author=author,
                committed_at=created_at - timedelta(hours=1),
            ),
        )
    merged_at = None
    if state == "merged":
        merged_at = created_at + timedelta(hours=merged_after_hours or 0.0)
    record = MergeRequestRecord(
        id=mr_id,
        project_id=project_id,
        title=title,
        description=description,
        state=state,
        created_at=created_at,
        merged_at=merged_at,
        source_branch=source_branch,
        target_branch=target_branch,
        labels=labels,
        is_draft_flag=draft,
        commits=commits,
        file_changes=files,
        notes=notes,
        reviewers=reviewers,
        assignees=assignees,
        approvals=approvals,
        author=author,
        milestone_id=milestone_id,
        web_url=f"https://forge.example/p{project_id}/-/merge_requests/{mr_id}",
    )
    record.validate()
    return record


def make_corpus(records) -> Corpus:
    corpus = Corpus(
        host="https://forge.example",
        group="test",
        records=tuple(records),
        fetched_at=T0 + timedelta(days=365),
    )
    corpus.validate()
    return corpus


@pytest.fixture
def single_record() -> MergeRequestRecord:
    return make_record()


@pytest.fixture
def small_corpus() -> Corpus:
    records = [
        make_record(mr_id=i, created_at=T0 + timedelta(hours=6 * i))
        for i in range(1, 13)
    ]
    return make_corpus(records)
