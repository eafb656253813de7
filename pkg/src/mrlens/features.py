"""Feature extraction: per-MR deviation signals, creation-time completion
predictors, and the regression target.

Completion features are leakage-safe by construction: nothing about the focal
MR that happened after its creation instant (notes, approvals, merge, later
commits) may influence the vector.
"""

from __future__ import annotations

import math
import re
from bisect import bisect_left
from dataclasses import dataclass, fields
from datetime import datetime
from typing import Sequence

import numpy as np

from .corpus import Corpus, MergeRequestRecord
from .errors import DomainError, NotApplicableError

HOUR = 3600.0

_HASHTAG_RE = re.compile(r"#\w")
_AT_TAG_RE = re.compile(r"@\w")

MAJOR_CONTRIBUTOR_SHARE = 0.05


def hours_between(start: datetime, end: datetime) -> float:
    return (end - start).total_seconds() / HOUR


@dataclass(frozen=True)
class DeviationFeatureVector:
    """The per-MR signals an annotator (or rule) looks at to spot deviations."""

    mr_id: int
    title: str
    description: str
    file_types: frozenset[str]
    code_churn: int
    additions: int
    deletions: int
    review_duration: float | None
    reviewer_participation: int
    n_commits: int
    n_committers: int
    source_branch: str
    target_branch: str
    commit_messages: tuple[str, ...]
    n_comments: int
    comment_messages: tuple[str, ...]
    labels: tuple[str, ...]
    n_reviewers: int
    reviewer_comments: tuple[str, ...]
    time_to_first_review: float | None


@dataclass(frozen=True)
class CompletionFeatureVector:
    """Creation-time predictors of review completion time."""

    mr_id: int
    delta_time: float
    associated_sprint: int
    n_committers: int
    has_assignee: bool
    n_authored_commits: int
    n_committed_commits: int
    change_churn: int
    additions: int
    deletions: int
    title_length: int
    description_length: int
    is_hashtag: bool
    is_at_tag: bool
    source_branch_open_mrs: int
    source_branch_avg_approval_hours: float
    target_branch_open_mrs: int
    target_branch_avg_approval_hours: float
    n_major_contributors: int
    n_minor_contributors: int
    n_mrs_without_discussion: int
    n_self_approved_mrs: int
    n_open_mrs_history: int
    avg_historical_approval_hours: float
    historical_entropy: float
    historical_mr_size: float
    n_initial_files: int


COMPLETION_FEATURE_NAMES: tuple[str, ...] = tuple(
    f.name for f in fields(CompletionFeatureVector) if f.name != "mr_id"
)


def file_extension(path: str) -> str:
    name = path.rsplit("/", 1)[-1]
    if "." in name[1:]:
        return "." + name.rsplit(".", 1)[-1].lower()
    return ""


def extract_deviation_features(record: MergeRequestRecord) -> DeviationFeatureVector:
    additions = sum(fc.additions for fc in record.file_changes)
    deletions = sum(fc.deletions for fc in record.file_changes)
    human_notes = [n for n in record.notes if not n.is_system]
    reviewer_notes = [n for n in human_notes if n.author != record.author]
    participants = {n.author for n in reviewer_notes}
    participants.update(a.author for a in record.approvals if a.author != record.author)

    review_duration = None
    if record.merged_at is not None:
        review_duration = hours_between(record.created_at, record.merged_at)
    first_review = None
    if reviewer_notes:
        first_review = hours_between(
            record.created_at, min(n.created_at for n in reviewer_notes)
        )

    return DeviationFeatureVector(
        mr_id=record.id,
        title=record.title,
        description=record.description,
        file_types=frozenset(file_extension(fc.path) for fc in record.file_changes),
        code_churn=additions + deletions,
        additions=additions,
        deletions=deletions,
        review_duration=review_duration,
        reviewer_participation=len(participants),
        n_commits=len(record.commits),
        n_committers=len({c.author for c in record.commits}),
        source_branch=record.source_branch,
        target_branch=record.target_branch,
        commit_messages=tuple(c.message for c in record.commits),
        n_comments=len(human_notes),
        comment_messages=tuple(n.body for n in human_notes),
        labels=record.labels,
        n_reviewers=len(record.reviewers),
        reviewer_comments=tuple(n.body for n in reviewer_notes),
        time_to_first_review=first_review,
    )


def completion_time(record: MergeRequestRecord) -> float:
    """Hours from creation to merge; only defined for merged MRs."""
    if record.state != "merged" or record.merged_at is None:
        raise NotApplicableError(f"mr {record.id} is not merged")
    return hours_between(record.created_at, record.merged_at)


def historical_entropy(prior_changes: Sequence[tuple[str, int]]) -> float:
    """Normalized Shannon entropy of churn shares across distinct files.

    H = -sum(p_i * log2 p_i) / log2(n); degenerate inputs (one file or zero
    total churn) give 0.
    """
    per_file: dict[str, float] = {}
    for path, churn in prior_changes:
        if churn < 0:
            raise DomainError("churn values must be >= 0")
        per_file[path] = per_file.get(path, 0.0) + churn
    total = sum(per_file.values())
    n = len(per_file)
    if n <= 1 or total == 0:
        return 0.0
    h = 0.0
    for churn in per_file.values():
        if churn > 0:
            p = churn / total
            h -= p * math.log2(p)
    return h / math.log2(n)


def _approval_hours(record: MergeRequestRecord) -> float | None:
    stamped = [a.approved_at for a in record.approvals if a.approved_at is not None]
    if not stamped:
        return None
    return hours_between(record.created_at, min(stamped))


def _is_open_at(record: MergeRequestRecord, instant: datetime) -> bool:
    if record.created_at >= instant:
        return False
    closed = record.merged_at or record.closed_at
    return closed is None or closed > instant


def _sprint_ordinal(record: MergeRequestRecord) -> int:
    if record.milestone_id is not None:
        return record.milestone_id
    year, week, _ = record.created_at.isocalendar()
    return year * 100 + week


def _sorted_median(vals: Sequence[float]) -> float:
    n = len(vals)
    if n == 0:
        return 0.0
    mid = n // 2
    return vals[mid] if n % 2 else (vals[mid - 1] + vals[mid]) / 2.0


@dataclass(frozen=True)
class HistoryDefaults:
    """Corpus-wide fallbacks for history averages on empty histories.

    Built once per run. The approval-hours default excludes the focal MR's
    own contribution so that its post-creation events (approvals) can never
    influence its own feature vector.
    """

    approval_values: tuple[float, ...]  # sorted
    approval_by_mr: dict[tuple[int, int], float]
    mr_size: float

    @property
    def approval_hours(self) -> float:
        return _sorted_median(self.approval_values)

    def approval_hours_excluding(self, key: tuple[int, int]) -> float:
        own = self.approval_by_mr.get(key)
        if own is None:
            return _sorted_median(self.approval_values)
        i = bisect_left(self.approval_values, own)
        vals = self.approval_values
        n = len(vals) - 1
        if n <= 0:
            return 0.0

        def at(j: int) -> float:
            return vals[j] if j < i else vals[j + 1]

        mid = n // 2
        return at(mid) if n % 2 else (at(mid - 1) + at(mid)) / 2.0


def history_defaults(corpus: Corpus) -> HistoryDefaults:
    approval_by_mr: dict[tuple[int, int], float] = {}
    for r in corpus.records:
        h = _approval_hours(r)
        if h is not None:
            approval_by_mr[(r.project_id, r.id)] = h
    sizes = sorted(
        float(sum(fc.additions + fc.deletions for fc in r.file_changes))
        for r in corpus.records
    )
    return HistoryDefaults(
        approval_values=tuple(sorted(approval_by_mr.values())),
        approval_by_mr=approval_by_mr,
        mr_size=_sorted_median(sizes),
    )


def extract_completion_features(
    record: MergeRequestRecord,
    history: Corpus,
    defaults: HistoryDefaults | None = None,
) -> CompletionFeatureVector:
    """Build the creation-time predictor vector for one MR.

    `history` is the project corpus; only records of the same project created
    strictly before the focal MR enter the historical windows. The focal MR's
    own post-creation events (notes, approvals, merge, trailing commits)
    never contribute.
    """
    if defaults is None:
        defaults = history_defaults(history)
    t = record.created_at
    prior = [
        r
        for r in history.records
        if r.project_id == record.project_id and r.created_at < t
    ]

    project_records = [r for r in history.records if r.project_id == record.project_id]
    project_created = history.project_created_at.get(record.project_id)
    if project_created is None:
        candidates = [r.created_at for r in project_records] + [t]
        project_created = min(candidates)

    initial_commits = [c for c in record.commits if c.committed_at <= t]
    churn = sum(fc.additions + fc.deletions for fc in record.file_changes)
    additions = sum(fc.additions for fc in record.file_changes)
    deletions = sum(fc.deletions for fc in record.file_changes)

    default_approval = defaults.approval_hours_excluding(
        (record.project_id, record.id)
    )

    def avg_or_default(values: list[float]) -> float:
        return sum(values) / len(values) if values else default_approval

    src = [r for r in prior if r.source_branch == record.source_branch]
    dst = [r for r in prior if r.target_branch == record.target_branch]
    src_approvals = [h for r in src if (h := _approval_hours(r)) is not None]
    dst_approvals = [h for r in dst if (h := _approval_hours(r)) is not None]
    hist_approvals = [h for r in prior if (h := _approval_hours(r)) is not None]

    churn_by_author: dict[int, int] = {}
    for r in prior:
        c = sum(fc.additions + fc.deletions for fc in r.file_changes)
        churn_by_author[r.author] = churn_by_author.get(r.author, 0) + c
    total_prior_churn = sum(churn_by_author.values())
    majors = minors = 0
    if total_prior_churn > 0:
        for c in churn_by_author.values():
            if c == 0:
                continue
            if c / total_prior_churn > MAJOR_CONTRIBUTOR_SHARE:
                majors += 1
            else:
                minors += 1

    author_prior = [r for r in prior if r.author == record.author]
    author_file_churn = [
        (fc.path, fc.additions + fc.deletions)
        for r in author_prior
        for fc in r.file_changes
    ]
    n_authored = sum(
        1
        for r in prior
        for c in r.commits
        if c.author == record.author and c.committed_at < t
    )

    sizes = [
        float(sum(fc.additions + fc.deletions for fc in r.file_changes)) for r in prior
    ]

    return CompletionFeatureVector(
        mr_id=record.id,
        delta_time=hours_between(project_created, t),
        associated_sprint=_sprint_ordinal(record),
        n_committers=len({c.author for c in initial_commits}),
        has_assignee=len(record.assignees) > 0,
        n_authored_commits=n_authored,
        n_committed_commits=len(initial_commits),
        change_churn=churn,
        additions=additions,
        deletions=deletions,
        title_length=len(record.title),
        description_length=len(record.description),
        is_hashtag=bool(_HASHTAG_RE.search(record.description)),
        is_at_tag=bool(_AT_TAG_RE.search(record.description)),
        source_branch_open_mrs=sum(1 for r in src if _is_open_at(r, t)),
        source_branch_avg_approval_hours=avg_or_default(src_approvals),
        target_branch_open_mrs=sum(1 for r in dst if _is_open_at(r, t)),
        target_branch_avg_approval_hours=avg_or_default(dst_approvals),
        n_major_contributors=majors,
        n_minor_contributors=minors,
        n_mrs_without_discussion=sum(
            1 for r in prior if not any(not n.is_system for n in r.notes)
        ),
        n_self_approved_mrs=sum(
            1 for r in prior if any(a.author == r.author for a in r.approvals)
        ),
        n_open_mrs_history=sum(1 for r in prior if _is_open_at(r, t)),
        avg_historical_approval_hours=avg_or_default(hist_approvals),
        historical_entropy=historical_entropy(author_file_churn),
        historical_mr_size=(sum(sizes) / len(sizes)) if sizes else defaults.mr_size,
        n_initial_files=len(record.file_changes),
    )


@dataclass(frozen=True)
class TargetValue:
    raw_hours: float
    normalized: float


@dataclass(frozen=True)
class TargetTransform:
    """log1p + min-max parameters fitted on a training population."""

    lo: float
    hi: float

    def apply(self, hours: float) -> float:
        if self.hi == self.lo:
            return 0.0
        v = (math.log1p(hours) - self.lo) / (self.hi - self.lo)
        return min(1.0, max(0.0, v))

    def invert(self, normalized: float) -> float:
        return math.expm1(normalized * (self.hi - self.lo) + self.lo)


def fit_target_transform(hours: Sequence[float]) -> TargetTransform:
    if len(hours) == 0:
        raise DomainError("cannot fit a target transform on an empty population")
    if any(h < 0 for h in hours):
        raise DomainError("completion hours must be >= 0")
    logs = [math.log1p(h) for h in hours]
    return TargetTransform(lo=min(logs), hi=max(logs))


def normalize_target(hours: Sequence[float]) -> tuple[list[TargetValue], TargetTransform]:
    """log1p + min-max over the training population; constant input maps to 0."""
    transform = fit_target_transform(hours)
    values = [TargetValue(raw_hours=h, normalized=transform.apply(h)) for h in hours]
    return values, transform


@dataclass(frozen=True)
class FeatureMatrix:
    """Named feature columns with one row per MR."""

    ids: tuple[int, ...]
    names: tuple[str, ...]
    X: np.ndarray

    def __post_init__(self) -> None:
        if self.X.shape != (len(self.ids), len(self.names)):
            raise DomainError(
                f"matrix shape {self.X.shape} does not match "
                f"{len(self.ids)} rows x {len(self.names)} columns"
            )

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.names.index(name)]

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        idx = [self.names.index(nm) for nm in names]
        return FeatureMatrix(ids=self.ids, names=tuple(names), X=self.X[:, idx])

    def take_rows(self, rows: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(
            ids=tuple(self.ids[i] for i in rows), names=self.names, X=self.X[rows]
        )


def completion_matrix(vectors: Sequence[CompletionFeatureVector]) -> FeatureMatrix:
    rows = []
    for v in vectors:
        rows.append([float(getattr(v, nm)) for nm in COMPLETION_FEATURE_NAMES])
    X = np.array(rows, dtype=float) if rows else np.zeros((0, len(COMPLETION_FEATURE_NAMES)))
    return FeatureMatrix(
        ids=tuple(v.mr_id for v in vectors),
        names=COMPLETION_FEATURE_NAMES,
        X=X,
    )


def churn_bucket(churn: int) -> str:
    if churn <= 0:
        return "0"
    if churn <= 20:
        return "1-20"
    if churn <= 100:
        return "21-100"
    if churn <= 1000:
        return "101-1000"
    return "1000+"


def classifier_text(record: MergeRequestRecord) -> str:
    """Serialized MR text for the streaming classifier protocol.

    Title, description, then compact metadata tags (file-type set, churn
    bucket, branch names). Deterministic for a given record.
    """
    exts = sorted(file_extension(fc.path) or "none" for fc in record.file_changes)
    churn = sum(fc.additions + fc.deletions for fc in record.file_changes)
    tags = (
        f"[types={','.join(sorted(set(exts))) if exts else 'none'}] "
        f"[churn={churn_bucket(churn)}] "
        f"[src={record.source_branch}] [dst={record.target_branch}]"
    )
    return f"{record.title}\n{record.description}\n{tags}"
