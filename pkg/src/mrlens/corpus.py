"""Canonical merge-request records, the on-disk corpus archive, and corpus summaries.

The archive is newline-delimited UTF-8 JSON: a header line with corpus
metadata followed by one record per line, sorted by (project_id, id).
Export is deterministic byte-for-byte for a given corpus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .errors import DataValidationError, IOFailure, ParseError

ARCHIVE_FORMAT = "mrlens-corpus"
ARCHIVE_VERSION = 1

MR_STATES = ("open", "merged", "closed")


def parse_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601 timestamp and normalize it to UTC."""
    try:
        ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ParseError(f"bad timestamp {raw!r}: {exc}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z"


@dataclass(frozen=True)
class CommitInfo:
    sha: str
    message: str
    author: int
    committed_at: datetime


@dataclass(frozen=True)
class FileChange:
    path: str
    additions: int
    deletions: int
    is_new_file: bool = False
    is_deleted_file: bool = False


@dataclass(frozen=True)
class Note:
    author: int
    body: str
    created_at: datetime
    is_system: bool = False


@dataclass(frozen=True)
class Approval:
    author: int
    approved_at: datetime | None = None


@dataclass(frozen=True)
class MergeRequestRecord:
    id: int
    project_id: int
    title: str
    description: str
    state: str
    created_at: datetime
    merged_at: datetime | None
    source_branch: str
    target_branch: str
    labels: tuple[str, ...]
    is_draft_flag: bool
    commits: tuple[CommitInfo, ...]
    file_changes: tuple[FileChange, ...]
    notes: tuple[Note, ...]
    reviewers: tuple[int, ...]
    assignees: tuple[int, ...]
    approvals: tuple[Approval, ...]
    author: int
    # Optional forge metadata; absent on minimal records.
    milestone_id: int | None = None
    closed_at: datetime | None = None
    web_url: str = ""

    def validate(self) -> None:
        if self.state not in MR_STATES:
            raise DataValidationError(f"mr {self.id}: unknown state {self.state!r}")
        if (self.state == "merged") != (self.merged_at is not None):
            raise DataValidationError(
                f"mr {self.id}: merged_at must be present iff state is merged"
            )
        if self.merged_at is not None and self.merged_at < self.created_at:
            raise DataValidationError(f"mr {self.id}: merged_at precedes created_at")
        seen_shas: set[str] = set()
        for c in self.commits:
            if not c.sha:
                raise DataValidationError(f"mr {self.id}: commit with empty sha")
            if c.sha in seen_shas:
                raise DataValidationError(f"mr {self.id}: duplicate commit sha {c.sha}")
            seen_shas.add(c.sha)
        for prev, cur in zip(self.commits, self.commits[1:]):
            if cur.committed_at < prev.committed_at:
                raise DataValidationError(
                    f"mr {self.id}: commits not ordered by timestamp"
                )
        for fc in self.file_changes:
            if not fc.path:
                raise DataValidationError(f"mr {self.id}: file change with empty path")
            if fc.additions < 0 or fc.deletions < 0:
                raise DataValidationError(
                    f"mr {self.id}: negative line counts on {fc.path}"
                )


@dataclass(frozen=True)
class Corpus:
    host: str
    group: str
    records: tuple[MergeRequestRecord, ...]
    fetched_at: datetime
    project_created_at: dict[int, datetime] = field(default_factory=dict)

    @property
    def project_ids(self) -> tuple[int, ...]:
        return tuple(sorted({r.project_id for r in self.records}))

    def validate(self) -> None:
        seen: set[tuple[int, int]] = set()
        for r in self.records:
            key = (r.project_id, r.id)
            if key in seen:
                raise DataValidationError(
                    f"duplicate record id {r.id} in project {r.project_id}"
                )
            seen.add(key)
            r.validate()

    def for_project(self, project_id: int) -> tuple[MergeRequestRecord, ...]:
        return tuple(r for r in self.records if r.project_id == project_id)


def _commit_to_json(c: CommitInfo) -> dict:
    return {
        "sha": c.sha,
        "message": c.message,
        "author": c.author,
        "committed_at": format_timestamp(c.committed_at),
    }


def _file_to_json(fc: FileChange) -> dict:
    return {
        "path": fc.path,
        "additions": fc.additions,
        "deletions": fc.deletions,
        "is_new_file": fc.is_new_file,
        "is_deleted_file": fc.is_deleted_file,
    }


def _note_to_json(n: Note) -> dict:
    return {
        "author": n.author,
        "body": n.body,
        "created_at": format_timestamp(n.created_at),
        "is_system": n.is_system,
    }


def record_to_json(r: MergeRequestRecord) -> dict:
    doc = {
        "id": r.id,
        "project_id": r.project_id,
        "title": r.title,
        "description": r.description,
        "state": r.state,
        "created_at": format_timestamp(r.created_at),
        "merged_at": format_timestamp(r.merged_at) if r.merged_at else None,
        "source_branch": r.source_branch,
        "target_branch": r.target_branch,
        "labels": list(r.labels),
        "is_draft_flag": r.is_draft_flag,
        "commits": [_commit_to_json(c) for c in r.commits],
        "file_changes": [_file_to_json(f) for f in r.file_changes],
        "notes": [_note_to_json(n) for n in r.notes],
        "reviewers": list(r.reviewers),
        "assignees": list(r.assignees),
        "approvals": [
            {"author": a.author, "approved_at": format_timestamp(a.approved_at) if a.approved_at else None}
            for a in r.approvals
        ],
        "author": r.author,
        "milestone_id": r.milestone_id,
        "closed_at": format_timestamp(r.closed_at) if r.closed_at else None,
        "web_url": r.web_url,
    }
    return doc


def record_from_json(doc: dict) -> MergeRequestRecord:
    try:
        return MergeRequestRecord(
            id=int(doc["id"]),
            project_id=int(doc["project_id"]),
            title=str(doc.get("title", "")),
            description=str(doc.get("description") or ""),
            state=str(doc["state"]),
            created_at=parse_timestamp(doc["created_at"]),
            merged_at=parse_timestamp(doc["merged_at"]) if doc.get("merged_at") else None,
            source_branch=str(doc.get("source_branch", "")),
            target_branch=str(doc.get("target_branch", "")),
            labels=tuple(str(x) for x in doc.get("labels", [])),
            is_draft_flag=bool(doc.get("is_draft_flag", False)),
            commits=tuple(
                CommitInfo(
                    sha=str(c["sha"]),
                    message=str(c.get("message", "")),
                    author=int(c["author"]),
                    committed_at=parse_timestamp(c["committed_at"]),
                )
                for c in doc.get("commits", [])
            ),
            file_changes=tuple(
                FileChange(
                    path=str(f["path"]),
                    additions=int(f["additions"]),
                    deletions=int(f["deletions"]),
                    is_new_file=bool(f.get("is_new_file", False)),
                    is_deleted_file=bool(f.get("is_deleted_file", False)),
                )
                for f in doc.get("file_changes", [])
            ),
            notes=tuple(
                Note(
                    author=int(n["author"]),
                    body=str(n.get("body", "")),
                    created_at=parse_timestamp(n["created_at"]),
                    is_system=bool(n.get("is_system", False)),
                )
                for n in doc.get("notes", [])
            ),
            reviewers=tuple(int(x) for x in doc.get("reviewers", [])),
            assignees=tuple(int(x) for x in doc.get("assignees", [])),
            approvals=tuple(
                Approval(
                    author=int(a["author"]),
                    approved_at=parse_timestamp(a["approved_at"]) if a.get("approved_at") else None,
                )
                for a in doc.get("approvals", [])
            ),
            author=int(doc["author"]),
            milestone_id=int(doc["milestone_id"]) if doc.get("milestone_id") is not None else None,
            closed_at=parse_timestamp(doc["closed_at"]) if doc.get("closed_at") else None,
            web_url=str(doc.get("web_url", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed record {doc.get('id', '?')}: {exc}") from None


def export_archive(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus archive; records sorted by (project_id, id)."""
    header = {
        "format": ARCHIVE_FORMAT,
        "version": ARCHIVE_VERSION,
        "host": corpus.host,
        "group": corpus.group,
        "fetched_at": format_timestamp(corpus.fetched_at),
        "project_ids": list(corpus.project_ids),
        "project_created_at": {
            str(pid): format_timestamp(ts)
            for pid, ts in sorted(corpus.project_created_at.items())
        },
        "record_count": len(corpus.records),
    }
    ordered = sorted(corpus.records, key=lambda r: (r.project_id, r.id))
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
            for r in ordered:
                fh.write(json.dumps(record_to_json(r), sort_keys=True, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write archive {path}: {exc}") from None


def import_archive(path: str | Path) -> Corpus:
    """Read and validate an archive; diagnostics carry the offending line number."""
    path = Path(path)
    if not path.exists():
        raise IOFailure(f"archive not found: {path}")
    records: list[MergeRequestRecord] = []
    header: dict = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: invalid JSON: {exc}") from None
            if lineno == 1:
                if doc.get("format") != ARCHIVE_FORMAT:
                    raise ParseError(
                        f"line 1: not a {ARCHIVE_FORMAT} archive (format={doc.get('format')!r})"
                    )
                header = doc
                continue
            try:
                rec = record_from_json(doc)
                rec.validate()
            except (ParseError, DataValidationError) as exc:
                raise type(exc)(f"line {lineno}: {exc}") from None
            records.append(rec)
    if not header:
        # Zero-line file: treat as an empty corpus with blank metadata.
        return Corpus(host="", group="", records=(), fetched_at=datetime.now(timezone.utc))
    corpus = Corpus(
        host=str(header.get("host", "")),
        group=str(header.get("group", "")),
        records=tuple(records),
        fetched_at=parse_timestamp(header["fetched_at"]),
        project_created_at={
            int(pid): parse_timestamp(ts)
            for pid, ts in header.get("project_created_at", {}).items()
        },
    )
    corpus.validate()
    return corpus


@dataclass(frozen=True)
class ProjectStats:
    project_id: int
    n_mrs: int
    n_merged: int
    first_created: datetime | None
    last_created: datetime | None


def corpus_stats(corpus: Corpus) -> list[ProjectStats]:
    """Per-project counts; the per-project totals sum to the corpus size."""
    out: list[ProjectStats] = []
    for pid in corpus.project_ids:
        recs = corpus.for_project(pid)
        created = [r.created_at for r in recs]
        out.append(
            ProjectStats(
                project_id=pid,
                n_mrs=len(recs),
                n_merged=sum(1 for r in recs if r.state == "merged"),
                first_created=min(created) if created else None,
                last_created=max(created) if created else None,
            )
        )
    return out


def merged_records(corpus: Corpus) -> tuple[MergeRequestRecord, ...]:
    return tuple(r for r in corpus.records if r.state == "merged")


def build_corpus(
    records: Iterable[MergeRequestRecord],
    host: str = "",
    group: str = "",
    fetched_at: datetime | None = None,
    project_created_at: dict[int, datetime] | None = None,
) -> Corpus:
    corpus = Corpus(
        host=host,
        group=group,
        records=tuple(records),
        fetched_at=fetched_at or datetime(2024, 1, 1, tzinfo=timezone.utc),
        project_created_at=project_created_at or {},
    )
    corpus.validate()
    return corpus
