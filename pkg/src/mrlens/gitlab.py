"""GitLab-compatible REST v4 client: paginated MR listing plus per-MR
sub-resource enrichment (commits, per-file diff stats, notes, approvals).

Partial results are never returned silently: a page the server promised but
cannot deliver, or a total-count mismatch, raises an incompleteness error.
"""

from __future__ import annotations

import logging
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Iterator

import requests

from .corpus import (
    Approval,
    CommitInfo,
    Corpus,
    FileChange,
    MergeRequestRecord,
    Note,
    parse_timestamp,
)
from .errors import CredentialError, IncompleteFetchError, NetworkError, RateLimitError

log = logging.getLogger(__name__)

TRANSIENT_STATUSES = {429, 502, 503, 504}


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 5
    base_delay_s: float = 1.0
    jitter: float = 0.1

    def delay(self, attempt: int) -> float:
        base = self.base_delay_s * (2**attempt)
        return base * (1.0 + self.jitter * random.random())


def _count_diff_lines(diff: str) -> tuple[int, int]:
    additions = deletions = 0
    for line in diff.splitlines():
        if line.startswith("+") and not line.startswith("+++"):
            additions += 1
        elif line.startswith("-") and not line.startswith("---"):
            deletions += 1
    return additions, deletions


def _map_state(raw: str) -> str:
    if raw == "opened":
        return "open"
    if raw in ("merged", "closed", "open"):
        return raw
    return "open"


class GitLabClient:
    def __init__(
        self,
        host: str,
        token: str,
        page_size: int = 100,
        retry: RetryPolicy | None = None,
        timeout_s: float = 30.0,
        fanout: int = 4,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.base = host.rstrip("/") + "/api/v4"
        self.token = token
        self.page_size = page_size
        self.retry = retry or RetryPolicy()
        self.timeout_s = timeout_s
        self.fanout = max(1, fanout)
        self._sleep = sleep
        self._session = requests.Session()

    def _get(self, path: str, params: dict | None = None) -> requests.Response:
        url = self.base + path
        headers = {"PRIVATE-TOKEN": self.token}
        last_error: Exception | None = None
        for attempt in range(self.retry.attempts):
            try:
                resp = self._session.get(
                    url, params=params, headers=headers, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_error = exc
                self._sleep(self.retry.delay(attempt))
                continue
            if resp.status_code in (401, 403):
                raise CredentialError(
                    f"{resp.status_code} from {path}: token rejected or lacks read scope"
                )
            if resp.status_code in TRANSIENT_STATUSES:
                last_error = RateLimitError(
                    f"{resp.status_code} from {path} after {attempt + 1} attempts"
                )
                self._sleep(self.retry.delay(attempt))
                continue
            if resp.status_code >= 400:
                raise NetworkError(f"{resp.status_code} from {path}")
            return resp
        if isinstance(last_error, RateLimitError):
            raise last_error
        raise NetworkError(f"request to {path} failed: {last_error}")

    def _get_paginated(self, path: str, params: dict | None = None) -> list[dict]:
        items: list[dict] = []
        page = 1
        expected_total: int | None = None
        while True:
            page_params = dict(params or {})
            page_params.update({"page": page, "per_page": self.page_size})
            try:
                resp = self._get(path, page_params)
            except NetworkError:
                if page > 1:
                    raise IncompleteFetchError(
                        f"pagination of {path} truncated at page {page}"
                    ) from None
                raise
            batch = resp.json()
            if not isinstance(batch, list):
                raise NetworkError(f"expected a JSON array from {path}")
            items.extend(batch)
            total_header = resp.headers.get("X-Total")
            if total_header:
                expected_total = int(total_header)
            next_page = resp.headers.get("X-Next-Page", "").strip()
            if not next_page:
                break
            page = int(next_page)
        if expected_total is not None and len(items) != expected_total:
            raise IncompleteFetchError(
                f"{path}: fetched {len(items)} items but server reported {expected_total}"
            )
        return items

    def _mr_path(self, project_id: int, iid: int, suffix: str) -> str:
        return f"/projects/{project_id}/merge_requests/{iid}/{suffix}"

    def _fetch_commits(self, project_id: int, mr: dict) -> tuple[CommitInfo, ...]:
        docs = self._get_paginated(self._mr_path(project_id, mr["iid"], "commits"))
        fallback_author = int(mr["author"]["id"])
        commits = []
        seen: set[str] = set()
        for d in docs:
            sha = str(d.get("id") or d.get("sha") or "")
            if not sha or sha in seen:
                continue
            seen.add(sha)
            commits.append(
                CommitInfo(
                    sha=sha,
                    message=str(d.get("message") or d.get("title") or ""),
                    author=int(d.get("author_id") or fallback_author),
                    committed_at=parse_timestamp(
                        d.get("committed_date") or d.get("created_at")
                    ),
                )
            )
        commits.sort(key=lambda c: (c.committed_at, c.sha))
        return tuple(commits)

    def _fetch_changes(self, project_id: int, mr: dict) -> tuple[FileChange, ...]:
        resp = self._get(self._mr_path(project_id, mr["iid"], "changes"))
        doc = resp.json()
        out = []
        for ch in doc.get("changes", []):
            if "additions" in ch and "deletions" in ch:
                additions, deletions = int(ch["additions"]), int(ch["deletions"])
            else:
                additions, deletions = _count_diff_lines(str(ch.get("diff", "")))
            out.append(
                FileChange(
                    path=str(ch.get("new_path") or ch.get("old_path") or ""),
                    additions=additions,
                    deletions=deletions,
                    is_new_file=bool(ch.get("new_file", False)),
                    is_deleted_file=bool(ch.get("deleted_file", False)),
                )
            )
        return tuple(out)

    def _fetch_notes(self, project_id: int, mr: dict) -> tuple[Note, ...]:
        docs = self._get_paginated(self._mr_path(project_id, mr["iid"], "notes"))
        notes = [
            Note(
                author=int(d["author"]["id"]),
                body=str(d.get("body", "")),
                created_at=parse_timestamp(d["created_at"]),
                is_system=bool(d.get("system", False)),
            )
            for d in docs
        ]
        notes.sort(key=lambda n: n.created_at)
        return tuple(notes)

    def _fetch_approvals(self, project_id: int, mr: dict) -> tuple[Approval, ...]:
        resp = self._get(self._mr_path(project_id, mr["iid"], "approvals"))
        doc = resp.json()
        out = []
        for entry in doc.get("approved_by", []):
            user = entry.get("user", entry)
            ts = entry.get("approved_at")
            out.append(
                Approval(
                    author=int(user["id"]),
                    approved_at=parse_timestamp(ts) if ts else None,
                )
            )
        return tuple(out)

    def _enrich(self, project_id: int, mr: dict) -> MergeRequestRecord:
        record = MergeRequestRecord(
            id=int(mr["iid"]),
            project_id=project_id,
            title=str(mr.get("title", "")),
            description=str(mr.get("description") or ""),
            state=_map_state(str(mr.get("state", "opened"))),
            created_at=parse_timestamp(mr["created_at"]),
            merged_at=parse_timestamp(mr["merged_at"]) if mr.get("merged_at") else None,
            source_branch=str(mr.get("source_branch", "")),
            target_branch=str(mr.get("target_branch", "")),
            labels=tuple(str(x) for x in mr.get("labels", [])),
            is_draft_flag=bool(mr.get("draft", mr.get("work_in_progress", False))),
            commits=self._fetch_commits(project_id, mr),
            file_changes=self._fetch_changes(project_id, mr),
            notes=self._fetch_notes(project_id, mr),
            reviewers=tuple(int(r["id"]) for r in mr.get("reviewers", [])),
            assignees=tuple(int(a["id"]) for a in mr.get("assignees", [])),
            approvals=self._fetch_approvals(project_id, mr),
            author=int(mr["author"]["id"]),
            milestone_id=(
                int(mr["milestone"]["id"]) if mr.get("milestone") else None
            ),
            closed_at=parse_timestamp(mr["closed_at"]) if mr.get("closed_at") else None,
            web_url=str(mr.get("web_url", "")),
        )
        record.validate()
        return record

    def fetch_project_mrs(
        self, project_id: int, since: datetime | None = None
    ) -> Iterator[MergeRequestRecord]:
        """Yield every MR of the project updated at/after `since`, each fully
        enriched; sub-resource calls run with bounded parallelism."""
        params: dict = {"state": "all", "order_by": "created_at", "sort": "asc"}
        if since is not None:
            params["updated_after"] = since.astimezone(timezone.utc).isoformat()
        listing = self._get_paginated(f"/projects/{project_id}/merge_requests", params)
        if self.fanout == 1:
            for mr in listing:
                yield self._enrich(project_id, mr)
            return
        with ThreadPoolExecutor(max_workers=self.fanout) as pool:
            yield from pool.map(lambda mr: self._enrich(project_id, mr), listing)


def fetch_project_mrs(
    host: str,
    project_id: int,
    token: str,
    since: datetime | None = None,
    page_size: int = 100,
    retry: RetryPolicy | None = None,
    fanout: int = 4,
) -> Iterator[MergeRequestRecord]:
    """Stream every enriched MR of one project (convenience wrapper)."""
    client = GitLabClient(host, token, page_size=page_size, retry=retry, fanout=fanout)
    yield from client.fetch_project_mrs(project_id, since=since)


def ingest_corpus(
    host: str,
    project_ids: list[int],
    token: str,
    since: datetime | None = None,
    group: str = "",
    page_size: int = 100,
    retry: RetryPolicy | None = None,
    fanout: int = 4,
) -> Corpus:
    """Fetch all projects into one corpus. The corpus timestamp is derived
    from the newest record so identical server state gives identical output."""
    client = GitLabClient(
        host, token, page_size=page_size, retry=retry, fanout=fanout
    )
    records: list[MergeRequestRecord] = []
    for pid in sorted(project_ids):
        for record in client.fetch_project_mrs(pid, since=since):
            records.append(record)
        log.info("project %d: %d merge requests", pid, len(records))
    stamps = [r.created_at for r in records]
    stamps.extend(r.merged_at for r in records if r.merged_at)
    fetched_at = max(stamps) if stamps else datetime(1970, 1, 1, tzinfo=timezone.utc)
    corpus = Corpus(
        host=host, group=group, records=tuple(records), fetched_at=fetched_at
    )
    corpus.validate()
    return corpus
