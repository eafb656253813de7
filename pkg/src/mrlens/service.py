"""Client for the streaming classification protocol.

Requests are newline-delimited UTF-8 JSON records {"id", "text"}; responses
are {"id", "label", "score"} in arbitrary completion order, or
{"id"?, "error"} for lines the service could not handle. The transport is a
spawned subprocess (stdin/stdout) or a local TCP socket.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess
from dataclasses import dataclass

from .corpus import MergeRequestRecord
from .errors import DataValidationError, NetworkError
from .features import classifier_text


@dataclass(frozen=True)
class ClassifiedLabel:
    mr_id: int
    label: str
    score: float


def _build_requests(records: list[MergeRequestRecord]) -> list[str]:
    return [
        json.dumps({"id": r.id, "text": classifier_text(r)}, ensure_ascii=False)
        for r in records
    ]


def _parse_responses(
    lines: list[str], expected_ids: set[int]
) -> list[ClassifiedLabel]:
    out: list[ClassifiedLabel] = []
    errors: list[str] = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError:
            errors.append(f"unparseable response line: {line[:120]}")
            continue
        if "error" in doc:
            errors.append(f"service error for id={doc.get('id')}: {doc['error']}")
            continue
        try:
            out.append(
                ClassifiedLabel(
                    mr_id=int(doc["id"]),
                    label=str(doc["label"]),
                    score=float(doc["score"]),
                )
            )
        except (KeyError, TypeError, ValueError):
            errors.append(f"malformed response record: {line[:120]}")
    got_ids = [c.mr_id for c in out]
    missing = expected_ids - set(got_ids)
    if errors:
        raise DataValidationError(
            f"classifier service reported {len(errors)} error(s); first: {errors[0]}"
        )
    if missing or len(got_ids) != len(expected_ids):
        raise DataValidationError(
            f"classifier service answered {len(got_ids)}/{len(expected_ids)} "
            f"requests; missing ids {sorted(missing)[:5]}"
        )
    return sorted(out, key=lambda c: c.mr_id)


def classify_via_command(
    records: list[MergeRequestRecord], command: str, timeout_s: float = 600.0
) -> list[ClassifiedLabel]:
    """Spawn `command` and stream all records through its stdin/stdout."""
    requests = _build_requests(records)
    try:
        proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
        )
    except OSError as exc:
        raise NetworkError(f"cannot start classifier service {command!r}: {exc}") from None

    try:
        stdout, _ = proc.communicate(
            input="\n".join(requests) + "\n", timeout=timeout_s
        )
    except subprocess.TimeoutExpired:
        proc.kill()
        raise NetworkError(f"classifier service timed out after {timeout_s}s") from None
    if proc.returncode not in (0, None):
        raise NetworkError(f"classifier service exited with code {proc.returncode}")
    return _parse_responses(stdout.splitlines(), {r.id for r in records})


def classify_via_socket(
    records: list[MergeRequestRecord], address: str, timeout_s: float = 600.0
) -> list[ClassifiedLabel]:
    """Stream records over a local TCP socket given as host:port."""
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise DataValidationError(f"socket address must be host:port, got {address!r}")
    requests = _build_requests(records)
    try:
        conn = socket.create_connection((host, int(port)), timeout=timeout_s)
    except OSError as exc:
        raise NetworkError(f"cannot reach classifier at {address}: {exc}") from None
    with conn:
        payload = ("\n".join(requests) + "\n").encode("utf-8")
        conn.sendall(payload)
        conn.shutdown(socket.SHUT_WR)
        chunks: list[bytes] = []
        while True:
            chunk = conn.recv(65536)
            if not chunk:
                break
            chunks.append(chunk)
    text = b"".join(chunks).decode("utf-8")
    return _parse_responses(text.splitlines(), {r.id for r in records})
