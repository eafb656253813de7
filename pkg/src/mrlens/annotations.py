"""Manual-annotation files: CSV import/export and annotator agreement."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import DomainError, IOFailure, ParseError
from .taxonomy import NORMAL_LABEL, DeviationCategory

ANNOTATION_HEADER = ("mr_id", "url", "label", "note")

VALID_LABELS = {c.value for c in DeviationCategory} | {NORMAL_LABEL}


@dataclass(frozen=True)
class AnnotationEntry:
    mr_id: int
    label: str
    note: str = ""


@dataclass(frozen=True)
class AnnotationSet:
    annotator: str
    entries: tuple[AnnotationEntry, ...]

    def labels(self) -> dict[int, str]:
        return {e.mr_id: e.label for e in self.entries}


def write_template(
    path: str | Path, rows: list[tuple[int, str]] | None = None
) -> None:
    """Write an annotation template: header plus one blank-label row per MR."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(ANNOTATION_HEADER)
            for mr_id, url in rows or []:
                writer.writerow([mr_id, url, "", ""])
    except OSError as exc:
        raise IOFailure(f"cannot write template {path}: {exc}") from None


def import_annotations(path: str | Path, annotator: str = "") -> AnnotationSet:
    """Read an annotation CSV; empty labels mean unannotated and are skipped."""
    path = Path(path)
    if not path.exists():
        raise IOFailure(f"annotation file not found: {path}")
    entries: list[AnnotationEntry] = []
    seen: set[int] = set()
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header[:4]) != ANNOTATION_HEADER:
            raise ParseError(
                f"{path}: expected header {','.join(ANNOTATION_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                mr_id = int(row[0])
            except (ValueError, IndexError):
                raise ParseError(f"{path}:{lineno}: bad mr_id {row[:1]!r}") from None
            label = row[2].strip() if len(row) > 2 else ""
            note = row[3].strip() if len(row) > 3 else ""
            if not label:
                continue
            if label not in VALID_LABELS:
                raise ParseError(
                    f"{path}:{lineno}: unknown label {label!r} "
                    f"(expected one of {sorted(VALID_LABELS)})"
                )
            if mr_id in seen:
                raise ParseError(f"{path}:{lineno}: duplicate entry for mr {mr_id}")
            seen.add(mr_id)
            entries.append(AnnotationEntry(mr_id=mr_id, label=label, note=note))
    return AnnotationSet(annotator=annotator or path.stem, entries=tuple(entries))


@dataclass(frozen=True)
class AgreementReport:
    total: int
    matches: int
    agreement_pct: float
    confusion: dict[tuple[str, str], int]
    disagreeing_ids: tuple[int, ...]


def diff_annotations(a: AnnotationSet, b: AnnotationSet) -> AgreementReport:
    """Raw agreement between two annotators over the same MR universe."""
    la, lb = a.labels(), b.labels()
    if set(la) != set(lb):
        missing = sorted(set(la) ^ set(lb))
        raise DomainError(f"annotation sets cover different MRs: {missing}")
    confusion: dict[tuple[str, str], int] = {}
    disagreeing: list[int] = []
    matches = 0
    for mr_id in sorted(la):
        pair = (la[mr_id], lb[mr_id])
        confusion[pair] = confusion.get(pair, 0) + 1
        if pair[0] == pair[1]:
            matches += 1
        else:
            disagreeing.append(mr_id)
    total = len(la)
    return AgreementReport(
        total=total,
        matches=matches,
        agreement_pct=100.0 * matches / total if total else 100.0,
        confusion=confusion,
        disagreeing_ids=tuple(disagreeing),
    )
