"""Annotation CSV import/export and annotator agreement."""

from __future__ import annotations

import pytest

from mrlens.annotations import (
    AnnotationEntry,
    AnnotationSet,
    diff_annotations,
    import_annotations,
    write_template,
)
from mrlens.errors import DomainError, ParseError


def write_csv(path, rows):
    lines = ["mr_id,url,label,note"]
    lines += [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


class TestImport:
    def test_round_trip_template(self, tmp_path):
        path = tmp_path / "t.csv"
        write_template(path, [(1, "https://x/1"), (2, "https://x/2")])
        ann = import_annotations(path)
        assert ann.entries == ()  # unannotated rows are skipped

    def test_labels_parsed(self, tmp_path):
        path = tmp_path / "a.csv"
        write_csv(path, [(1, "u", "LU", ""), (2, "u", "NORMAL", "checked twice")])
        ann = import_annotations(path, annotator="alice")
        assert ann.annotator == "alice"
        assert ann.labels() == {1: "LU", 2: "NORMAL"}
        assert ann.entries[1].note == "checked twice"

    def test_unknown_label_rejected(self, tmp_path):
        path = tmp_path / "a.csv"
        write_csv(path, [(1, "u", "WAT", "")])
        with pytest.raises(ParseError, match="unknown label"):
            import_annotations(path)

    def test_duplicate_mr_rejected(self, tmp_path):
        path = tmp_path / "a.csv"
        write_csv(path, [(1, "u", "LU", ""), (1, "u", "CC", "")])
        with pytest.raises(ParseError, match="duplicate"):
            import_annotations(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("id,who,what\n1,u,LU\n")
        with pytest.raises(ParseError, match="header"):
            import_annotations(path)


def ann_set(name: str, labels: dict[int, str]) -> AnnotationSet:
    return AnnotationSet(
        annotator=name,
        entries=tuple(AnnotationEntry(mr_id=k, label=v) for k, v in labels.items()),
    )


class TestDiff:
    def test_identical_sets(self):
        a = ann_set("a", {1: "LU", 2: "NORMAL", 3: "CC"})
        report = diff_annotations(a, ann_set("b", {1: "LU", 2: "NORMAL", 3: "CC"}))
        assert report.agreement_pct == 100.0
        assert report.disagreeing_ids == ()

    def test_fully_disjoint_labels(self):
        labels_a = {i: "LU" for i in range(10)}
        labels_b = {i: "CC" for i in range(10)}
        report = diff_annotations(ann_set("a", labels_a), ann_set("b", labels_b))
        assert report.agreement_pct == 0.0
        assert len(report.disagreeing_ids) == 10

    def test_eight_of_ten(self):
        labels_a = {i: "LU" for i in range(10)}
        labels_b = dict(labels_a)
        labels_b[3] = "CC"
        labels_b[7] = "NORMAL"
        report = diff_annotations(ann_set("a", labels_a), ann_set("b", labels_b))
        assert report.agreement_pct == pytest.approx(80.0)
        assert report.disagreeing_ids == (3, 7)
        assert report.confusion[("LU", "LU")] == 8
        assert report.confusion[("LU", "CC")] == 1

    def test_universe_mismatch_rejected(self):
        a = ann_set("a", {1: "LU"})
        b = ann_set("b", {2: "LU"})
        with pytest.raises(DomainError, match="different MRs"):
            diff_annotations(a, b)
