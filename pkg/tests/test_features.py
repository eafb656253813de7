"""Feature extraction: worked examples, the leakage guard, and target
normalization."""

from __future__ import annotations

import math
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrlens.corpus import Approval, CommitInfo, FileChange, Note
from mrlens.errors import NotApplicableError
from mrlens.features import (
    classifier_text,
    completion_time,
    extract_completion_features,
    extract_deviation_features,
    historical_entropy,
    history_defaults,
    normalize_target,
)

from conftest import T0, make_corpus, make_record


class TestDeviationFeatures:
    def test_churn_sums_per_file_counts(self):
        record = make_record(
            files=(
                FileChange(path="a.py", additions=10, deletions=3),
                FileChange(path="b.py", additions=0, deletions=7),
            )
        )
        v = extract_deviation_features(record)
        assert v.additions == 10
        assert v.deletions == 10
        assert v.code_churn == 20
        assert v.code_churn == v.additions + v.deletions

    def test_no_notes_means_no_first_review(self):
        v = extract_deviation_features(make_record())
        assert v.n_comments == 0
        assert v.time_to_first_review is None

    def test_instant_merge_zero_duration(self):
        v = extract_deviation_features(make_record(merged_after_hours=0.0))
        assert v.review_duration == 0.0

    def test_unmerged_has_no_duration(self):
        v = extract_deviation_features(make_record(state="open"))
        assert v.review_duration is None

    def test_system_notes_not_counted_as_comments(self):
        record = make_record(
            notes=(
                Note(author=1, body="assigned", created_at=T0 + timedelta(hours=1), is_system=True),
                Note(author=9, body="why this way?", created_at=T0 + timedelta(hours=2)),
            )
        )
        v = extract_deviation_features(record)
        assert v.n_comments == 1
        assert v.reviewer_comments == ("why this way?",)
        assert v.time_to_first_review == 2.0

    def test_author_comment_not_a_review(self):
        record = make_record(
            notes=(Note(author=7, body="self note", created_at=T0 + timedelta(hours=1)),)
        )
        v = extract_deviation_features(record)
        assert v.n_comments == 1
        assert v.time_to_first_review is None
        assert v.reviewer_participation == 0

    def test_file_types_collected(self):
        record = make_record(
            files=(
                FileChange(path="docs/guide.md", additions=1, deletions=0),
                FileChange(path="src/a.py", additions=1, deletions=0),
                FileChange(path="Makefile", additions=1, deletions=0),
            )
        )
        v = extract_deviation_features(record)
        assert v.file_types == frozenset({".md", ".py", ""})


class TestCompletionTime:
    def test_full_day(self):
        assert completion_time(make_record(merged_after_hours=24.0)) == 24.0

    def test_boundary_zero(self):
        assert completion_time(make_record(merged_after_hours=0.0)) == 0.0

    def test_timestamp_subtraction(self):
        record = make_record(
            created_at=datetime(2024, 1, 1, tzinfo=timezone.utc),
            merged_after_hours=60.5,
        )
        assert record.merged_at == datetime(2024, 1, 3, 12, 30, tzinfo=timezone.utc)
        assert completion_time(record) == 60.5

    def test_unmerged_not_applicable(self):
        with pytest.raises(NotApplicableError):
            completion_time(make_record(state="open"))


class TestHistoricalEntropy:
    def test_single_file_zero(self):
        assert historical_entropy([("a.py", 10)]) == 0.0

    def test_two_equal_files_one(self):
        assert historical_entropy([("a.py", 5), ("b.py", 5)]) == 1.0

    def test_three_one_split(self):
        value = historical_entropy([("a.py", 3), ("b.py", 1)])
        expected = -(0.75 * math.log2(0.75) + 0.25 * math.log2(0.25))
        assert value == pytest.approx(expected, abs=1e-9)
        assert value == pytest.approx(0.8113, abs=1e-4)

    def test_zero_total_churn(self):
        assert historical_entropy([("a.py", 0), ("b.py", 0)]) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(
        churns=st.lists(
            st.tuples(st.sampled_from("abcdef"), st.integers(0, 100)),
            min_size=1,
            max_size=10,
        )
    )
    def test_bounds_and_permutation_invariance(self, churns):
        value = historical_entropy(churns)
        assert 0.0 <= value <= 1.0 + 1e-12
        assert historical_entropy(list(reversed(churns))) == pytest.approx(value)


class TestCompletionFeatures:
    def test_first_ever_mr_gets_defaults(self, small_corpus):
        record = small_corpus.records[0]
        defaults = history_defaults(small_corpus)
        v = extract_completion_features(record, small_corpus, defaults)
        assert v.n_authored_commits == 0
        assert v.avg_historical_approval_hours == defaults.approval_hours
        assert v.n_open_mrs_history == 0

    def test_historical_approval_average(self):
        h1 = make_record(
            mr_id=1,
            created_at=T0,
            approvals=(Approval(author=9, approved_at=T0 + timedelta(hours=10)),),
        )
        h2 = make_record(
            mr_id=2,
            created_at=T0 + timedelta(hours=1),
            approvals=(Approval(author=9, approved_at=T0 + timedelta(hours=31)),),
        )
        focal = make_record(mr_id=3, created_at=T0 + timedelta(hours=100))
        corpus = make_corpus([h1, h2, focal])
        v = extract_completion_features(focal, corpus)
        assert v.avg_historical_approval_hours == pytest.approx(20.0)

    def test_tag_detection(self):
        record = make_record(description="fix #42 @alice")
        corpus = make_corpus([record])
        v = extract_completion_features(record, corpus)
        assert v.is_hashtag is True
        assert v.is_at_tag is True

    def test_no_tags(self):
        record = make_record(description="plain words only")
        corpus = make_corpus([record])
        v = extract_completion_features(record, corpus)
        assert v.is_hashtag is False
        assert v.is_at_tag is False

    def test_major_minor_contributor_split(self):
        # author 1 contributes 96 lines of 100 prior churn, author 2 only 4
        h1 = make_record(
            mr_id=1, author=1, created_at=T0,
            files=(FileChange(path="a.py", additions=90, deletions=6),),
        )
        h2 = make_record(
            mr_id=2, author=2, created_at=T0 + timedelta(hours=1),
            files=(FileChange(path="b.py", additions=2, deletions=2),),
        )
        focal = make_record(mr_id=3, created_at=T0 + timedelta(hours=50))
        corpus = make_corpus([h1, h2, focal])
        v = extract_completion_features(focal, corpus)
        assert v.n_major_contributors == 1
        assert v.n_minor_contributors == 1

    def test_sprint_from_milestone_else_iso_week(self):
        with_milestone = make_record(mr_id=1, milestone_id=42)
        v1 = extract_completion_features(with_milestone, make_corpus([with_milestone]))
        assert v1.associated_sprint == 42
        bare = make_record(mr_id=2, created_at=datetime(2024, 1, 8, tzinfo=timezone.utc))
        v2 = extract_completion_features(bare, make_corpus([bare]))
        assert v2.associated_sprint == 202402  # second ISO week of 2024

    def test_leakage_guard(self):
        """Perturbing post-creation events of the focal MR changes nothing."""
        base = make_record(mr_id=5, created_at=T0 + timedelta(days=2))
        history = [
            make_record(mr_id=i, created_at=T0 + timedelta(hours=i)) for i in range(1, 4)
        ]
        corpus = make_corpus(history + [base])
        v_before = extract_completion_features(base, corpus)

        perturbed = make_record(
            mr_id=5,
            created_at=T0 + timedelta(days=2),
            merged_after_hours=999.0,
            notes=(
                Note(author=9, body="late reply", created_at=T0 + timedelta(days=30)),
            ),
            approvals=(
                Approval(author=9, approved_at=T0 + timedelta(days=31)),
            ),
            commits=(
                CommitInfo(
                    sha="pre-1",
                    message="initial",
                    author=7,
                    committed_at=T0 + timedelta(days=1),
                ),
                CommitInfo(
                    sha="post-1",
                    message="late fixup",
                    author=7,
                    committed_at=T0 + timedelta(days=40),
                ),
            ),
        )
        base_commits = make_record(
            mr_id=5,
            created_at=T0 + timedelta(days=2),
            commits=(
                CommitInfo(
                    sha="pre-1",
                    message="initial",
                    author=7,
                    committed_at=T0 + timedelta(days=1),
                ),
            ),
        )
        corpus2 = make_corpus(history + [perturbed])
        corpus_ref = make_corpus(history + [base_commits])
        v_ref = extract_completion_features(base_commits, corpus_ref)
        v_after = extract_completion_features(perturbed, corpus2)
        assert v_after == v_ref
        # and the original vector only differs in commit-derived fields
        assert v_before.change_churn == v_after.change_churn


class TestNormalizeTarget:
    def test_constant_population_all_zero(self):
        values, transform = normalize_target([5.0, 5.0, 5.0])
        assert [v.normalized for v in values] == [0.0, 0.0, 0.0]
        assert transform.lo == transform.hi

    def test_endpoints(self):
        values, _ = normalize_target([1.0, 10.0, 100.0])
        assert values[0].normalized == 0.0
        assert values[-1].normalized == 1.0

    def test_closed_form_points(self):
        values, _ = normalize_target([0.0, math.e - 1, math.e**2 - 1])
        assert [v.normalized for v in values] == pytest.approx([0.0, 0.5, 1.0])

    def test_invertible(self):
        hours = [0.5, 3.0, 26.0, 110.0]
        values, transform = normalize_target(hours)
        for v in values:
            assert transform.invert(v.normalized) == pytest.approx(v.raw_hours)

    @settings(max_examples=50, deadline=None)
    @given(
        hours=st.lists(
            st.floats(min_value=0, max_value=1e4, allow_nan=False), min_size=1, max_size=30
        )
    )
    def test_monotone(self, hours):
        values, _ = normalize_target(hours)
        pairs = sorted(zip(hours, [v.normalized for v in values]))
        for (h1, v1), (h2, v2) in zip(pairs, pairs[1:]):
            assert v1 <= v2 + 1e-12


class TestClassifierText:
    def test_empty_description_still_nonempty(self):
        record = make_record(description="")
        text = classifier_text(record)
        assert record.title in text
        assert "[types=" in text

    def test_deterministic(self, single_record):
        assert classifier_text(single_record) == classifier_text(single_record)

    def test_manifest_tag_present(self):
        record = make_record(
            files=(FileChange(path="package-lock.json", additions=2, deletions=2),)
        )
        assert "[types=.json]" in classifier_text(record)
        assert "[churn=1-20]" in classifier_text(record)
