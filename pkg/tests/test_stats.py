"""Statistics against brute-force oracles, plus the documented fixtures."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrlens.errors import DomainError, UndefinedStatisticError
from mrlens.stats import (
    RankEntry,
    RankTable,
    bootstrap_split,
    cliffs_delta,
    cohens_d,
    correlation_filter,
    improvement_factor,
    kendall_tau,
    kendall_tau_b,
    label_topk,
    redundancy_filter,
    scott_knott_esd,
    spearman,
    top_k_items,
    topk_overlap,
    wilcoxon_signed_rank,
)

import oracles

finite_floats = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


def table(ranks: dict[str, int], scores: dict[str, float] | None = None) -> RankTable:
    scores = scores or {}
    return RankTable(
        entries=tuple(
            RankEntry(name=k, rank=v, score=scores.get(k, 0.0))
            for k, v in ranks.items()
        )
    )


class TestSpearman:
    def test_identity(self):
        assert spearman([1, 5, 9], [1, 5, 9]) == pytest.approx(1.0)

    def test_reversal(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_worked_example(self):
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_constant_vector_undefined(self):
        with pytest.raises(UndefinedStatisticError):
            spearman([1, 1, 1], [1, 2, 3])

    def test_matches_reference_on_ties(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            x = rng.integers(0, 5, 12).astype(float)
            y = rng.integers(0, 5, 12).astype(float)
            if np.all(x == x[0]) or np.all(y == y[0]):
                continue
            assert spearman(x, y) == pytest.approx(
                oracles.spearman_reference(list(x), list(y)), abs=1e-9
            )


class TestKendall:
    def test_worked_example(self):
        assert kendall_tau_b([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(4 / 6)

    def test_identical_tables_tau_one_strong(self):
        t = table({"a": 1, "b": 2, "c": 3})
        label = kendall_tau(t, t)
        assert label.value == pytest.approx(1.0)
        assert label.magnitude == "strong"

    def test_reversed_tables(self):
        a = table({"a": 1, "b": 2, "c": 3})
        b = table({"a": 3, "b": 2, "c": 1})
        assert kendall_tau(a, b).value == pytest.approx(-1.0)

    def test_item_mismatch_rejected(self):
        with pytest.raises(DomainError):
            kendall_tau(table({"a": 1}), table({"b": 1}))

    def test_all_tied_identical_is_one(self):
        t = table({"a": 1, "b": 1, "c": 1})
        assert kendall_tau(t, t).value == 1.0

    def test_rank_invariance_under_monotone_transform(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=20)
        y = np.exp(x)  # strictly increasing transform
        assert kendall_tau_b(x, y) == pytest.approx(1.0)
        assert spearman(x, y) == pytest.approx(1.0)

    def test_sign_agreement_with_spearman(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = rng.normal(size=30)
            y = 0.8 * x + 0.2 * rng.normal(size=30)
            assert np.sign(kendall_tau_b(x, y)) == np.sign(spearman(x, y))


class TestCliffsDelta:
    def test_identical_constant(self):
        label = cliffs_delta([2, 2], [2, 2])
        assert label.value == 0.0
        assert label.magnitude == "negligible"

    def test_complete_separation(self):
        label = cliffs_delta([10, 11], [1, 2])
        assert label.value == 1.0
        assert label.magnitude == "large"

    def test_worked_example(self):
        label = cliffs_delta([1, 2, 3], [2, 3, 4])
        assert label.value == pytest.approx(-5 / 9)
        assert label.magnitude == "large"

    @settings(max_examples=60, deadline=None)
    @given(
        a=st.lists(finite_floats, min_size=1, max_size=12),
        b=st.lists(finite_floats, min_size=1, max_size=12),
    )
    def test_antisymmetric_bounded_matches_bruteforce(self, a, b):
        d_ab = cliffs_delta(a, b).value
        d_ba = cliffs_delta(b, a).value
        assert d_ab == pytest.approx(-d_ba, abs=1e-12)
        assert -1.0 <= d_ab <= 1.0
        assert d_ab == pytest.approx(oracles.cliffs_delta_reference(a, b), abs=1e-12)


class TestCohensD:
    def test_equal_vectors(self):
        assert cohens_d([1, 2, 3], [1, 2, 3]) == 0.0

    def test_worked_example(self):
        assert cohens_d([1, 2, 3], [4, 5, 6]) == pytest.approx(-3.0)

    def test_tiny_shift_negligible(self):
        a = np.linspace(0, 1, 50)
        b = a + 0.01
        assert abs(cohens_d(a, b)) <= 0.147

    def test_zero_variance_undefined(self):
        with pytest.raises(UndefinedStatisticError):
            cohens_d([1, 1], [1, 1])


class TestWilcoxon:
    def test_equal_vectors_p_one(self):
        r = wilcoxon_signed_rank([1, 2, 3], [1, 2, 3])
        assert r.p_value == 1.0
        assert not r.significant

    def test_all_positive_n8(self):
        a = [float(i + 10) for i in range(8)]
        b = [float(i) for i in range(8)]
        r = wilcoxon_signed_rank(a, b)
        assert r.p_value == pytest.approx(2 / 256, abs=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(DomainError):
            wilcoxon_signed_rank([1, 2], [1, 2, 3])

    def test_shifted_normal_significant(self):
        rng = np.random.default_rng(7)
        a = rng.normal(0.5, 1.0, 100)
        b = rng.normal(0.0, 1.0, 100)
        assert wilcoxon_signed_rank(a, b).p_value <= 0.05

    def test_exact_matches_enumeration(self):
        rng = np.random.default_rng(3)
        for n in range(2, 11):
            for _ in range(5):
                a = list(np.round(rng.normal(size=n), 2))
                b = list(np.round(rng.normal(size=n), 2))
                got = wilcoxon_signed_rank(a, b).p_value
                want = oracles.wilcoxon_exact_reference(a, b)
                assert got == pytest.approx(want, abs=1e-9), (a, b)

    def test_normal_approximation_reasonable(self):
        # Above the exact cutoff the approximation should stay close to the
        # exact tail computed by the dynamic program at n=25.
        rng = np.random.default_rng(11)
        a = rng.normal(0.3, 1.0, 26)
        b = rng.normal(0.0, 1.0, 26)
        p = wilcoxon_signed_rank(a, b).p_value
        assert 0.0 <= p <= 1.0


class TestScottKnott:
    def test_identical_groups_single_rank(self):
        groups = {f"g{i}": np.full(10, 3.3) for i in range(5)}
        t = scott_knott_esd(groups)
        assert {e.rank for e in t.entries} == {1}

    def test_two_separated_groups(self):
        rng = np.random.default_rng(5)
        t = scott_knott_esd(
            {"lo": rng.normal(0, 0.01, 50), "hi": rng.normal(10, 0.01, 50)}
        )
        assert t.rank_of("hi") == 1
        assert t.rank_of("lo") == 2

    def test_esd_merge_fixture(self):
        # Sample pattern with mean exactly 0 and sample sd exactly 0.01, so
        # the b-vs-c effect size is exactly 0.001 / 0.01 = 0.1 < 0.147.
        pattern = np.linspace(-1.0, 1.0, 50)
        pattern = (pattern - pattern.mean()) / pattern.std(ddof=1) * 0.01
        groups = {
            "a": 0.0 + pattern,
            "b": 1.000 + pattern,
            "c": 1.001 + pattern,
        }
        assert abs(cohens_d(groups["c"], groups["b"])) == pytest.approx(0.1)
        t = scott_knott_esd(groups)
        assert t.rank_of("b") == 1
        assert t.rank_of("c") == 1
        assert t.rank_of("a") == 2

    def test_permutation_invariance(self):
        rng = np.random.default_rng(9)
        base = {nm: rng.normal(mu, 1.0, 30) for nm, mu in
                [("a", 0.0), ("b", 1.5), ("c", 3.0), ("d", 3.1)]}
        results = set()
        for perm in itertools.permutations(base):
            t = scott_knott_esd({k: base[k] for k in perm})
            results.add(tuple(sorted((e.name, e.rank) for e in t.entries)))
        assert len(results) == 1

    def test_rank_isomorphic_to_means(self):
        rng = np.random.default_rng(13)
        groups = {f"g{i}": rng.normal(i * 0.8, 0.5, 40) for i in range(6)}
        t = scott_knott_esd(groups)
        ordered = sorted(t.entries, key=lambda e: -e.score)
        ranks = [e.rank for e in ordered]
        assert ranks == sorted(ranks)

    def test_no_groups_rejected(self):
        with pytest.raises(DomainError):
            scott_knott_esd({})

    def test_short_group_rejected(self):
        with pytest.raises(DomainError):
            scott_knott_esd({"a": np.array([1.0])})


class TestTopK:
    def test_identical_top3(self):
        t = table({"a": 1, "b": 2, "c": 3, "d": 4})
        label = topk_overlap(t, t, 3)
        assert label.value == 1.0
        assert label.magnitude == "large"

    def test_disjoint_top3(self):
        a = table({"a": 1, "b": 2, "c": 3, "x": 4, "y": 5, "z": 6})
        b = table({"a": 4, "b": 5, "c": 6, "x": 1, "y": 2, "z": 3})
        assert topk_overlap(a, b, 3).value == 0.0

    def test_dp_worked_example(self):
        a = table(
            {"title length": 1, "description length": 2, "associated sprint": 3,
             "number of commits": 4, "number of historical open MRs": 5}
        )
        b = table(
            {"number of commits": 1, "associated sprint": 2,
             "number of historical open MRs": 3, "title length": 4,
             "description length": 5}
        )
        label = topk_overlap(a, b, 3)
        assert label.value == pytest.approx(0.2)

    def test_value_lattice_and_symmetry(self):
        rng = np.random.default_rng(4)
        names = [f"f{i}" for i in range(8)]
        for k in (1, 3, 5):
            allowed = {i / (2 * k - i) for i in range(k + 1)}
            for _ in range(20):
                ra = {nm: i + 1 for i, nm in enumerate(rng.permutation(names))}
                rb = {nm: i + 1 for i, nm in enumerate(rng.permutation(names))}
                a, b = table(ra), table(rb)
                va, vb = topk_overlap(a, b, k).value, topk_overlap(b, a, k).value
                assert va == vb
                assert any(va == pytest.approx(x) for x in allowed)

    def test_tie_break_by_score_then_name(self):
        a = table({"a": 1, "b": 1, "c": 1}, scores={"a": 0.1, "b": 0.5, "c": 0.5})
        assert top_k_items(a, 1) == ["b"]
        b = table({"a": 1, "b": 1, "c": 1}, scores={"a": 0.5, "b": 0.5, "c": 0.5})
        assert top_k_items(b, 2) == ["a", "b"]

    def test_k_too_large_rejected(self):
        with pytest.raises(DomainError):
            topk_overlap(table({"a": 1}), table({"a": 1}), 2)

    def test_zero_labelled_negligible(self):
        assert label_topk(0.0).magnitude == "negligible"


class TestImprovementFactor:
    def test_mse_worked_example(self):
        assert improvement_factor(0.2, 0.5, "lower_better") == pytest.approx(1.6)

    def test_sa_worked_example(self):
        # SA improving from 0.4 (with deviations) to 0.8 (without) is 2x.
        assert improvement_factor(0.8, 0.4, "higher_better") == pytest.approx(2.0)

    def test_equal_medians(self):
        assert improvement_factor(0.3, 0.3, "lower_better") == 1.0
        assert improvement_factor(0.3, 0.3, "higher_better") == 1.0

    def test_out_of_domain_rejected(self):
        with pytest.raises(DomainError):
            improvement_factor(1.2, 0.5, "lower_better")
        with pytest.raises(DomainError):
            improvement_factor(0.5, 0.0, "higher_better")

    def test_degenerate_denominator(self):
        with pytest.raises(UndefinedStatisticError):
            improvement_factor(0.2, 1.0, "lower_better")


class TestBootstrapSplit:
    def test_oob_fraction(self):
        train, oob = bootstrap_split(1000, seed=5)
        assert len(train) == 1000
        assert abs(len(oob) - 368) < 30

    def test_deterministic(self):
        t1, o1 = bootstrap_split(100, seed=9)
        t2, o2 = bootstrap_split(100, seed=9)
        assert np.array_equal(t1, t2)
        assert np.array_equal(o1, o2)

    def test_minimum_population(self):
        train, oob = bootstrap_split(2, seed=1)
        assert len(train) == 2
        assert len(oob) >= 1

    def test_disjoint(self):
        train, oob = bootstrap_split(50, seed=3)
        assert set(train).isdisjoint(set(oob))

    def test_too_small_rejected(self):
        with pytest.raises(DomainError):
            bootstrap_split(1, seed=0)


class TestCorrelationFilter:
    def test_duplicate_column_removed(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=100)
        X = np.column_stack([x, x, rng.normal(size=100)])
        kept, log = correlation_filter(["a", "b", "c"], X)
        assert len(kept) == 2
        assert "c" in kept
        assert len(log) == 1

    def test_independent_columns_survive(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(200, 6))
        kept, log = correlation_filter([f"f{i}" for i in range(6)], X)
        assert len(kept) == 6
        assert log == []

    def test_correlated_chain_collapses(self):
        rng = np.random.default_rng(10)
        a = rng.normal(size=300)
        b = a + 0.1 * rng.normal(size=300)
        c = a + 0.1 * rng.normal(size=300)
        X = np.column_stack([a, b, c])
        kept, log = correlation_filter(["a", "b", "c"], X)
        assert len(kept) <= 2
        # survivors are pairwise below the threshold
        for i, n1 in enumerate(kept):
            for n2 in kept[i + 1:]:
                cols = {"a": a, "b": b, "c": c}
                assert abs(spearman(cols[n1], cols[n2])) <= 0.70


class TestRedundancyFilter:
    def test_exact_linear_combination_removed(self):
        rng = np.random.default_rng(12)
        a = rng.normal(size=150)
        b = rng.normal(size=150)
        X = np.column_stack([a, b, a + b])
        kept, log = redundancy_filter(["a", "b", "sum"], X)
        assert len(kept) == 2
        assert len(log) == 1

    def test_independent_columns_untouched(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(150, 5))
        kept, log = redundancy_filter([f"f{i}" for i in range(5)], X)
        assert len(kept) == 5
        assert log == []

    def test_constant_column_removed(self):
        rng = np.random.default_rng(15)
        X = np.column_stack([rng.normal(size=100), np.full(100, 3.0)])
        kept, _ = redundancy_filter(["a", "const"], X)
        assert kept == ["a"]

    def test_combined_postcondition(self):
        rng = np.random.default_rng(16)
        base = rng.normal(size=(250, 4))
        X = np.column_stack(
            [
                base,
                base[:, 0] * 0.95 + 0.05 * rng.normal(size=250),
                base[:, 1] + base[:, 2],
            ]
        )
        names = ["a", "b", "c", "d", "dup", "sum"]
        kept1, _ = correlation_filter(names, X, 0.70)
        idx = [names.index(n) for n in kept1]
        kept2, _ = redundancy_filter(kept1, X[:, idx], 0.90)
        final_idx = [names.index(n) for n in kept2]
        Xf = X[:, final_idx]
        for i in range(len(kept2)):
            for j in range(i + 1, len(kept2)):
                assert abs(spearman(Xf[:, i], Xf[:, j])) <= 0.70
