"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line and enforcing its stated runtime budget.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.
"""

from __future__ import annotations

import itertools
import time
from collections import Counter

import numpy as np
import pytest

from mrlens.cli import main
from mrlens.corpus import export_archive
from mrlens.impact import ImpactConfig, run_impact
from mrlens.sampling import sample_size
from mrlens.stats import (
    RankEntry,
    RankTable,
    cliffs_delta,
    cohens_d,
    correlation_filter,
    improvement_factor,
    kendall_tau_b,
    redundancy_filter,
    scott_knott_esd,
    spearman,
    topk_overlap,
    wilcoxon_signed_rank,
)
from mrlens.synthetic import impact_scenario, injected_corpus
from mrlens.taxonomy import NORMAL_LABEL, DeviationVerdict, detect_corpus, prevalence_report

import oracles


class Budget:
    def __init__(self, name: str, seconds: float):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, exc_type, *rest):
        elapsed = time.monotonic() - self.start
        status = "PASS" if exc_type is None else "FAIL"
        print(f"[{status}] {self.name} ({elapsed:.1f}s)")
        if exc_type is None:
            assert elapsed < self.seconds, (
                f"{self.name} exceeded its {self.seconds:.0f}s budget ({elapsed:.1f}s)"
            )


def test_c1_sampling_formula():
    with Budget("sampling: reference population and Table-like spread", 1.0):
        assert sample_size(6344).final == 363
        published = {8396: 360, 7416: 359, 735: 246, 4004: 348}
        for population, printed in published.items():
            got = sample_size(population).final
            assert abs(got - printed) / printed <= 0.03, (population, got)


def test_c2_improvement_factors():
    with Budget("improvement factors: worked examples reproduce exactly", 1.0):
        assert improvement_factor(0.2, 0.5, "lower_better") == 1.6
        # a higher-is-better metric moving from 0.4 (with) to 0.8 (without)
        assert improvement_factor(0.8, 0.4, "higher_better") == 2.0


def test_c3_top3_jaccard_of_shifted_feature_sets():
    with Budget("top-3 overlap of the shifted feature sets equals 0.2", 1.0):
        before = ["title length", "description length", "associated sprint",
                  "number of commits", "number of historical open MRs"]
        after = ["number of commits", "associated sprint",
                 "number of historical open MRs", "title length",
                 "description length"]
        a = RankTable(entries=tuple(
            RankEntry(nm, i + 1, float(len(before) - i)) for i, nm in enumerate(before)
        ))
        b = RankTable(entries=tuple(
            RankEntry(nm, i + 1, float(len(after) - i)) for i, nm in enumerate(after)
        ))
        label = topk_overlap(a, b, 3)
        assert label.value == pytest.approx(0.2, abs=1e-12)


def test_c4_statistical_oracles():
    with Budget("statistics match brute-force oracles", 30.0):
        rng = np.random.default_rng(424242)
        checked = 0
        while checked < 100:
            n = int(rng.integers(5, 40))
            if checked % 2 == 0:
                x = rng.normal(size=n)
                y = 0.5 * x + rng.normal(size=n)
            else:
                x = rng.integers(0, 6, size=n).astype(float)
                y = rng.integers(0, 6, size=n).astype(float)
            if np.all(x == x[0]) or np.all(y == y[0]):
                continue
            checked += 1
            assert spearman(x, y) == pytest.approx(
                oracles.spearman_reference(list(x), list(y)), abs=1e-9
            )
            assert kendall_tau_b(x, y) == pytest.approx(
                oracles.kendall_tau_b_reference(list(x), list(y)), abs=1e-9
            )
            assert cliffs_delta(x, y).value == pytest.approx(
                oracles.cliffs_delta_reference(list(x), list(y)), abs=1e-9
            )
            if x.var(ddof=1) + y.var(ddof=1) > 0:
                assert cohens_d(x, y) == pytest.approx(
                    oracles.cohens_d_reference(list(x), list(y)), abs=1e-9
                )
        for trial in range(40):
            n = int(rng.integers(2, 11))
            a = list(np.round(rng.normal(size=n), 2))
            b = list(np.round(rng.normal(size=n), 2))
            got = wilcoxon_signed_rank(a, b).p_value
            want = oracles.wilcoxon_exact_reference(a, b)
            assert got == pytest.approx(want, abs=1e-9), (a, b)


def test_c5_scott_knott_esd():
    with Budget("Scott-Knott ESD fixtures and permutation invariance", 10.0):
        identical = {f"g{i}": np.full(12, 1.5) for i in range(4)}
        t = scott_knott_esd(identical)
        assert {e.rank for e in t.entries} == {1}

        rng = np.random.default_rng(99)
        two = {"lo": rng.normal(0, 0.01, 50), "hi": rng.normal(10, 0.01, 50)}
        t2 = scott_knott_esd(two)
        assert t2.rank_of("hi") == 1 and t2.rank_of("lo") == 2

        pattern = np.linspace(-1.0, 1.0, 50)
        pattern = (pattern - pattern.mean()) / pattern.std(ddof=1) * 0.01
        merge_groups = {
            "a": 0.0 + pattern, "b": 1.000 + pattern, "c": 1.001 + pattern
        }
        t3 = scott_knott_esd(merge_groups)
        assert (t3.rank_of("a"), t3.rank_of("b"), t3.rank_of("c")) == (2, 1, 1)

        base = {nm: rng.normal(mu, 1.0, 30) for nm, mu in
                [("a", 0), ("b", 1), ("c", 2), ("d", 2.05), ("e", 5)]}
        names = list(base)
        reference = None
        shuffles = itertools.islice(itertools.permutations(names), 20)
        for perm in shuffles:
            t = scott_knott_esd({k: base[k] for k in perm})
            outcome = tuple(sorted((e.name, e.rank) for e in t.entries))
            if reference is None:
                reference = outcome
            assert outcome == reference


def test_c6_collinearity_filters():
    with Budget("collinearity filters: removals and survivor postcondition", 30.0):
        rng = np.random.default_rng(7)
        x = rng.normal(size=200)
        X = np.column_stack([x, x, rng.normal(size=200)])
        kept, _ = correlation_filter(["a", "a_copy", "noise"], X)
        assert len(kept) == 2 and "noise" in kept

        a, b = rng.normal(size=200), rng.normal(size=200)
        kept2, _ = redundancy_filter(["a", "b", "sum"], np.column_stack([a, b, a + b]))
        assert len(kept2) == 2

        for trial in range(20):
            t_rng = np.random.default_rng(1000 + trial)
            n, p = 120, 8
            base = t_rng.normal(size=(n, p))
            extra = base[:, 0] * 0.9 + 0.1 * t_rng.normal(size=n)
            X = np.column_stack([base, extra, base[:, 1] + base[:, 2]])
            names = [f"f{i}" for i in range(p)] + ["near_dup", "lin_comb"]
            kept_a, _ = correlation_filter(names, X, 0.70)
            idx = [names.index(nm) for nm in kept_a]
            kept_b, _ = redundancy_filter(kept_a, X[:, idx], 0.90)
            fidx = [names.index(nm) for nm in kept_b]
            Xf = X[:, fidx]
            for i in range(len(kept_b)):
                for j in range(i + 1, len(kept_b)):
                    assert abs(spearman(Xf[:, i], Xf[:, j])) <= 0.70
            if len(kept_b) > 1:
                from mrlens.stats import _r_squared

                for i in range(len(kept_b)):
                    others = np.delete(Xf, i, axis=1)
                    assert _r_squared(Xf[:, i], others) < 0.90


def test_c7_detector_soundness():
    with Budget("detector: exact precision/recall on the injected corpus", 10.0):
        corpus, manifest = injected_corpus(seed=11, n_normal=700, n_per_category=50)
        verdicts = detect_corpus(corpus)
        got = Counter(v.label for v in verdicts)
        assert dict(got) == manifest  # per-category precision = recall = 1.0
        report = prevalence_report(verdicts, corpus)
        total = sum(manifest.values())
        n_dev = total - manifest[NORMAL_LABEL]
        assert report[0].n_deviations == n_dev
        assert report[0].deviation_pct == pytest.approx(100.0 * n_dev / total)
        for category, count in manifest.items():
            if category == NORMAL_LABEL:
                continue
            assert report[0].category_shares[category] == pytest.approx(
                100.0 * count / n_dev
            )


@pytest.fixture(scope="module")
def big_scenario():
    corpus, _ = impact_scenario(seed=23, n=2000)
    return corpus, detect_corpus(corpus)


def test_c8_end_to_end_impact(big_scenario):
    with Budget("end-to-end impact on the generative scenario", 300.0):
        corpus, verdicts = big_scenario
        config = ImpactConfig(n_boot=20, seed=7, n_trees=40)
        report = run_impact(corpus, verdicts, config)
        rows = report.all_rows()
        assert len(rows) == 3
        significant_mse_gains = 0
        for row in rows:
            assert row.mse.ratio > 1.0, (row.kind, row.mse.ratio)
            assert row.mae.ratio >= 1.0
            assert row.sa.ratio >= 1.0
            if row.mse.wilcoxon.p_value <= 0.05:
                significant_mse_gains += 1
        assert significant_mse_gains >= 2

        control = [
            DeviationVerdict(mr_id=r.id, matched=(), primary=None, is_deviation=False)
            for r in corpus.records
        ]
        control_report = run_impact(corpus, control, config)
        for row in control_report.all_rows():
            assert row.mse.ratio == 1.0
            assert row.mae.ratio == 1.0
            assert row.sa.ratio == 1.0
            assert row.kendall.value == 1.0
            assert row.t1.value == row.t3.value == row.t5.value == 1.0


def test_c9_impact_cli_byte_determinism(tmp_path):
    with Budget("impact command reruns byte-identically", 240.0):
        corpus, _ = impact_scenario(seed=41, n=400)
        archive = tmp_path / "c.ndjson"
        export_archive(corpus, archive)
        det_out = tmp_path / "det"
        assert main(["detect", "--corpus", str(archive), "--out", str(det_out)]) == 0
        args = [
            "impact", "--corpus", str(archive),
            "--verdicts", str(det_out / "verdicts.csv"),
            "--n-boot", "5", "--n-trees", "10", "--seed", "7",
        ]
        assert main(args + ["--out", str(tmp_path / "r1")]) == 0
        assert main(args + ["--out", str(tmp_path / "r2")]) == 0
        r1ollup = sorted((tmp_path / "r1").iterdir())
        r2ollup = sorted((tmp_path / "r2").iterdir())
        assert [p.name for p in r1ollup] == [p.name for p in r2ollup]
        for p1, p2 in zip(r1ollup, r2ollup):
            assert p1.read_bytes() == p2.read_bytes(), p1.name
