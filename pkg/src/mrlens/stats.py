"""Nonparametric statistics, collinearity filters, bootstrap splits, and rank
comparison used throughout the analysis pipeline.

Everything here is pure and deterministic: random sources are explicit seeded
generators passed by the caller, never module-level state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UndefinedStatisticError

log = logging.getLogger(__name__)

# Effect-size cuts. Cliff-style deltas: negligible/small/medium/large;
# rank correlations: weak/moderate/strong; top-k overlap reuses the
# negligible/small/medium/large vocabulary on quartile cuts.
CLIFFS_CUTS = (0.147, 0.33, 0.474)
KENDALL_CUTS = (0.3, 0.6)
TOPK_CUTS = (0.25, 0.50, 0.75)

EXACT_WILCOXON_MAX_N = 25


@dataclass(frozen=True)
class EffectSizeLabel:
    value: float
    magnitude: str


@dataclass(frozen=True)
class RankEntry:
    name: str
    rank: int
    score: float


@dataclass(frozen=True)
class RankTable:
    entries: tuple[RankEntry, ...]

    def __post_init__(self) -> None:
        names = [e.name for e in self.entries]
        if len(names) != len(set(names)):
            raise DomainError("rank table has duplicate item names")
        ranks = sorted({e.rank for e in self.entries})
        if self.entries and ranks != list(range(1, len(ranks) + 1)):
            raise DomainError(f"ranks are not contiguous from 1: {ranks}")

    def names(self) -> set[str]:
        return {e.name for e in self.entries}

    def rank_of(self, name: str) -> int:
        for e in self.entries:
            if e.name == name:
                return e.rank
        raise KeyError(name)

    def restricted_to(self, names: set[str]) -> "RankTable":
        """Keep only `names`, re-densifying ranks to stay contiguous."""
        kept = [e for e in self.entries if e.name in names]
        old_ranks = sorted({e.rank for e in kept})
        remap = {r: i + 1 for i, r in enumerate(old_ranks)}
        return RankTable(
            entries=tuple(RankEntry(e.name, remap[e.rank], e.score) for e in kept)
        )


def label_cliffs(value: float) -> EffectSizeLabel:
    a = abs(value)
    if a <= CLIFFS_CUTS[0]:
        mag = "negligible"
    elif a <= CLIFFS_CUTS[1]:
        mag = "small"
    elif a <= CLIFFS_CUTS[2]:
        mag = "medium"
    else:
        mag = "large"
    return EffectSizeLabel(value, mag)


def label_kendall(value: float) -> EffectSizeLabel:
    a = abs(value)
    if a <= KENDALL_CUTS[0]:
        mag = "weak"
    elif a <= KENDALL_CUTS[1]:
        mag = "moderate"
    else:
        mag = "strong"
    return EffectSizeLabel(value, mag)


def label_topk(value: float) -> EffectSizeLabel:
    # The published scale starts above zero; an empty overlap is reported
    # as negligible as well.
    if value <= TOPK_CUTS[0]:
        mag = "negligible"
    elif value <= TOPK_CUTS[1]:
        mag = "small"
    elif value <= TOPK_CUTS[2]:
        mag = "medium"
    else:
        mag = "large"
    return EffectSizeLabel(value, mag)


def midranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based); tied values share the mean of their positions."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rho: Pearson correlation of mid-ranks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("spearman requires two equal-length vectors")
    if len(x) < 2:
        raise DomainError("spearman requires length >= 2")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedStatisticError("spearman undefined for a constant vector")
    rx, ry = midranks(x), midranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float(np.dot(rx, ry) / math.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))


def kendall_tau_b(x, y) -> float:
    """Tie-corrected Kendall rank correlation between two value vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("kendall_tau_b requires two equal-length vectors")
    n = len(x)
    concordant = discordant = 0
    ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2

    def tie_term(v: np.ndarray) -> int:
        _, counts = np.unique(v, return_counts=True)
        return int(sum(c * (c - 1) // 2 for c in counts))

    n1, n2 = tie_term(x), tie_term(y)
    denom = math.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0:
        # A fully tied vector: identical constant rankings are in total
        # agreement, anything else carries no ordering signal.
        both_constant = n0 == n1 and n0 == n2
        return 1.0 if both_constant else 0.0
    return float((concordant - discordant) / denom)


def cliffs_delta(a, b) -> EffectSizeLabel:
    """Cliff's delta: (#{a_i > b_j} - #{a_i < b_j}) / (|a| * |b|)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise DomainError("cliffs_delta requires non-empty vectors")
    diff = a[:, None] - b[None, :]
    delta = float((np.sum(diff > 0) - np.sum(diff < 0)) / (len(a) * len(b)))
    return label_cliffs(delta)


def cohens_d(a, b) -> float:
    """Mean difference over pooled sample standard deviation."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise DomainError("cohens_d requires length >= 2 on both sides")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    pooled = ((len(a) - 1) * va + (len(b) - 1) * vb) / (len(a) + len(b) - 2)
    if pooled == 0:
        raise UndefinedStatisticError("cohens_d undefined: zero pooled variance")
    return float((a.mean() - b.mean()) / math.sqrt(pooled))


@dataclass(frozen=True)
class WilcoxonResult:
    p_value: float
    significant: bool
    statistic: float
    n_nonzero: int


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wilcoxon_signed_rank(a, b, alpha: float = 0.05) -> WilcoxonResult:
    """Two-sided paired signed-rank test.

    Zero differences are dropped and tied absolute differences mid-ranked.
    The null distribution is exact (dynamic program over achievable rank
    sums) up to n = 25 nonzero pairs, normal approximation with tie and
    continuity corrections above. All-zero differences give p = 1.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("wilcoxon_signed_rank requires paired equal-length vectors")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return WilcoxonResult(p_value=1.0, significant=False, statistic=0.0, n_nonzero=0)
    ranks = midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())

    if n <= EXACT_WILCOXON_MAX_N:
        p = _wilcoxon_exact_p(ranks, w_plus)
    else:
        mean = n * (n + 1) / 4.0
        _, counts = np.unique(np.abs(d), return_counts=True)
        tie_corr = sum(c**3 - c for c in counts) / 48.0
        var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_corr
        if var <= 0:
            p = 1.0
        else:
            shift = w_plus - mean
            z = (shift - 0.5 * math.copysign(1.0, shift)) / math.sqrt(var) if shift != 0 else 0.0
            p = min(1.0, 2.0 * _normal_sf(abs(z)))
    return WilcoxonResult(p_value=p, significant=p <= alpha, statistic=w_plus, n_nonzero=n)


def _wilcoxon_exact_p(ranks: np.ndarray, w_plus: float) -> float:
    # Mid-ranks are multiples of 0.5; double them so subset sums are integers.
    doubled = np.rint(2 * ranks).astype(int)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=float)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    counts /= 2.0 ** len(doubled)
    w2 = int(round(2 * w_plus))
    p_le = float(counts[: w2 + 1].sum())
    p_ge = float(counts[w2:].sum())
    return min(1.0, 2.0 * min(p_le, p_ge))


def rank_sum_test(a, b) -> float:
    """Two-sided Wilcoxon rank-sum p-value (normal approximation, tie- and
    continuity-corrected). Used as the split test inside scott_knott_esd."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = len(a), len(b)
    if na == 0 or nb == 0:
        raise DomainError("rank_sum_test requires non-empty samples")
    combined = np.concatenate([a, b])
    ranks = midranks(combined)
    w = float(ranks[:na].sum())
    n = na + nb
    mean = na * (n + 1) / 2.0
    _, counts = np.unique(combined, return_counts=True)
    tie_corr = sum(c**3 - c for c in counts) / (n * (n - 1))
    var = na * nb / 12.0 * ((n + 1) - tie_corr)
    if var <= 0:
        return 1.0
    shift = w - mean
    z = (shift - 0.5 * math.copysign(1.0, shift)) / math.sqrt(var) if shift != 0 else 0.0
    return min(1.0, 2.0 * _normal_sf(abs(z)))


def scott_knott_esd(
    groups: dict[str, np.ndarray],
    alpha: float = 0.05,
    negligible: float = CLIFFS_CUTS[0],
) -> RankTable:
    """Rank treatment groups into non-overlapping clusters.

    Groups are ordered by mean (rank 1 = highest mean), recursively split at
    the point maximizing between-group sum of squares when a two-sided
    rank-sum test across the split gives p <= alpha, then adjacent clusters
    whose Cohen's d is negligible are merged back. Insertion order of
    `groups` never affects the result.
    """
    if len(groups) < 1:
        raise DomainError("scott_knott_esd requires at least one group")
    arrays: dict[str, np.ndarray] = {}
    for name, v in groups.items():
        v = np.asarray(v, dtype=float)
        if len(v) < 2:
            raise DomainError(f"group {name!r} has fewer than 2 observations")
        arrays[name] = v
    ordered = sorted(arrays, key=lambda nm: (-arrays[nm].mean(), nm))

    def split(names: list[str]) -> list[list[str]]:
        if len(names) == 1:
            return [names]
        obs = [arrays[nm] for nm in names]
        all_values = np.concatenate(obs)
        grand = all_values.mean()
        best_bss, best_i = -1.0, -1
        for i in range(1, len(names)):
            left = np.concatenate(obs[:i])
            right = np.concatenate(obs[i:])
            bss = len(left) * (left.mean() - grand) ** 2 + len(right) * (right.mean() - grand) ** 2
            if bss > best_bss + 1e-12:
                best_bss, best_i = bss, i
        left = np.concatenate(obs[:best_i])
        right = np.concatenate(obs[best_i:])
        if rank_sum_test(left, right) <= alpha:
            return split(names[:best_i]) + split(names[best_i:])
        return [names]

    clusters = split(list(ordered))

    # ESD pass: merge adjacent clusters that differ only negligibly.
    merged: list[list[str]] = [clusters[0]]
    for cluster in clusters[1:]:
        prev = np.concatenate([arrays[nm] for nm in merged[-1]])
        cur = np.concatenate([arrays[nm] for nm in cluster])
        try:
            d = abs(cohens_d(prev, cur))
        except UndefinedStatisticError:
            d = 0.0 if prev.mean() == cur.mean() else math.inf
        if d <= negligible:
            merged[-1] = merged[-1] + cluster
        else:
            merged.append(cluster)

    entries: list[RankEntry] = []
    for rank, cluster in enumerate(merged, start=1):
        for nm in cluster:
            entries.append(RankEntry(name=nm, rank=rank, score=float(arrays[nm].mean())))
    entries.sort(key=lambda e: (e.rank, -e.score, e.name))
    return RankTable(entries=tuple(entries))


def kendall_tau(a: RankTable, b: RankTable) -> EffectSizeLabel:
    """Tau-b between two rank tables over the same item set."""
    if a.names() != b.names():
        raise DomainError(
            f"rank tables cover different items: {sorted(a.names() ^ b.names())}"
        )
    names = sorted(a.names())
    ra = np.array([a.rank_of(nm) for nm in names], dtype=float)
    rb = np.array([b.rank_of(nm) for nm in names], dtype=float)
    return label_kendall(kendall_tau_b(ra, rb))


def top_k_items(table: RankTable, k: int) -> list[str]:
    """Deterministic top-k: rank ascending, then score descending, then name."""
    if k > len(table.entries):
        raise DomainError(f"k={k} exceeds item count {len(table.entries)}")
    ordered = sorted(table.entries, key=lambda e: (e.rank, -e.score, e.name))
    return [e.name for e in ordered[:k]]


def topk_overlap(a: RankTable, b: RankTable, k: int) -> EffectSizeLabel:
    """Jaccard overlap of the two tables' top-k item sets."""
    sa, sb = set(top_k_items(a, k)), set(top_k_items(b, k))
    value = len(sa & sb) / len(sa | sb)
    return label_topk(value)


def improvement_factor(m_without: float, m_with: float, direction: str) -> float:
    """Ratio quantifying how much removing deviations helped (> 1 = helped).

    For lower-is-better metrics both medians must lie in [0, 1] and the
    ratio is (1 - m_without) / (1 - m_with); for higher-is-better it is
    m_without / m_with.
    """
    if direction == "lower_better":
        if not (0 <= m_without <= 1 and 0 <= m_with <= 1):
            raise DomainError("lower_better requires both values in [0, 1]")
        if m_with == 1:
            raise UndefinedStatisticError("improvement factor undefined: denominator 0")
        return (1.0 - m_without) / (1.0 - m_with)
    if direction == "higher_better":
        if m_with <= 0:
            raise DomainError("higher_better requires m_with > 0")
        return m_without / m_with
    raise DomainError(f"unknown direction {direction!r}")


def bootstrap_split(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Out-of-sample bootstrap: n draws with replacement for training and the
    never-drawn indices for testing; redraws (logged) if the test side is empty."""
    if n < 2:
        raise DomainError("bootstrap_split requires n >= 2")
    rng = np.random.default_rng(seed)
    while True:
        train = rng.integers(0, n, size=n)
        oob = np.setdiff1d(np.arange(n), train)
        if len(oob) > 0:
            return train, oob
        log.info("bootstrap_split(seed=%d): empty out-of-bag sample, redrawing", seed)


@dataclass(frozen=True)
class RemovalLogEntry:
    dropped: str
    cause: str
    statistic: float


def _spearman_or_zero(x: np.ndarray, y: np.ndarray) -> float:
    # Constant columns carry no monotone association; treat as uncorrelated
    # here and leave their removal to the redundancy filter.
    if np.all(x == x[0]) or np.all(y == y[0]):
        return 0.0
    return spearman(x, y)


def correlation_filter(
    names: list[str], X: np.ndarray, threshold: float = 0.70
) -> tuple[list[str], list[RemovalLogEntry]]:
    """Iteratively break up feature pairs with |Spearman rho| above `threshold`.

    From the worst pair, the feature with the higher mean |rho| against all
    remaining features is dropped (ties go to the lexicographically later
    name). Returns surviving names and the per-drop log.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise DomainError("correlation_filter requires >= 2 rows")
    kept = list(names)
    cols = {nm: X[:, i] for i, nm in enumerate(names)}
    removals: list[RemovalLogEntry] = []
    while len(kept) > 1:
        p = len(kept)
        rho = np.zeros((p, p))
        for i in range(p):
            for j in range(i + 1, p):
                r = _spearman_or_zero(cols[kept[i]], cols[kept[j]])
                rho[i, j] = rho[j, i] = r
        abs_rho = np.abs(rho)
        worst = np.unravel_index(np.argmax(abs_rho), abs_rho.shape)
        if abs_rho[worst] <= threshold:
            break
        i, j = worst
        mean_i = abs_rho[i].sum() / (p - 1)
        mean_j = abs_rho[j].sum() / (p - 1)
        if mean_i > mean_j:
            drop_idx = i
        elif mean_j > mean_i:
            drop_idx = j
        else:
            drop_idx = i if kept[i] > kept[j] else j
        other = j if drop_idx == i else i
        removals.append(
            RemovalLogEntry(
                dropped=kept[drop_idx],
                cause=f"|rho|={abs_rho[i, j]:.4f} with {kept[other]}",
                statistic=float(rho[i, j]),
            )
        )
        kept.pop(drop_idx)
    return kept, removals


def _r_squared(y: np.ndarray, others: np.ndarray) -> float:
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        return 1.0  # constant feature is fully explained by the intercept
    A = np.column_stack([np.ones(len(y)), others])
    # Tiny ridge jitter keeps rank-deficient designs solvable.
    gram = A.T @ A + 1e-8 * np.eye(A.shape[1])
    beta = np.linalg.solve(gram, A.T @ y)
    resid = y - A @ beta
    return float(1.0 - np.sum(resid**2) / ss_tot)


def redundancy_filter(
    names: list[str], X: np.ndarray, r2_threshold: float = 0.90
) -> tuple[list[str], list[RemovalLogEntry]]:
    """Drop features that ordinary least squares explains from the rest with
    R^2 at or above `r2_threshold`, worst first, until none qualify."""
    X = np.asarray(X, dtype=float)
    kept = list(names)
    cols = {nm: X[:, i] for i, nm in enumerate(names)}
    removals: list[RemovalLogEntry] = []
    while len(kept) > 1:
        r2 = {}
        for nm in kept:
            others = np.column_stack([cols[o] for o in kept if o != nm])
            r2[nm] = _r_squared(cols[nm], others)
        best = max(r2.values())
        if best < r2_threshold:
            break
        candidates = sorted(nm for nm, v in r2.items() if v >= best - 1e-12)
        drop = candidates[-1]
        removals.append(
            RemovalLogEntry(
                dropped=drop,
                cause=f"R^2={r2[drop]:.4f} against remaining features",
                statistic=float(r2[drop]),
            )
        )
        kept.remove(drop)
    return kept, removals
