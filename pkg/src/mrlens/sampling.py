"""Statistically representative sample sizing and seeded sample drawing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import DomainError


@dataclass(frozen=True)
class SamplePlan:
    population: int
    z: float
    margin: float
    proportion: float
    unadjusted: float
    final: int


def sample_size(
    population: int, z: float = 1.96, margin: float = 0.05, proportion: float = 0.5
) -> SamplePlan:
    """Required sample size with finite population correction.

    s = z^2 * p * (1-p) / c^2, then s / (1 + (s-1)/N), rounded up. A zero
    population needs no sample.
    """
    if population < 0:
        raise DomainError("population must be >= 0")
    if not 0 < margin < 1:
        raise DomainError("margin of error must lie in (0, 1)")
    if not 0 < proportion < 1:
        raise DomainError("proportion must lie in (0, 1)")
    s = z * z * proportion * (1 - proportion) / (margin * margin)
    if population == 0:
        final = 0
    else:
        corrected = s / (1 + (s - 1) / population)
        final = min(population, math.ceil(corrected))
        final = max(final, 1)
    return SamplePlan(
        population=population,
        z=z,
        margin=margin,
        proportion=proportion,
        unadjusted=s,
        final=final,
    )


def draw_sample(
    corpus: Corpus, size: int, seed: int, stratify_by_project: bool = False
) -> list[tuple[int, int]]:
    """Uniform sample without replacement; returns (project_id, mr_id) pairs
    sorted for stable output.

    Stratified mode allocates per-project quotas proportional to project
    share using largest-remainder rounding.
    """
    universe = sorted((r.project_id, r.id) for r in corpus.records)
    if size > len(universe):
        raise DomainError(f"sample size {size} exceeds population {len(universe)}")
    rng = np.random.default_rng(seed)
    if not stratify_by_project:
        idx = rng.choice(len(universe), size=size, replace=False)
        return sorted(universe[i] for i in idx)

    by_project: dict[int, list[tuple[int, int]]] = {}
    for key in universe:
        by_project.setdefault(key[0], []).append(key)
    total = len(universe)
    quotas: dict[int, int] = {}
    remainders: list[tuple[float, int, int]] = []
    for pid in sorted(by_project):
        exact = size * len(by_project[pid]) / total
        quotas[pid] = math.floor(exact)
        remainders.append((exact - quotas[pid], len(by_project[pid]), pid))
    leftover = size - sum(quotas.values())
    # Largest remainder first; break ties toward the larger, then lower-id project.
    remainders.sort(key=lambda t: (-t[0], -t[1], t[2]))
    for frac, _, pid in remainders:
        if leftover == 0:
            break
        if quotas[pid] < len(by_project[pid]):
            quotas[pid] += 1
            leftover -= 1
    picked: list[tuple[int, int]] = []
    for pid in sorted(by_project):
        pool = by_project[pid]
        idx = rng.choice(len(pool), size=quotas[pid], replace=False)
        picked.extend(pool[i] for i in idx)
    return sorted(picked)
