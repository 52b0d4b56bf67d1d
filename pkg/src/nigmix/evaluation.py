"""Clustering agreement metrics and benchmark run bookkeeping."""

from dataclasses import dataclass

import numpy as np


def _canonical(labels):
    """Relabel by order of first appearance; equal partitions map equal."""
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=int)
    rank[np.argsort(first)] = np.arange(len(first))
    return rank[inverse]


def _comb2(counts):
    counts = counts.astype(np.int64)
    return counts * (counts - 1) // 2


def adjusted_rand_index(labels_a, labels_b):
    """Chance-corrected pair-counting agreement of two partitions.

    Computed from the contingency table as (index - expected) / (max -
    expected). Degenerate partitions (both all-singletons or both a single
    cluster) make the denominator vanish; equal partitions then score 1,
    unequal ones 0.
    """
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape:
        raise ValueError("label arrays must have equal length")
    n = a.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    a_idx = _canonical(a)
    b_idx = _canonical(b)
    table = np.zeros((a_idx.max() + 1, b_idx.max() + 1), dtype=np.int64)
    np.add.at(table, (a_idx, b_idx), 1)
    sum_cells = int(_comb2(table).sum())
    sum_a = int(_comb2(table.sum(axis=1)).sum())
    sum_b = int(_comb2(table.sum(axis=0)).sum())
    total = n * (n - 1) // 2
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index - expected == 0.0:
        return 1.0 if np.array_equal(a_idx, b_idx) else 0.0
    return (sum_cells - expected) / (max_index - expected)


@dataclass(frozen=True)
class RunRecord:
    """One fit restart's outcome, as logged to the benchmark CSV."""

    dataset_id: str
    variant: str
    concentration: str
    seed: int
    ari: float
    n_clusters: int
    elbo: float
    iterations: int
    wall_time: float = 0.0

    def __post_init__(self):
        if np.isfinite(self.ari) and self.ari > 1.0 + 1e-12:
            raise ValueError("ARI cannot exceed 1")


def select_best_run(records):
    """The restart with the largest bound; ties break to the lowest seed."""
    records = list(records)
    if not records:
        raise ValueError("no runs to select from")
    dataset_ids = {r.dataset_id for r in records}
    if len(dataset_ids) != 1:
        raise ValueError(f"runs come from different datasets: {sorted(dataset_ids)}")
    return max(records, key=lambda r: (r.elbo, -r.seed))
