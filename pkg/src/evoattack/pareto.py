"""Pareto dominance, fast nondominated sorting, crowding distance, binary
tournament mating selection, and environmental selection.

Objectives are minimized.  Every tie anywhere (tournament, truncation)
resolves toward the lowest index, so selection is fully deterministic given
the RNG stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class FrontPartition:
    """Population split into nondominated fronts; front 0 is nondominated."""

    fronts: list[list[int]]
    rank: np.ndarray  # (N,) front number per individual


def dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """True iff a is no worse in every objective and strictly better in one."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"objective count mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_sort(objectives: np.ndarray) -> FrontPartition:
    """Deb's fast nondominated sort, O(m * N^2) with vectorized comparisons."""
    f = np.asarray(objectives, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] == 0:
        raise ValueError(f"need a nonempty (N, m) objective array, got shape {f.shape}")
    n = f.shape[0]
    # dom[i, j] = i dominates j
    le = np.all(f[:, None, :] <= f[None, :, :], axis=2)
    lt = np.any(f[:, None, :] < f[None, :, :], axis=2)
    dom = le & lt
    n_dominators = dom.sum(axis=0)
    rank = np.full(n, -1, dtype=np.int64)
    fronts: list[list[int]] = []
    current = np.flatnonzero(n_dominators == 0)
    level = 0
    remaining = dom.copy()
    while current.size:
        rank[current] = level
        fronts.append([int(i) for i in current])
        n_dominators = n_dominators - remaining[current].sum(axis=0)
        remaining[current] = False
        n_dominators[current] = -1  # already placed
        current = np.flatnonzero(n_dominators == 0)
        level += 1
    return FrontPartition(fronts=fronts, rank=rank)


def crowding_distance(front_objectives: np.ndarray) -> np.ndarray:
    """NSGA-II crowding distance, normalized by the front's own range.

    Boundary individuals get +inf per objective; a front of size <= 2 is
    all-infinite.  Duplicated objective values contribute zero gap.
    """
    f = np.asarray(front_objectives, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] == 0:
        raise ValueError(f"need a nonempty (n, m) objective array, got shape {f.shape}")
    n, m = f.shape
    dist = np.zeros(n, dtype=np.float64)
    if n <= 2:
        return np.full(n, np.inf)
    for j in range(m):
        order = np.argsort(f[:, j], kind="stable")
        spread = f[order[-1], j] - f[order[0], j]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if spread == 0:
            continue
        gaps = (f[order[2:], j] - f[order[:-2], j]) / spread
        dist[order[1:-1]] += gaps
    return dist


def rank_and_crowd(objectives: np.ndarray) -> tuple[FrontPartition, np.ndarray]:
    """Front partition plus per-individual crowding distance (within-front)."""
    partition = nondominated_sort(objectives)
    crowd = np.zeros(objectives.shape[0], dtype=np.float64)
    for front in partition.fronts:
        idx = np.asarray(front)
        crowd[idx] = crowding_distance(objectives[idx])
    return partition, crowd


def binary_tournament(
    rank: np.ndarray,
    crowding: np.ndarray,
    rng: np.random.Generator,
    count: int,
) -> np.ndarray:
    """Draw ``count`` winners; lower rank wins, then higher crowding, then the
    first-drawn index."""
    n = rank.shape[0]
    if crowding.shape != rank.shape:
        raise ValueError("rank and crowding must cover the same population")
    winners = np.empty(count, dtype=np.int64)
    for t in range(count):
        i = int(rng.integers(n))
        j = int(rng.integers(n))
        if rank[j] < rank[i] or (rank[j] == rank[i] and crowding[j] > crowding[i]):
            winners[t] = j
        else:
            winners[t] = i
    return winners


def environmental_selection(objectives: np.ndarray, n_survivors: int) -> list[int]:
    """Indices of the N survivors of the union population.

    Whole fronts are admitted in rank order; the splitting front is truncated
    by descending crowding distance with ties going to the lower index.
    """
    f = np.asarray(objectives, dtype=np.float64)
    if f.shape[0] < n_survivors:
        raise ValueError(f"cannot select {n_survivors} from {f.shape[0]} individuals")
    partition = nondominated_sort(f)
    selected: list[int] = []
    for front in partition.fronts:
        if len(selected) + len(front) <= n_survivors:
            selected.extend(front)
            if len(selected) == n_survivors:
                break
        else:
            room = n_survivors - len(selected)
            idx = np.asarray(front)
            crowd = crowding_distance(f[idx])
            # Stable sort on -crowding keeps equal-crowding entries in index order.
            order = np.argsort(-crowd, kind="stable")
            selected.extend(int(idx[k]) for k in order[:room])
            break
    return selected
