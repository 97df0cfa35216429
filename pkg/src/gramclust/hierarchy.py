"""Agglomerative Ward clustering used to initialize the mixture fits.

Rows of the transformed Gram matrix are points in R^{N+1}; the merge cost
is the increase in total within-cluster sum of squares, maintained with
the Lance-Williams recurrence. Ties are broken deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import KOutOfRangeError

if TYPE_CHECKING:  # pragma: no cover
    from .transform import MMatrix

# Relative slack for the monotone-merge-cost invariant (Ward is reducible,
# so violations can only come from floating-point noise).
_MONOTONE_RTOL = 1e-9


def canonicalize_labels(labels) -> tuple[np.ndarray, int]:
    """Relabel to 1..k in order of first occurrence; returns (labels, k)."""
    seq = np.asarray(labels).ravel()
    out = np.empty(seq.shape[0], dtype=np.int64)
    mapping: dict = {}
    for i, v in enumerate(seq.tolist()):
        if v not in mapping:
            mapping[v] = len(mapping) + 1
        out[i] = mapping[v]
    return out, len(mapping)


@dataclass(frozen=True)
class ClusterAssignment:
    """Length-N vector of cluster identifiers in 1..k.

    ``from_raw`` canonicalizes arbitrary labels (cluster 1 is the cluster
    of object 1, indices in order of first occurrence) which makes
    assignments comparable across runs. Direct construction only checks
    the 1..k range: transient assignments inside the EM loop keep stable
    component indices and may leave a component empty.
    """

    labels: np.ndarray
    k: int

    def __post_init__(self):
        a = np.asarray(self.labels, dtype=np.int64).copy()
        if a.ndim != 1:
            raise ValueError("labels must be a 1-D vector")
        if self.k < 1:
            raise ValueError("k must be positive")
        if a.size and (a.min() < 1 or a.max() > self.k):
            raise ValueError(f"labels must lie in [1, {self.k}]")
        a.setflags(write=False)
        object.__setattr__(self, "labels", a)

    @classmethod
    def from_raw(cls, labels) -> "ClusterAssignment":
        canon, k = canonicalize_labels(labels)
        return cls(canon, k)

    def canonicalized(self) -> "ClusterAssignment":
        return ClusterAssignment.from_raw(self.labels)

    @property
    def is_canonical(self) -> bool:
        canon, k = canonicalize_labels(self.labels)
        return k == self.k and bool(np.array_equal(canon, self.labels))

    @property
    def n_objects(self) -> int:
        return int(self.labels.shape[0])

    def sizes(self) -> np.ndarray:
        """Counts per cluster index 1..k (zeros mark empty components)."""
        return np.bincount(self.labels, minlength=self.k + 1)[1:]


@dataclass(frozen=True)
class Dendrogram:
    """Full Ward merge tree.

    ``merges`` has one row per step: (id_a, id_b, cost, new_size). Original
    points are ids 0..n-1; the cluster created by step t gets id n+t. Costs
    are within-cluster sum-of-squares increases and are nondecreasing.
    """

    merges: np.ndarray
    n_points: int

    def __post_init__(self):
        m = np.asarray(self.merges, dtype=np.float64).reshape(-1, 4).copy()
        if m.shape[0] != self.n_points - 1:
            raise ValueError("a full tree over n points has n-1 merges")
        costs = m[:, 2]
        if costs.size and np.min(costs) < 0:
            raise ValueError("negative merge cost")
        for i in range(costs.size - 1):
            tol = _MONOTONE_RTOL * max(1.0, abs(costs[i]))
            if costs[i + 1] < costs[i] - tol:
                raise ValueError("merge costs are not nondecreasing")
        m.setflags(write=False)
        object.__setattr__(self, "merges", m)


def ward_linkage(points) -> Dendrogram:
    """Agglomerative Ward tree over the rows of ``points``.

    Merge cost is the within-cluster sum-of-squares increase, computed via
    the Lance-Williams recurrence on pairwise costs ||x-y||^2/2 between
    singletons. Among equal-cost merges the pair whose clusters have the
    lexicographically smallest (min representative, max representative)
    wins, where a cluster's representative is its smallest original index.
    The O(N^3) scan is fine in the target regime (N at most a few hundred).
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a 2-D array with at least 2 rows")
    n = x.shape[0]
    total = 2 * n - 1

    diff = x[:, None, :] - x[None, :, :]
    cost = np.full((total, total), np.inf)
    cost[:n, :n] = (diff * diff).sum(axis=-1) / 2.0
    np.fill_diagonal(cost[:n, :n], np.inf)

    size = np.zeros(total, dtype=np.int64)
    size[:n] = 1
    rep = np.arange(total, dtype=np.int64)

    active = list(range(n))
    merges = np.empty((n - 1, 4), dtype=np.float64)
    for t in range(n - 1):
        ids = np.asarray(active)
        sub = cost[np.ix_(ids, ids)]
        best = sub.min()
        cands = np.argwhere(sub == best)
        pair = None
        pair_key = None
        for pi, pj in cands:
            if pi >= pj:
                continue
            a, b = int(ids[pi]), int(ids[pj])
            key = (min(rep[a], rep[b]), max(rep[a], rep[b]))
            if pair_key is None or key < pair_key:
                pair_key = key
                pair = (a, b)
        a, b = pair
        if rep[b] < rep[a]:
            a, b = b, a

        new = n + t
        others = np.asarray([c for c in active if c != a and c != b], dtype=np.int64)
        if others.size:
            sk = size[others].astype(np.float64)
            sa, sb = float(size[a]), float(size[b])
            merged = ((sa + sk) * cost[a, others] + (sb + sk) * cost[b, others]
                      - sk * best) / (sa + sb + sk)
            cost[new, others] = merged
            cost[others, new] = merged
        size[new] = size[a] + size[b]
        rep[new] = min(rep[a], rep[b])
        merges[t] = (a, b, best, size[new])
        active.remove(a)
        active.remove(b)
        active.append(new)

    return Dendrogram(merges=merges, n_points=n)


def ward_dendrogram(m: "MMatrix") -> Dendrogram:
    """Ward tree over the rows of a transformed Gram matrix."""
    return ward_linkage(m.values)


def cut_tree(d: Dendrogram, k: int) -> ClusterAssignment:
    """Partition into k clusters by undoing the last k-1 merges."""
    n = d.n_points
    if not 1 <= k <= n:
        raise KOutOfRangeError(f"k={k} outside [1, {n}]")
    parent = np.arange(2 * n - 1, dtype=np.int64)
    for t in range(n - k):
        a, b = int(d.merges[t, 0]), int(d.merges[t, 1])
        parent[a] = n + t
        parent[b] = n + t
    roots = np.empty(n, dtype=np.int64)
    for i in range(n):
        j = i
        while parent[j] != j:
            j = parent[j]
        roots[i] = j
    return ClusterAssignment.from_raw(roots)
