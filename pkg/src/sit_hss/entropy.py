"""Two-dimensional structural entropy: partition scoring and merge deltas.

The quantities here drive the agglomeration: a partition of a weighted graph
is scored by its two-level structural entropy, and candidate cluster merges
are ranked by the closed-form entropy decrease.  A brute-force minimizer over
all set partitions of tiny graphs acts as the verification oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pixel_graph import PixelGraph, one_dim_se

_LOG2 = math.log2


@dataclass
class ClusterStats:
    """Aggregate quantities for one cluster.

    volume: sum of weighted degrees of member nodes (V_p).
    cut: total edge weight crossing the cluster boundary (g_p).
    size: member node count.

    A singleton cluster of node i has volume == cut == degree(i).
    """

    volume: float
    cut: float
    size: int


@dataclass
class Partition:
    """Per-node cluster assignment plus per-cluster stats."""

    assignment: np.ndarray
    clusters: dict[int, ClusterStats]

    @classmethod
    def from_assignment(cls, graph: PixelGraph, assignment) -> "Partition":
        a = np.asarray(assignment, dtype=np.int64)
        if a.shape != (graph.node_count,):
            raise ValueError(
                f"assignment length {a.size} does not match node count {graph.node_count}"
            )
        ids, inv = np.unique(a, return_inverse=True)
        vol = np.bincount(inv, weights=graph.degree, minlength=ids.size)
        size = np.bincount(inv, minlength=ids.size)
        cu, cv = inv[graph.edges_u], inv[graph.edges_v]
        cross = cu != cv
        cut = np.bincount(cu[cross], weights=graph.edge_weight[cross], minlength=ids.size)
        cut += np.bincount(cv[cross], weights=graph.edge_weight[cross], minlength=ids.size)
        clusters = {
            int(c): ClusterStats(volume=float(vol[k]), cut=float(cut[k]), size=int(size[k]))
            for k, c in enumerate(ids)
        }
        return cls(assignment=a, clusters=clusters)


def _assignment_of(partition) -> np.ndarray:
    if isinstance(partition, Partition):
        return partition.assignment
    return np.asarray(partition, dtype=np.int64)


def two_dim_se(graph: PixelGraph, partition) -> float:
    """Structural entropy of a flat partition (two-level tree), log base 2.

    For each cluster p with volume V_p and cut g_p, and each member node j
    with degree d_j:

        H2 = -sum_p [ (g_p/V) log2(V_p/V) + sum_{j in p} (d_j/V) log2(d_j/V_p) ]

    where V is the graph volume.  Accepts a Partition or a bare per-node
    assignment array.
    """
    a = _assignment_of(partition)
    if a.shape != (graph.node_count,):
        raise ValueError(
            f"partition length {a.size} does not match node count {graph.node_count}"
        )
    _, inv = np.unique(a, return_inverse=True)
    m = int(inv.max()) + 1 if inv.size else 0
    volume = graph.volume
    vol = np.bincount(inv, weights=graph.degree, minlength=m)
    cu, cv = inv[graph.edges_u], inv[graph.edges_v]
    cross = cu != cv
    w = graph.edge_weight[cross]
    cut = np.bincount(cu[cross], weights=w, minlength=m)
    cut += np.bincount(cv[cross], weights=w, minlength=m)

    nonempty = vol > 0
    h = float(-(cut[nonempty] / volume * np.log2(vol[nonempty] / volume)).sum())
    d = graph.degree
    pos = d > 0
    h += float(-(d[pos] / volume * np.log2(d[pos] / vol[inv[pos]])).sum())
    return h


def merge_delta(stats_i: ClusterStats, stats_j: ClusterStats, w_ij: float, total_volume: float) -> float:
    """Decrease of two-level structural entropy from merging two clusters.

    With V' = V_i + V_j and g' = g_i + g_j - 2 w_ij:

        delta = [ (V_i - g_i) log2 V_i + (V_j - g_j) log2 V_j
                  - (V' - g') log2 V' + 2 w_ij log2 V ] / V

    Positive delta means the merge lowers the entropy.  Clusters must have
    positive volume; w_ij is the total edge weight between them (0 when
    nonadjacent, which kills the last term and makes g' = g_i + g_j).
    """
    vi, gi = stats_i.volume, stats_i.cut
    vj, gj = stats_j.volume, stats_j.cut
    vm = vi + vj
    gm = gi + gj - 2.0 * w_ij
    return (
        (vi - gi) * _LOG2(vi)
        + (vj - gj) * _LOG2(vj)
        - (vm - gm) * _LOG2(vm)
        + 2.0 * w_ij * _LOG2(total_volume)
    ) / total_volume


def merged_stats(stats_i: ClusterStats, stats_j: ClusterStats, w_ij: float) -> ClusterStats:
    """Stats of the union cluster: volumes add, cuts lose the joining weight."""
    cut = stats_i.cut + stats_j.cut - 2.0 * w_ij
    if cut < -1e-9:
        raise ValueError(f"inter-cluster weight {w_ij} exceeds available cut (got {cut})")
    return ClusterStats(
        volume=stats_i.volume + stats_j.volume,
        cut=max(cut, 0.0),
        size=stats_i.size + stats_j.size,
    )


def _restricted_growth_strings(n: int, k: int | None):
    """Yield every canonical set-partition assignment of n items in lex order.

    A canonical assignment satisfies a[0] = 0 and a[i] <= max(a[:i]) + 1.
    With k given, only partitions with exactly k blocks are yielded.
    """
    a = [0] * n

    def rec(i: int, used: int):
        if i == n:
            if k is None or used == k:
                yield a.copy()
            return
        remaining = n - i
        if k is not None and used + remaining < k:
            return
        top = used if k is None else min(used, k - 1)
        for b in range(top + 1):
            a[i] = b
            yield from rec(i + 1, max(used, b + 1))

    yield from rec(1, 1)


def brute_force_min_2dse(graph: PixelGraph, k: int | None = None):
    """Exhaustively find the partition minimizing two-level structural entropy.

    Enumerates every set partition of the nodes (restricted to exactly ``k``
    blocks when given) in canonical lexicographic order, keeping the first
    strict minimizer; ties therefore resolve to the lexicographically
    smallest canonical assignment.

    Returns:
        (Partition, entropy) for the minimizer.

    Raises:
        ValueError: node count exceeds 12, or k out of range.
    """
    n = graph.node_count
    if n > 12:
        raise ValueError(f"exhaustive search limited to 12 nodes, got {n}")
    if n < 1:
        raise ValueError("graph must have at least one node")
    if k is not None and not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")

    deg = graph.degree.tolist()
    volume = graph.volume
    edges = list(
        zip(graph.edges_u.tolist(), graph.edges_v.tolist(), graph.edge_weight.tolist())
    )
    log2 = _LOG2

    best_value = math.inf
    best_assignment = None
    for a in _restricted_growth_strings(n, k):
        m = max(a) + 1
        vol = [0.0] * m
        for i in range(n):
            vol[a[i]] += deg[i]
        cut = [0.0] * m
        for u, v, w in edges:
            if a[u] != a[v]:
                cut[a[u]] += w
                cut[a[v]] += w
        h = 0.0
        for p in range(m):
            if vol[p] > 0.0 and cut[p] > 0.0:
                h -= cut[p] / volume * log2(vol[p] / volume)
        for i in range(n):
            if deg[i] > 0.0:
                h -= deg[i] / volume * log2(deg[i] / vol[a[i]])
        if h < best_value:
            best_value = h
            best_assignment = a
    return Partition.from_assignment(graph, best_assignment), best_value


__all__ = [
    "ClusterStats",
    "Partition",
    "two_dim_se",
    "merge_delta",
    "merged_stats",
    "brute_force_min_2dse",
    "one_dim_se",
]
