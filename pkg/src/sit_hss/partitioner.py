"""Hierarchical cluster merging driven by structural-entropy descent.

Starting from singleton pixel clusters, each round scores every live cluster's
best adjacent merge against stats frozen at round start, commits the candidate
list in delta-descending order with union-find duplicate suppression, and
rebuilds cluster stats.  Merging continues until exactly K clusters remain;
every commit is recorded so any intermediate count can be re-extracted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .entropy import ClusterStats, merge_delta
from .image_io import LabelMap
from .pixel_graph import PixelGraph


@dataclass
class MergeEvent:
    round: int
    survivor: int
    absorbed: int
    delta: float


@dataclass
class Dendrogram:
    """Ordered merge log; replaying a prefix reproduces any coarseness level."""

    initial_count: int
    events: list[MergeEvent] = field(default_factory=list)

    def final_count(self) -> int:
        return self.initial_count - len(self.events)

    def round_count(self) -> int:
        return self.events[-1].round if self.events else 0

    def to_json(self) -> str:
        payload = {
            "initial_count": self.initial_count,
            "events": [
                {
                    "round": e.round,
                    "survivor": e.survivor,
                    "absorbed": e.absorbed,
                    "delta": float(f"{e.delta:.12g}"),
                }
                for e in self.events
            ],
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Dendrogram":
        payload = json.loads(text)
        events = [
            MergeEvent(
                round=int(e["round"]),
                survivor=int(e["survivor"]),
                absorbed=int(e["absorbed"]),
                delta=float(e["delta"]),
            )
            for e in payload["events"]
        ]
        return cls(initial_count=int(payload["initial_count"]), events=events)


@dataclass
class PartitionState:
    """Live clusters of one agglomeration run.

    Rows are live clusters ordered by ``stable_id`` (the smallest member
    node index, which survives merges).  ``weight_*`` arrays hold the
    coalesced inter-cluster weights of the full radius-r graph, sorted by
    (u, v) row pairs with u < v; ``adj_*`` hold the cluster pairs that share
    a merge-eligible adjacency.  ``node_cluster`` maps every node to its
    current row.
    """

    graph: PixelGraph
    stable_id: np.ndarray
    volume: np.ndarray
    cut: np.ndarray
    size: np.ndarray
    weight_u: np.ndarray
    weight_v: np.ndarray
    weight_w: np.ndarray
    adj_u: np.ndarray
    adj_v: np.ndarray
    node_cluster: np.ndarray
    round_index: int = 0

    @property
    def live_count(self) -> int:
        return int(self.stable_id.size)

    def cluster_stats(self, row: int) -> ClusterStats:
        return ClusterStats(
            volume=float(self.volume[row]),
            cut=float(self.cut[row]),
            size=int(self.size[row]),
        )


def _sorted_pairs(u, v, n, weights=None):
    # canonicalize to u < v, coalesce duplicates, sort by (u, v)
    lo = np.minimum(u, v).astype(np.int64)
    hi = np.maximum(u, v).astype(np.int64)
    keep = lo != hi
    lo, hi = lo[keep], hi[keep]
    key = lo * np.int64(n) + hi
    if weights is None:
        ukey = np.unique(key)
        return ukey // n, ukey % n
    w = np.asarray(weights, dtype=np.float64)[keep]
    ukey, inv = np.unique(key, return_inverse=True)
    ww = np.bincount(inv, weights=w)
    return ukey // n, ukey % n, ww


def _lattice_adjacency(width: int, height: int):
    # unordered 8-neighbor pixel pairs of the lattice
    idx = np.arange(width * height, dtype=np.int64).reshape(height, width)
    us, vs = [], []
    for dy, dx in ((0, 1), (1, -1), (1, 0), (1, 1)):
        if dy >= height or abs(dx) >= width:
            continue
        if dx >= 0:
            src = (slice(0, height - dy), slice(0, width - dx))
            dst = (slice(dy, height), slice(dx, width))
        else:
            src = (slice(0, height - dy), slice(-dx, width))
            dst = (slice(dy, height), slice(0, width + dx))
        us.append(idx[src].ravel())
        vs.append(idx[dst].ravel())
    return np.concatenate(us), np.concatenate(vs)


def _init_state(graph: PixelGraph, adj_u, adj_v) -> PartitionState:
    n = graph.node_count
    wu, wv, ww = _sorted_pairs(graph.edges_u, graph.edges_v, n, graph.edge_weight)
    au, av = _sorted_pairs(adj_u, adj_v, n)
    return PartitionState(
        graph=graph,
        stable_id=np.arange(n, dtype=np.int64),
        volume=graph.degree.astype(np.float64).copy(),
        cut=graph.degree.astype(np.float64).copy(),
        size=np.ones(n, dtype=np.int64),
        weight_u=wu,
        weight_v=wv,
        weight_w=ww,
        adj_u=au,
        adj_v=av,
        node_cluster=np.arange(n, dtype=np.int64),
    )


def init_partition(graph: PixelGraph, width: int, height: int) -> PartitionState:
    """All-singleton state over an image lattice.

    Merge candidates are restricted to 8-connected pixel adjacency so every
    cluster stays connected in the image plane, while merge deltas use the
    full radius-r weighted graph.
    """
    if graph.node_count != width * height:
        raise ValueError(
            f"graph has {graph.node_count} nodes, expected {width * height}"
        )
    au, av = _lattice_adjacency(width, height)
    return _init_state(graph, au, av)


def _pair_weights(state: PartitionState, qu, qv) -> np.ndarray:
    # inter-cluster weight for row pairs (qu < qv); 0 where no graph edge
    n = state.live_count
    keys = state.weight_u * np.int64(n) + state.weight_v
    q = qu * np.int64(n) + qv
    if keys.size == 0:
        return np.zeros(q.shape, dtype=np.float64)
    pos = np.searchsorted(keys, q)
    pos_c = np.minimum(pos, keys.size - 1)
    found = keys[pos_c] == q
    return np.where(found, state.weight_w[pos_c], 0.0)


def _candidate_merges(state: PartitionState, include_nonpositive: bool = False):
    # one best adjacent target per source row, scored on frozen stats
    au, av = state.adj_u, state.adj_v
    if au.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0, dtype=np.float64)
    w = _pair_weights(state, au, av)
    total = state.graph.volume
    vi, gi = state.volume[au], state.cut[au]
    vj, gj = state.volume[av], state.cut[av]
    vm = vi + vj
    gm = gi + gj - 2.0 * w
    delta = (
        (vi - gi) * np.log2(vi)
        + (vj - gj) * np.log2(vj)
        - (vm - gm) * np.log2(vm)
        + 2.0 * w * np.log2(total)
    ) / total

    src = np.concatenate([au, av])
    tgt = np.concatenate([av, au])
    dd = np.concatenate([delta, delta])
    order = np.lexsort((tgt, -dd, src))
    src, tgt, dd = src[order], tgt[order], dd[order]
    first = np.ones(src.size, dtype=bool)
    first[1:] = src[1:] != src[:-1]
    src, tgt, dd = src[first], tgt[first], dd[first]
    if not include_nonpositive:
        keep = dd > 0.0
        src, tgt, dd = src[keep], tgt[keep], dd[keep]
    return src, tgt, dd


def best_target(state: PartitionState, cluster_id: int):
    """Best merge partner of one live cluster, or None.

    Scans the cluster's merge-eligible neighbors and returns
    ``(target stable id, delta)`` for the largest positive entropy decrease;
    nonpositive deltas yield no target.  Ties go to the smallest target id.

    Raises:
        ValueError: cluster_id is not live.
    """
    row = int(np.searchsorted(state.stable_id, cluster_id))
    if row >= state.live_count or state.stable_id[row] != cluster_id:
        raise ValueError(f"cluster {cluster_id} is not live")
    mask_u = state.adj_u == row
    mask_v = state.adj_v == row
    neighbors = np.concatenate([state.adj_v[mask_u], state.adj_u[mask_v]])
    if neighbors.size == 0:
        return None
    neighbors = np.unique(neighbors)
    own = state.cluster_stats(row)
    total = state.graph.volume
    best = None
    best_delta = 0.0
    for q in neighbors:
        q = int(q)
        lo, hi = (row, q) if row < q else (q, row)
        w = float(
            _pair_weights(
                state, np.array([lo], dtype=np.int64), np.array([hi], dtype=np.int64)
            )[0]
        )
        d = merge_delta(own, state.cluster_stats(q), w, total)
        if d > best_delta:
            best_delta = d
            best = int(state.stable_id[q])
    if best is None:
        return None
    return best, best_delta


def _flatten(parent: np.ndarray) -> np.ndarray:
    while True:
        jumped = parent[parent]
        if np.array_equal(jumped, parent):
            return parent
        parent = jumped


def _rebuild(state: PartitionState, parent: np.ndarray) -> None:
    parent = _flatten(np.asarray(parent, dtype=np.int64))
    roots = np.unique(parent)
    row_map = np.searchsorted(roots, parent)
    n2 = int(roots.size)

    state.stable_id = state.stable_id[roots]
    state.volume = np.bincount(row_map, weights=state.volume, minlength=n2)
    state.size = np.bincount(row_map, weights=state.size, minlength=n2).astype(np.int64)

    wu = row_map[state.weight_u]
    wv = row_map[state.weight_v]
    packed = _sorted_pairs(wu, wv, n2, state.weight_w)
    state.weight_u, state.weight_v, state.weight_w = packed
    cut = np.bincount(state.weight_u, weights=state.weight_w, minlength=n2)
    cut += np.bincount(state.weight_v, weights=state.weight_w, minlength=n2)
    state.cut = cut

    au = row_map[state.adj_u]
    av = row_map[state.adj_v]
    state.adj_u, state.adj_v = _sorted_pairs(au, av, n2)
    state.node_cluster = row_map[state.node_cluster]


def _commit(state: PartitionState, src, tgt, dd, k: int) -> list[MergeEvent]:
    # union candidates in order; smaller row is the survivor
    rnd = state.round_index
    parent = list(range(state.live_count))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    stable = state.stable_id
    live = state.live_count
    events: list[MergeEvent] = []
    for s, t, d in zip(src.tolist(), tgt.tolist(), dd.tolist()):
        rs, rt = find(s), find(t)
        if rs == rt:
            continue
        a, b = (rs, rt) if rs < rt else (rt, rs)
        parent[b] = a
        events.append(
            MergeEvent(round=rnd, survivor=int(stable[a]), absorbed=int(stable[b]), delta=d)
        )
        live -= 1
        if live == k:
            break
    if events:
        _rebuild(state, np.asarray(parent, dtype=np.int64))
    return events


def merge_round(state: PartitionState, k: int) -> list[MergeEvent]:
    """Run one scoring + commit round toward k clusters.

    Scoring uses stats frozen at round start; the per-source best candidates
    are committed in delta-descending order (ties by smaller source id), a
    candidate being skipped when its endpoints already share a root.  Commits
    stop early once k clusters remain, then stats, inter-cluster weights,
    and adjacency are rebuilt.

    Raises:
        ValueError: live_count is already <= k.
    """
    if state.live_count <= k:
        raise ValueError(f"live count {state.live_count} is not above target {k}")
    state.round_index += 1
    src, tgt, dd = _candidate_merges(state)
    if src.size == 0:
        return []
    order = np.lexsort((src, -dd))
    return _commit(state, src[order], tgt[order], dd[order], k)


def _forced_round(state: PartitionState, k: int) -> list[MergeEvent]:
    # stall breaker: rank candidates including nonpositive deltas and commit
    # the least harmful merges until k is reached, so the run terminates
    state.round_index += 1
    src, tgt, dd = _candidate_merges(state, include_nonpositive=True)
    if src.size == 0:
        raise RuntimeError("no adjacent cluster pairs remain to merge")
    order = np.lexsort((src, -dd))
    return _commit(state, src[order], tgt[order], dd[order], k)


def renumber_first_seen(values: np.ndarray) -> np.ndarray:
    """Relabel values as 0..K-1 in order of first appearance."""
    uniq, first, inv = np.unique(values, return_index=True, return_inverse=True)
    rank = np.empty(uniq.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(uniq.size, dtype=np.int64)
    return rank[inv]


def _run_to_k(state: PartitionState, k: int) -> Dendrogram:
    events: list[MergeEvent] = []
    while state.live_count > k:
        committed = merge_round(state, k)
        if not committed and state.live_count > k:
            committed = _forced_round(state, k)
        events.extend(committed)
    return Dendrogram(initial_count=state.graph.node_count, events=events)


def cluster_graph(graph: PixelGraph, k: int):
    """Agglomerate an arbitrary graph to k clusters (candidates = graph edges).

    Returns:
        (assignment array renumbered 0..k-1 by first appearance, Dendrogram).
    """
    if not 1 <= k <= graph.node_count:
        raise ValueError(f"k must be in 1..{graph.node_count}, got {k}")
    state = _init_state(graph, graph.edges_u, graph.edges_v)
    dendrogram = _run_to_k(state, k)
    return renumber_first_seen(state.node_cluster), dendrogram


def segment(graph: PixelGraph, width: int, height: int, k: int):
    """Merge an image's pixel graph down to exactly k superpixels.

    Returns:
        (LabelMap with labels 0..k-1 in first-pixel scan order, Dendrogram).

    Raises:
        ValueError: k out of range or graph/lattice size mismatch.
    """
    if not 1 <= k <= graph.node_count:
        raise ValueError(f"k must be in 1..{graph.node_count}, got {k}")
    state = init_partition(graph, width, height)
    dendrogram = _run_to_k(state, k)
    labels = renumber_first_seen(state.node_cluster).reshape(height, width)
    return LabelMap(width=width, height=height, labels=labels), dendrogram


def extract_level(dendrogram: Dendrogram, width: int, height: int, k_prime: int) -> LabelMap:
    """Rebuild the label map at any intermediate cluster count.

    Replays merge events in order until ``k_prime`` clusters remain; the
    result uses the same first-seen renumbering as segment, so extracting at
    the final count reproduces the segment output exactly.

    Raises:
        ValueError: k_prime outside [final count, initial_count], or the
            dendrogram does not describe a width x height image.
    """
    n = dendrogram.initial_count
    if n != width * height:
        raise ValueError(f"dendrogram covers {n} nodes, expected {width * height}")
    k_final = dendrogram.final_count()
    if not k_final <= k_prime <= n:
        raise ValueError(f"level {k_prime} outside reachable range {k_final}..{n}")
    parent = np.arange(n, dtype=np.int64)
    for event in dendrogram.events[: n - k_prime]:
        parent[event.absorbed] = event.survivor
    parent = _flatten(parent)
    labels = renumber_first_seen(parent).reshape(height, width)
    return LabelMap(width=width, height=height, labels=labels)
