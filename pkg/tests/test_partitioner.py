"""Merge loop, dendrogram, and multi-scale extraction tests."""

import json

import numpy as np
import pytest
from scipy.ndimage import label as connected_components

from sit_hss import (
    ClusterStats,
    Dendrogram,
    MergeEvent,
    best_target,
    build_graph_at_radius,
    cluster_graph,
    extract_level,
    init_partition,
    merge_round,
    merged_stats,
    segment,
    two_dim_se,
)
from sit_hss.partitioner import _candidate_merges
from conftest import (
    half_and_half_image,
    lab_image_from_rgb,
    noise_image,
    planted_two_clique_graph,
)

EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


def uniform_2x2_state():
    import sit_hss

    img = sit_hss.LabImage(width=2, height=2, lab=np.zeros((2, 2, 3)))
    graph = build_graph_at_radius(img, 1, t=0.1)
    return graph, init_partition(graph, 2, 2)


def recomputed_stats(state):
    # volumes and cuts from raw graph edges and the node->cluster map
    g = state.graph
    rows = state.node_cluster
    n = state.live_count
    volume = np.bincount(rows, weights=g.degree, minlength=n)
    cu, cv = rows[g.edges_u], rows[g.edges_v]
    cross = cu != cv
    cut = np.bincount(cu[cross], weights=g.edge_weight[cross], minlength=n)
    cut += np.bincount(cv[cross], weights=g.edge_weight[cross], minlength=n)
    return volume, cut


# ------------------------------------------------------------------- init


def test_init_partition_2x2_uniform():
    graph, state = uniform_2x2_state()
    assert state.live_count == 4
    assert np.all(state.volume == 3.0)  # complete graph, unit weights
    assert np.all(state.cut == 3.0)
    assert np.all(state.size == 1)
    assert state.adj_u.size == 6  # all pairs of a 2x2 block are 8-adjacent
    assert abs(state.volume.sum() - graph.volume) <= 1e-9 * graph.volume


def test_init_partition_corner_adjacency():
    img = noise_image(3, 3, seed=1)
    graph = build_graph_at_radius(img, 1, t=0.1)
    state = init_partition(graph, 3, 3)
    partners = set()
    for a, b in zip(state.adj_u.tolist(), state.adj_v.tolist()):
        if a == 0:
            partners.add(b)
        if b == 0:
            partners.add(a)
    assert partners == {1, 3, 4}


def test_init_partition_size_mismatch():
    img = noise_image(3, 3, seed=1)
    graph = build_graph_at_radius(img, 1, t=0.1)
    with pytest.raises(ValueError):
        init_partition(graph, 4, 3)


# ------------------------------------------------------------- best_target


def test_best_target_tie_breaks_to_smallest_id():
    _, state = uniform_2x2_state()
    # all three neighbors of pixel 0 give the same positive delta
    target, delta = best_target(state, 0)
    assert target == 1
    assert delta > 0


def test_best_target_none_when_nonpositive():
    # two singletons joined by their only edge: delta is exactly 0
    from sit_hss import PixelGraph
    from sit_hss.partitioner import _init_state

    g = PixelGraph.from_edges(2, [0], [1], [1.0])
    state = _init_state(g, g.edges_u, g.edges_v)
    assert best_target(state, 0) is None
    assert best_target(state, 1) is None


def test_best_target_not_live():
    _, state = uniform_2x2_state()
    with pytest.raises(ValueError):
        best_target(state, 99)


def test_best_target_agrees_with_vectorized_scoring():
    img = noise_image(8, 6, seed=3)
    graph = build_graph_at_radius(img, 1, t=0.1)
    state = init_partition(graph, 8, 6)
    merge_round(state, 10)  # advance to a nontrivial state
    src, tgt, dd = _candidate_merges(state)
    by_source = {
        int(state.stable_id[s]): (int(state.stable_id[t]), float(d))
        for s, t, d in zip(src, tgt, dd)
    }
    for sid in state.stable_id.tolist():
        assert best_target(state, sid) == by_source.get(sid)


# ------------------------------------------------------------- merge_round


def test_merge_round_requires_progress_room():
    _, state = uniform_2x2_state()
    with pytest.raises(ValueError):
        merge_round(state, 4)


def test_merge_round_early_stop_at_k():
    _, state = uniform_2x2_state()
    events = merge_round(state, 3)
    # several positive candidates, but exactly one commit
    assert len(events) == 1
    assert state.live_count == 3
    assert events[0].survivor == 0 and events[0].absorbed == 1


def test_merge_round_duplicate_pair_suppression():
    img = noise_image(2, 2, seed=6)
    graph = build_graph_at_radius(img, 1, t=0.5)
    state = init_partition(graph, 2, 2)
    events = merge_round(state, 1)
    # sources point at each other; union-find commits each pair only once
    absorbed = [e.absorbed for e in events]
    assert len(set(absorbed)) == len(absorbed)
    for i, e in enumerate(events):
        later = events[i + 1 :]
        assert all(e.absorbed not in (x.survivor, x.absorbed) for x in later)


def test_merge_round_stats_match_recomputation_every_round():
    img = noise_image(9, 7, seed=2)
    graph = build_graph_at_radius(img, 2, t=0.1)
    state = init_partition(graph, 9, 7)
    while state.live_count > 5:
        before = state.live_count
        merge_round(state, 5)
        if state.live_count == before:
            break
        volume, cut = recomputed_stats(state)
        assert np.allclose(volume, state.volume, rtol=1e-9)
        assert np.allclose(cut, state.cut, rtol=1e-9, atol=1e-12)
        assert abs(state.volume.sum() - graph.volume) <= 1e-9 * graph.volume


def test_rebuild_equals_sequential_merged_stats_replay():
    img = noise_image(6, 6, seed=14)
    graph = build_graph_at_radius(img, 1, t=0.1)
    state = init_partition(graph, 6, 6)

    stats = {
        int(sid): ClusterStats(float(v), float(c), int(s))
        for sid, v, c, s in zip(state.stable_id, state.volume, state.cut, state.size)
    }
    weights = {}
    for a, b, w in zip(state.weight_u, state.weight_v, state.weight_w):
        sa, sb = int(state.stable_id[a]), int(state.stable_id[b])
        weights[(min(sa, sb), max(sa, sb))] = float(w)

    events = merge_round(state, 4)
    assert events
    for e in events:
        s, b = e.survivor, e.absorbed
        w = weights.get((min(s, b), max(s, b)), 0.0)
        stats[s] = merged_stats(stats[s], stats[b], w)
        del stats[b]
        # reattach the absorbed cluster's weights to the survivor
        for (x, y), value in list(weights.items()):
            if b in (x, y):
                del weights[(x, y)]
                other = y if x == b else x
                if other == s:
                    continue
                key = (min(s, other), max(s, other))
                weights[key] = weights.get(key, 0.0) + value

    assert sorted(stats) == state.stable_id.tolist()
    for row, sid in enumerate(state.stable_id.tolist()):
        assert abs(stats[sid].volume - state.volume[row]) <= 1e-9 * stats[sid].volume
        assert abs(stats[sid].cut - state.cut[row]) <= 1e-9 * max(1.0, stats[sid].cut)
        assert stats[sid].size == state.size[row]


def test_planted_halves_commit_only_intra_half():
    rgb = np.zeros((4, 4, 3), dtype=np.uint8)
    rgb[:, 2:] = 255
    img = lab_image_from_rgb(rgb)
    graph = build_graph_at_radius(img, 1, t=0.1)
    state = init_partition(graph, 4, 4)
    half = (np.arange(16) % 4) >= 2  # right-half pixel mask

    while state.live_count > 2:
        # cross-half candidate deltas under the frozen stats of this round
        src, tgt, dd = _candidate_merges(state, include_nonpositive=True)
        sides = half[state.stable_id]
        cross = sides[src] != sides[tgt]
        cross_max = dd[cross].max() if cross.any() else -np.inf
        before = state.live_count
        events = merge_round(state, 2)
        if state.live_count == before:
            from sit_hss.partitioner import _forced_round

            events = _forced_round(state, 2)
        for e in events:
            assert half[e.survivor] == half[e.absorbed]  # intra-half only
            assert e.delta > cross_max

    labels = state.node_cluster.reshape(4, 4)
    assert len(np.unique(labels[:, :2])) == 1
    assert len(np.unique(labels[:, 2:])) == 1
    assert labels[0, 0] != labels[0, 3]


# ----------------------------------------------------------------- segment


def test_segment_identity_when_k_equals_n():
    img = noise_image(4, 3, seed=4)
    graph = build_graph_at_radius(img, 1, t=0.1)
    label_map, dendrogram = segment(graph, 4, 3, 12)
    assert label_map.labels.tolist() == np.arange(12).reshape(3, 4).tolist()
    assert dendrogram.events == []
    assert dendrogram.final_count() == 12


def test_segment_single_cluster():
    img = noise_image(4, 4, seed=5)
    graph = build_graph_at_radius(img, 1, t=0.1)
    label_map, dendrogram = segment(graph, 4, 4, 1)
    assert np.all(label_map.labels == 0)
    assert len(dendrogram.events) == 15


def test_segment_exact_k_and_connectivity():
    img = noise_image(10, 10, seed=8)
    graph = build_graph_at_radius(img, 1, t=0.1)
    for k in (2, 5, 17):
        label_map, dendrogram = segment(graph, 10, 10, k)
        labels = label_map.labels
        assert len(np.unique(labels)) == k
        assert labels.min() == 0 and labels.max() == k - 1
        for value in range(k):
            _, parts = connected_components(labels == value, structure=EIGHT_CONNECTED)
            assert parts == 1
        assert dendrogram.final_count() == k


def test_segment_half_image_recovers_halves():
    img = half_and_half_image(8)
    graph = build_graph_at_radius(img, 1, t=0.1)
    label_map, _ = segment(graph, 8, 8, 2)
    expected = np.zeros((8, 8), dtype=np.int64)
    expected[:, 4:] = 1
    assert np.array_equal(label_map.labels, expected)


def test_segment_labels_first_seen_scan_order():
    img = noise_image(6, 6, seed=10)
    graph = build_graph_at_radius(img, 1, t=0.1)
    label_map, _ = segment(graph, 6, 6, 7)
    flat = label_map.labels.ravel()
    first_rows = [np.argmax(flat == v) for v in range(7)]
    assert first_rows == sorted(first_rows)
    assert flat[0] == 0


def test_segment_determinism():
    img = noise_image(12, 9, seed=11)
    graph = build_graph_at_radius(img, 2, t=0.1)
    a_map, a_dend = segment(graph, 12, 9, 6)
    b_map, b_dend = segment(graph, 12, 9, 6)
    assert np.array_equal(a_map.labels, b_map.labels)
    assert a_dend.events == b_dend.events


def test_segment_k_out_of_range():
    img = noise_image(3, 3, seed=12)
    graph = build_graph_at_radius(img, 1, t=0.1)
    with pytest.raises(ValueError):
        segment(graph, 3, 3, 0)
    with pytest.raises(ValueError):
        segment(graph, 3, 3, 10)


def test_segment_greedy_never_beats_oracle(rng):
    # on graphs small enough to enumerate, greedy H2 >= true optimum
    from sit_hss import brute_force_min_2dse
    from conftest import random_connected_graph

    for _ in range(5):
        graph = random_connected_graph(rng, int(rng.integers(4, 8)))
        k = int(rng.integers(2, 4))
        assignment, _ = cluster_graph(graph, k)
        _, optimum = brute_force_min_2dse(graph, k)
        assert two_dim_se(graph, assignment) >= optimum - 1e-12


def test_cluster_graph_recovers_planted_split():
    graph = planted_two_clique_graph(4, 4)
    assignment, dendrogram = cluster_graph(graph, 2)
    assert assignment.tolist() == [0, 0, 0, 0, 1, 1, 1, 1]
    assert dendrogram.final_count() == 2


# -------------------------------------------------------------- dendrogram


def test_dendrogram_replay_invariants():
    img = noise_image(7, 7, seed=13)
    graph = build_graph_at_radius(img, 1, t=0.1)
    _, dendrogram = segment(graph, 7, 7, 4)
    assert dendrogram.initial_count == 49
    assert len(dendrogram.events) == 45  # live counts 49, 48, ..., 4
    absorbed = [e.absorbed for e in dendrogram.events]
    assert len(set(absorbed)) == len(absorbed)
    rounds = [e.round for e in dendrogram.events]
    assert rounds == sorted(rounds)
    for e in dendrogram.events:
        assert e.survivor < e.absorbed


def test_dendrogram_json_roundtrip():
    img = noise_image(5, 5, seed=15)
    graph = build_graph_at_radius(img, 1, t=0.1)
    _, dendrogram = segment(graph, 5, 5, 3)
    payload = json.loads(dendrogram.to_json())
    assert payload["initial_count"] == 25
    assert set(payload["events"][0]) == {"round", "survivor", "absorbed", "delta"}
    for event, raw in zip(dendrogram.events, payload["events"]):
        assert raw["delta"] == float(f"{event.delta:.12g}")
    replica = Dendrogram.from_json(dendrogram.to_json())
    assert replica.initial_count == dendrogram.initial_count
    assert [
        (e.round, e.survivor, e.absorbed, float(f"{e.delta:.12g}"))
        for e in dendrogram.events
    ] == [(e.round, e.survivor, e.absorbed, e.delta) for e in replica.events]


# ------------------------------------------------------------ extract_level


def test_extract_level_endpoints():
    img = noise_image(6, 5, seed=16)
    graph = build_graph_at_radius(img, 1, t=0.1)
    label_map, dendrogram = segment(graph, 6, 5, 4)
    identity = extract_level(dendrogram, 6, 5, 30)
    assert identity.labels.tolist() == np.arange(30).reshape(5, 6).tolist()
    final = extract_level(dendrogram, 6, 5, 4)
    assert np.array_equal(final.labels, label_map.labels)


def test_extract_level_nestedness():
    img = noise_image(9, 9, seed=17)
    graph = build_graph_at_radius(img, 1, t=0.1)
    _, dendrogram = segment(graph, 9, 9, 3)
    coarse = extract_level(dendrogram, 9, 9, 5).labels
    fine = extract_level(dendrogram, 9, 9, 20).labels
    # every fine cluster maps into exactly one coarse cluster
    for value in np.unique(fine):
        assert len(np.unique(coarse[fine == value])) == 1
    assert len(np.unique(fine)) == 20
    assert len(np.unique(coarse)) == 5


def test_extract_level_validation():
    img = noise_image(4, 4, seed=18)
    graph = build_graph_at_radius(img, 1, t=0.1)
    _, dendrogram = segment(graph, 4, 4, 5)
    with pytest.raises(ValueError):
        extract_level(dendrogram, 4, 4, 4)  # below the final count
    with pytest.raises(ValueError):
        extract_level(dendrogram, 4, 4, 17)  # above the initial count
    with pytest.raises(ValueError):
        extract_level(dendrogram, 5, 4, 8)  # lattice mismatch


def test_merge_event_round_metadata():
    events = [MergeEvent(round=1, survivor=0, absorbed=3, delta=0.5)]
    d = Dendrogram(initial_count=4, events=events)
    assert d.round_count() == 1
    assert d.final_count() == 3
    assert Dendrogram(initial_count=4).round_count() == 0
