"""Shared builders for the test suite."""

import math

import numpy as np
import pytest

from sit_hss import LabImage, PixelGraph, rgb_to_lab


def random_connected_graph(rng, n, extra_edge_prob=0.4):
    """Random spanning tree plus extra edges; weights uniform in (0, 1]."""
    u, v = [], []
    for i in range(1, n):
        u.append(int(rng.integers(0, i)))
        v.append(i)
    iu, iv = np.triu_indices(n, k=1)
    have = set(zip(u, v))
    for a, b in zip(iu.tolist(), iv.tolist()):
        if (a, b) not in have and rng.random() < extra_edge_prob:
            u.append(a)
            v.append(b)
    w = rng.uniform(0.01, 1.0, len(u))
    return PixelGraph.from_edges(n, u, v, w)


def tree_form_h2(graph, assignment):
    """Independent two-level structural entropy: explicit encoding-tree sum.

    Walks a literal tree (root -> cluster nodes -> leaf nodes) and adds
    -(g_a / V) * log2(V_a / V_parent) for every non-root tree node.
    """
    assignment = np.asarray(assignment)
    degree = [0.0] * graph.node_count
    for a, b, w in zip(graph.edges_u, graph.edges_v, graph.edge_weight):
        degree[int(a)] += float(w)
        degree[int(b)] += float(w)
    total = sum(degree)

    clusters = {}
    for node, cid in enumerate(assignment.tolist()):
        clusters.setdefault(cid, []).append(node)

    entropy = 0.0
    for members in clusters.values():
        member_set = set(members)
        vol = sum(degree[i] for i in members)
        cut = 0.0
        for a, b, w in zip(graph.edges_u, graph.edges_v, graph.edge_weight):
            if (int(a) in member_set) != (int(b) in member_set):
                cut += float(w)
        if vol > 0:
            entropy -= cut / total * math.log2(vol / total)
        for i in members:
            if degree[i] > 0:
                entropy -= degree[i] / total * math.log2(degree[i] / vol)
    return entropy


def planted_two_clique_graph(size_a, size_b, inter_weight=0.01):
    """Two unit-weight cliques joined by one weak bridge edge."""
    u, v, w = [], [], []
    for base, size in ((0, size_a), (size_a, size_b)):
        for i in range(size):
            for j in range(i + 1, size):
                u.append(base + i)
                v.append(base + j)
                w.append(1.0)
    u.append(size_a - 1)
    v.append(size_a)
    w.append(inter_weight)
    return PixelGraph.from_edges(size_a + size_b, u, v, w)


def lab_image_from_rgb(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    return LabImage(width=rgb.shape[1], height=rgb.shape[0], lab=rgb_to_lab(rgb))


def half_and_half_image(size=32):
    """Left half black, right half white."""
    rgb = np.zeros((size, size, 3), dtype=np.uint8)
    rgb[:, size // 2 :] = 255
    return lab_image_from_rgb(rgb)


def noise_image(width, height, seed=0):
    rng = np.random.default_rng(seed)
    return lab_image_from_rgb(rng.integers(0, 256, (height, width, 3)))


def smooth_natural_image(width, height, seed=7, scale=1.0):
    """Synthetic photograph-like image: smooth color fields plus mild noise.

    ``scale`` stretches the content so the same scene can be rendered at
    different resolutions.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    xx = xx / scale
    yy = yy / scale
    r = 127 + 90 * np.sin(xx / 57.0) * np.cos(yy / 43.0) + 20 * np.sin((xx + yy) / 11.0)
    g = 127 + 80 * np.cos(xx / 71.0 + 1.3) * np.sin(yy / 37.0) + 15 * np.cos(xx / 13.0)
    b = 127 + 70 * np.sin(xx / 89.0) + 50 * np.cos(yy / 61.0)
    noise = rng.normal(0, 6.0, (height, width, 3))
    rgb = np.clip(np.stack([r, g, b], axis=-1) + noise, 0, 255).astype(np.uint8)
    return rgb


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
