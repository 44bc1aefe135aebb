"""Weighted pixel graph construction and neighborhood-radius selection.

Pixels are nodes; edges connect pixels within a Chebyshev radius r and carry
similarity weights derived from joint color/spatial distance.  The radius is
not a user knob: it is chosen by scanning r = 1, 2, ... and stopping at the
first plateau of the one-dimensional structural entropy of the graph.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .image_io import LabImage

logger = logging.getLogger(__name__)


@dataclass
class GraphConfig:
    """Knobs for graph construction and radius selection.

    Attributes:
        t: weight bandwidth; distances are divided by t * mean(distance).
        tau: plateau threshold on the 1D structural-entropy increment.
        r_max: largest radius probed before giving up with a warning.
        rescale_per_radius: recompute the mean-distance normalizer for each
            candidate radius (default).  When False the normalizer measured
            at r = 1 is reused for every larger radius, which makes weights
            of shared edges identical across candidate graphs.
    """

    t: float = 0.1
    tau: float = 2e-7
    r_max: int = 5
    rescale_per_radius: bool = True

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError(f"t must be positive, got {self.t}")
        if self.tau < 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if not 1 <= self.r_max <= 16:
            raise ValueError(f"r_max must be in 1..16, got {self.r_max}")


@dataclass
class PixelGraph:
    """Undirected weighted graph in edge-array form.

    Each undirected edge is stored once with ``edges_u < edges_v``; degrees
    are weighted degrees and ``volume`` is their sum (twice the total edge
    weight).  ``width``/``height`` are 0 for graphs that did not come from
    an image lattice.
    """

    node_count: int
    radius: int
    edges_u: np.ndarray
    edges_v: np.ndarray
    edge_weight: np.ndarray
    degree: np.ndarray = field(repr=False)
    volume: float
    width: int = 0
    height: int = 0

    @classmethod
    def from_edges(cls, node_count, u, v, w, radius=0, width=0, height=0):
        """Build a graph from parallel edge arrays (order-insensitive pairs).

        Raises:
            ValueError: on self-loops, duplicate pairs, nonpositive weights,
                or endpoints outside 0..node_count-1.
        """
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        w = np.asarray(w, dtype=np.float64)
        if not (u.shape == v.shape == w.shape):
            raise ValueError("edge arrays must have identical length")
        if u.size:
            if u.min() < 0 or v.min() < 0 or max(u.max(), v.max()) >= node_count:
                raise ValueError("edge endpoint out of range")
            if np.any(u == v):
                raise ValueError("self-loops are not allowed")
            if np.any(w <= 0):
                raise ValueError("edge weights must be positive")
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        keys = lo * np.int64(node_count) + hi
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate edges are not allowed")
        order = np.argsort(keys, kind="stable")
        lo, hi, w = lo[order], hi[order], w[order]
        degree = np.bincount(lo, weights=w, minlength=node_count)
        degree += np.bincount(hi, weights=w, minlength=node_count)
        return cls(
            node_count=node_count,
            radius=radius,
            edges_u=lo,
            edges_v=hi,
            edge_weight=w,
            degree=degree,
            volume=float(degree.sum()),
            width=width,
            height=height,
        )

    def edge_count(self) -> int:
        return int(self.edges_u.size)

    def neighbor_lists(self):
        """Adjacency-list view: list of (neighbor, weight) lists per node."""
        adj = [[] for _ in range(self.node_count)]
        for a, b, w in zip(self.edges_u, self.edges_v, self.edge_weight):
            adj[int(a)].append((int(b), float(w)))
            adj[int(b)].append((int(a), float(w)))
        return adj


def pixel_distance(color_i, pos_i, color_j, pos_j) -> float:
    """Joint distance: squared color distance times Euclidean pixel distance."""
    ci = np.asarray(color_i, dtype=np.float64)
    cj = np.asarray(color_j, dtype=np.float64)
    color = float(((ci - cj) ** 2).sum())
    spatial = math.hypot(pos_i[0] - pos_j[0], pos_i[1] - pos_j[1])
    return color * spatial


def edge_weights(distances, t: float, mean_distance: float | None = None) -> np.ndarray:
    """Map distances to similarity weights exp(-d / (t * mean)).

    The normalizer defaults to the mean of ``distances`` itself.  A mean
    below 1e-12 (all-identical pixels) degenerates to weight 1 everywhere.
    """
    d = np.asarray(distances, dtype=np.float64)
    m = float(d.mean()) if mean_distance is None else float(mean_distance)
    if m < 1e-12:
        return np.ones_like(d)
    return np.exp(-d / (t * m))


def neighborhood(index: int, radius: int, width: int, height: int):
    """Node ids within Chebyshev ``radius`` of ``index`` on the lattice."""
    y, x = divmod(index, width)
    ys = range(max(0, y - radius), min(height - 1, y + radius) + 1)
    xs = range(max(0, x - radius), min(width - 1, x + radius) + 1)
    return [yy * width + xx for yy in ys for xx in xs if (yy, xx) != (y, x)]


def _half_offsets(radius: int):
    """Offsets (dy, dx) covering each unordered pair once, ring == radius."""
    out = []
    for dy in range(0, radius + 1):
        for dx in range(-radius, radius + 1):
            if max(abs(dy), abs(dx)) != radius:
                continue
            if dy > 0 or (dy == 0 and dx > 0):
                out.append((dy, dx))
    return out


def _offset_edges(lab: np.ndarray, dy: int, dx: int):
    """Edge endpoints and raw distances for one lattice offset."""
    height, width = lab.shape[:2]
    if dy >= height or abs(dx) >= width:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0, dtype=np.float64)
    idx = np.arange(height * width, dtype=np.int64).reshape(height, width)
    if dx >= 0:
        src = (slice(0, height - dy), slice(0, width - dx))
        dst = (slice(dy, height), slice(dx, width))
    else:
        src = (slice(0, height - dy), slice(-dx, width))
        dst = (slice(dy, height), slice(0, width + dx))
    u = idx[src].ravel()
    v = idx[dst].ravel()
    diff = lab[src] - lab[dst]
    dist = (diff * diff).sum(axis=-1).ravel() * math.hypot(dy, dx)
    return np.minimum(u, v), np.maximum(u, v), dist


def _ring_edges(lab: np.ndarray, radius: int):
    """All unordered pixel pairs at Chebyshev distance exactly ``radius``."""
    us, vs, ds = [], [], []
    for dy, dx in _half_offsets(radius):
        u, v, d = _offset_edges(lab, dy, dx)
        us.append(u)
        vs.append(v)
        ds.append(d)
    return np.concatenate(us), np.concatenate(vs), np.concatenate(ds)


def _assemble(image: LabImage, radius, u, v, dist, t, mean_distance=None) -> PixelGraph:
    n = image.width * image.height
    w = edge_weights(dist, t, mean_distance)
    degree = np.bincount(u, weights=w, minlength=n)
    degree += np.bincount(v, weights=w, minlength=n)
    return PixelGraph(
        node_count=n,
        radius=radius,
        edges_u=u,
        edges_v=v,
        edge_weight=w,
        degree=degree,
        volume=float(degree.sum()),
        width=image.width,
        height=image.height,
    )


def build_graph_at_radius(image: LabImage, radius: int, t: float) -> PixelGraph:
    """Build the pixel graph with all edges up to Chebyshev ``radius``."""
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    us, vs, ds = [], [], []
    for r in range(1, radius + 1):
        u, v, d = _ring_edges(image.lab, r)
        us.append(u)
        vs.append(v)
        ds.append(d)
    return _assemble(
        image, radius, np.concatenate(us), np.concatenate(vs), np.concatenate(ds), t
    )


def one_dim_se(graph: PixelGraph) -> float:
    """One-dimensional structural entropy, log base 2.

    Entropy of the degree distribution: -sum_i (d_i/V) log2(d_i/V) over
    nodes with positive degree.
    """
    if graph.volume <= 0:
        raise ValueError("graph volume must be positive")
    p = graph.degree[graph.degree > 0] / graph.volume
    return float(-(p * np.log2(p)).sum())


def select_radius(image: LabImage, config: GraphConfig | None = None):
    """Scan radii and stop at the first 1D structural-entropy plateau.

    Builds graphs for r = 1, 2, ... and returns ``(r - 1, graph_{r-1})`` for
    the first r >= 2 whose entropy increment H1(r) - H1(r-1) is <= tau.  If
    no plateau appears up to ``r_max``, returns ``(r_max, graph_{r_max})``
    and logs a warning.
    """
    cfg = config or GraphConfig()
    us, vs, ds = [], [], []
    prev_graph = None
    prev_entropy = None
    frozen_mean = None
    for r in range(1, cfg.r_max + 1):
        u, v, d = _ring_edges(image.lab, r)
        us.append(u)
        vs.append(v)
        ds.append(d)
        dist = np.concatenate(ds)
        if not cfg.rescale_per_radius:
            if frozen_mean is None:
                frozen_mean = float(dist.mean())
            mean = frozen_mean
        else:
            mean = None
        graph = _assemble(
            image, r, np.concatenate(us), np.concatenate(vs), dist, cfg.t, mean
        )
        entropy = one_dim_se(graph)
        if prev_entropy is not None and entropy - prev_entropy <= cfg.tau:
            return r - 1, prev_graph
        prev_graph = graph
        prev_entropy = entropy
    logger.warning(
        "no structural-entropy plateau up to r_max=%d; using r_max", cfg.r_max
    )
    return cfg.r_max, prev_graph
