"""Superpixel segmentation by structural-entropy minimization.

Pipeline: build a weighted pixel graph whose neighborhood radius is chosen
by a 1D structural-entropy plateau, then hierarchically merge clusters by
2D structural-entropy descent down to exactly K connected superpixels, with
a dendrogram for multi-scale extraction and standard benchmark metrics.
"""

from .entropy import (
    ClusterStats,
    Partition,
    brute_force_min_2dse,
    merge_delta,
    merged_stats,
    two_dim_se,
)
from .image_io import (
    LabImage,
    LabelMap,
    boundary_mask,
    lab_to_rgb,
    load_image,
    load_label_map,
    render_overlay,
    rgb_to_lab,
    write_label_map,
)
from .metrics import (
    CSV_HEADER,
    MetricsReport,
    achievable_segmentation_accuracy,
    boundary_recall,
    evaluate,
    explained_variation,
    report_csv_row,
    undersegmentation_error,
)
from .partitioner import (
    Dendrogram,
    MergeEvent,
    PartitionState,
    best_target,
    cluster_graph,
    extract_level,
    init_partition,
    merge_round,
    segment,
)
from .pixel_graph import (
    GraphConfig,
    PixelGraph,
    build_graph_at_radius,
    edge_weights,
    neighborhood,
    one_dim_se,
    pixel_distance,
    select_radius,
)

__version__ = "0.1.0"

__all__ = [
    "CSV_HEADER",
    "ClusterStats",
    "Dendrogram",
    "GraphConfig",
    "LabImage",
    "LabelMap",
    "MergeEvent",
    "MetricsReport",
    "Partition",
    "PartitionState",
    "PixelGraph",
    "achievable_segmentation_accuracy",
    "best_target",
    "boundary_mask",
    "boundary_recall",
    "brute_force_min_2dse",
    "build_graph_at_radius",
    "cluster_graph",
    "edge_weights",
    "evaluate",
    "explained_variation",
    "extract_level",
    "init_partition",
    "lab_to_rgb",
    "load_image",
    "load_label_map",
    "merge_delta",
    "merge_round",
    "merged_stats",
    "neighborhood",
    "one_dim_se",
    "pixel_distance",
    "render_overlay",
    "report_csv_row",
    "rgb_to_lab",
    "segment",
    "select_radius",
    "two_dim_se",
    "undersegmentation_error",
    "write_label_map",
    "__version__",
]
