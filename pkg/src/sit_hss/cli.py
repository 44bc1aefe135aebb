"""Command-line interface: segment images, evaluate label maps, run benchmark sweeps.

Exit codes: 0 success, 1 runtime or I/O error, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from . import image_io, metrics
from .entropy import brute_force_min_2dse
from .partitioner import Dendrogram, extract_level, segment
from .pixel_graph import GraphConfig, PixelGraph, select_radius

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}
LABEL_EXTENSIONS = {".png", ".csv"}


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive real, got {text}")
    return value


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sit-hss",
        description="Superpixel segmentation by structural-entropy minimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment one image into K superpixels")
    seg.add_argument("--input", required=True, help="input image (PNG/JPEG)")
    seg.add_argument("--k", required=True, type=_positive_int, help="target superpixel count")
    seg.add_argument("--t", type=_positive_float, default=0.1, help="weight bandwidth")
    seg.add_argument("--tau", type=_positive_float, default=2e-7, help="entropy plateau threshold")
    seg.add_argument("--r-max", type=_positive_int, default=5, help="largest radius probed")
    seg.add_argument("--levels", default=None, help="comma-separated extra level counts")
    seg.add_argument("--color-space", choices=("lab", "rgb"), default="lab",
                     help="pixel feature space (rgb is an ablation)")
    seg.add_argument("--out", required=True, help="output label map (PNG or CSV)")
    seg.add_argument("--overlay", default=None, help="optional boundary overlay PNG")
    seg.add_argument("--dendrogram", default=None, help="optional merge-log JSON")
    seg.set_defaults(func=cmd_segment)

    ev = sub.add_parser("eval", help="score a label map against ground truth")
    ev.add_argument("--labels", required=True, help="predicted label map (PNG or CSV)")
    ev.add_argument("--gt", required=True, help="ground-truth label map(s), comma-separated")
    ev.add_argument("--image", required=True, help="source image for explained variation")
    ev.add_argument("--br-tolerance", type=_nonnegative_int, default=2)
    ev.add_argument("--gt-reduce", choices=("mean", "best"), default="mean")
    ev.set_defaults(func=cmd_eval)

    bench = sub.add_parser("bench", help="sweep K over an image directory")
    bench.add_argument("--images", required=True, help="directory of input images")
    bench.add_argument("--gt", required=True, help="directory of ground-truth maps")
    bench.add_argument("--k-range", required=True, help="lo:hi:step, hi inclusive")
    bench.add_argument("--t", type=_positive_float, default=0.1)
    bench.add_argument("--tau", type=_positive_float, default=2e-7)
    bench.add_argument("--r-max", type=_positive_int, default=5)
    bench.add_argument("--br-tolerance", type=_nonnegative_int, default=2)
    bench.add_argument("--gt-reduce", choices=("mean", "best"), default="mean")
    bench.add_argument("--report", required=True, help="output CSV path")
    bench.set_defaults(func=cmd_bench)

    oracle = sub.add_parser("oracle")  # hidden utility for test harnesses
    oracle.add_argument("--edges", required=True, help="CSV edge list i,j,w")
    oracle.add_argument("--k", type=_positive_int, default=None)
    oracle.set_defaults(func=cmd_oracle)

    return parser


def _parse_levels(text: str, parser, k: int, n: int):
    try:
        levels = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        parser.error(f"--levels must be comma-separated integers, got {text!r}")
    if not levels:
        parser.error("--levels must name at least one level")
    for level in levels:
        if not k <= level <= n:
            parser.error(f"--levels value {level} outside [{k}, {n}]")
    return levels


def cmd_segment(args, parser) -> int:
    start = time.perf_counter()
    image = image_io.load_image(args.input, color_space=args.color_space)
    n = image.width * image.height
    if args.k > n:
        parser.error(f"--k {args.k} exceeds pixel count {n}")
    levels = _parse_levels(args.levels, parser, args.k, n) if args.levels else None
    config = GraphConfig(t=args.t, tau=args.tau, r_max=args.r_max)
    radius, graph = select_radius(image, config)
    label_map, dendrogram = segment(graph, image.width, image.height, args.k)

    if levels:
        stem, ext = os.path.splitext(args.out)
        for level in levels:
            level_map = extract_level(dendrogram, image.width, image.height, level)
            image_io.write_label_map(level_map, f"{stem}_{level}{ext or '.png'}")
    else:
        image_io.write_label_map(label_map, args.out)

    if args.overlay:
        rgb = image_io.load_rgb(args.input)
        overlay = image_io.render_overlay(rgb, label_map)
        Image.fromarray(overlay, mode="RGB").save(args.overlay)
    if args.dendrogram:
        with open(args.dendrogram, "w", encoding="utf-8") as fh:
            fh.write(dendrogram.to_json() + "\n")

    seconds = time.perf_counter() - start
    print(f"radius={radius} rounds={dendrogram.round_count()} seconds={seconds:.3f}")
    return 0


def cmd_eval(args, parser) -> int:
    start = time.perf_counter()
    labels = image_io.load_label_map(args.labels)
    gt_paths = [p.strip() for p in args.gt.split(",") if p.strip()]
    if not gt_paths:
        parser.error("--gt must name at least one file")
    gts = [image_io.load_label_map(path) for path in gt_paths]
    image = image_io.load_image(args.image)
    if (labels.height, labels.width) != (image.height, image.width):
        raise ValueError(
            f"label map {labels.width}x{labels.height} does not match "
            f"image {image.width}x{image.height}"
        )
    report = metrics.evaluate(labels, gts, image, tolerance=args.br_tolerance,
                              reduce=args.gt_reduce)
    seconds = time.perf_counter() - start
    row = metrics.report_csv_row(
        Path(args.labels).stem,
        labels.labels.max() + 1,
        None,
        None,
        None,
        report,
        seconds,
    )
    print(row)
    return 0


def _parse_k_range(text: str, parser):
    parts = text.split(":")
    if len(parts) != 3:
        parser.error(f"--k-range must be lo:hi:step, got {text!r}")
    try:
        lo, hi, step = (int(p) for p in parts)
    except ValueError:
        parser.error(f"--k-range must be integers, got {text!r}")
    if lo < 1 or hi < lo or step < 1:
        parser.error(f"--k-range values out of order: {text!r}")
    return list(range(lo, hi + 1, step))


def _match_pairs(image_dir: Path, gt_dir: Path):
    # gt files match an image stem exactly or as "<stem>.<anything>"
    images = sorted(
        p for p in image_dir.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )
    gt_files = sorted(
        p for p in gt_dir.iterdir()
        if p.is_file() and p.suffix.lower() in LABEL_EXTENSIONS
    )
    pairs = []
    for img in images:
        stem = img.stem
        matched = [g for g in gt_files if g.stem == stem or g.stem.startswith(stem + ".")]
        if matched:
            pairs.append((img, matched))
    return pairs


def _worker_count() -> int:
    env = os.environ.get("SIT_HSS_THREADS", "").strip()
    if env:
        value = int(env)
        if value < 0:
            raise ValueError(f"SIT_HSS_THREADS must be >= 0, got {env}")
        if value > 0:
            return value
    return os.cpu_count() or 1


def _bench_one(image_path: Path, gt_paths, k: int, config: GraphConfig, tolerance: int,
               reduce: str) -> str:
    start = time.perf_counter()
    image = image_io.load_image(str(image_path))
    gts = [image_io.load_label_map(str(p)) for p in gt_paths]
    for gt in gts:
        if (gt.height, gt.width) != (image.height, image.width):
            raise ValueError(f"{image_path.name}: ground truth size mismatch")
    radius, graph = select_radius(image, config)
    label_map, _ = segment(graph, image.width, image.height, k)
    report = metrics.evaluate(label_map, gts, image, tolerance=tolerance, reduce=reduce)
    seconds = time.perf_counter() - start
    return metrics.report_csv_row(
        image_path.stem, k, config.t, config.tau, radius, report, seconds
    )


def cmd_bench(args, parser) -> int:
    image_dir = Path(args.images)
    gt_dir = Path(args.gt)
    if not image_dir.is_dir():
        raise FileNotFoundError(f"image directory not found: {image_dir}")
    if not gt_dir.is_dir():
        raise FileNotFoundError(f"ground-truth directory not found: {gt_dir}")
    k_values = _parse_k_range(args.k_range, parser)
    pairs = _match_pairs(image_dir, gt_dir)
    if not pairs:
        print("error: no image/ground-truth pairs matched by stem", file=sys.stderr)
        return 1

    config = GraphConfig(t=args.t, tau=args.tau, r_max=args.r_max)
    jobs = [(img, gts, k) for img, gts in pairs for k in k_values]
    workers = min(_worker_count(), len(jobs))
    if workers <= 1:
        rows = [
            _bench_one(img, gts, k, config, args.br_tolerance, args.gt_reduce)
            for img, gts, k in jobs
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_bench_one, img, gts, k, config, args.br_tolerance, args.gt_reduce)
                for img, gts, k in jobs
            ]
            rows = [f.result() for f in futures]

    lines = [metrics.CSV_HEADER]
    lines.extend(rows)
    # aggregate mean row per K over all images, numeric columns averaged
    by_k = {k: [] for k in k_values}
    for (img, gts, k), row in zip(jobs, rows):
        by_k[k].append(row.split(","))
    for k in k_values:
        cells = by_k[k]
        means = []
        for col in range(2, len(metrics.CSV_HEADER.split(","))):
            values = [float(c[col]) for c in cells]
            means.append(f"{float(np.mean(values)):.6f}")
        lines.append(",".join([f"__mean__,{k}"] + means))
    with open(args.report, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {len(rows)} data rows + {len(k_values)} mean rows to {args.report}")
    return 0


def cmd_oracle(args, parser) -> int:
    edges_u, edges_v, weights = [], [], []
    with open(args.edges, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{args.edges}:{lineno}: expected 'i,j,w'")
            edges_u.append(int(parts[0]))
            edges_v.append(int(parts[1]))
            weights.append(float(parts[2]))
    if not edges_u:
        raise ValueError(f"{args.edges}: no edges found")
    node_count = max(max(edges_u), max(edges_v)) + 1
    graph = PixelGraph.from_edges(node_count, edges_u, edges_v, weights)
    partition, entropy = brute_force_min_2dse(graph, args.k)
    print("partition=" + ",".join(str(int(c)) for c in partition.assignment))
    print(f"entropy={entropy:.12g}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
