"""Image loading, CIELAB conversion, and label-map serialization.

All pixel features downstream are CIELAB (D65 reference white) unless the
caller explicitly requests raw RGB for ablation runs.  Label maps travel as
16-bit grayscale PNG or plain CSV grids and are always renumbered to a
contiguous 0..K-1 range on load.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

# sRGB -> XYZ linear transform (D65, 2 degree observer) and reference white.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE = np.array([0.95047, 1.0, 1.08883])
_DELTA = 6.0 / 29.0


@dataclass
class LabImage:
    """Pixel feature planes for one image.

    ``lab`` has shape (height, width, 3), float64, row-major pixel order.
    Despite the name the planes may hold raw RGB values when an ablation
    explicitly asks for it; every consumer treats them as opaque features.
    """

    width: int
    height: int
    lab: np.ndarray

    def features(self) -> np.ndarray:
        """Return the (N, 3) per-pixel feature matrix in row-major order."""
        return self.lab.reshape(-1, 3)


@dataclass
class LabelMap:
    """Integer segmentation labels, shape (height, width)."""

    width: int
    height: int
    labels: np.ndarray

    def num_labels(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert 8-bit sRGB values to CIELAB (D65).

    Args:
        rgb: array of shape (..., 3), values in 0..255.

    Returns:
        float64 array of the same shape holding L*, a*, b*.
    """
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB_TO_XYZ.T
    t = xyz / _WHITE
    f = np.where(t > _DELTA**3, np.cbrt(t), t / (3.0 * _DELTA**2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Invert :func:`rgb_to_lab`, returning uint8 sRGB (clipped to gamut)."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    t = np.where(f > _DELTA, f**3, 3.0 * _DELTA**2 * (f - 4.0 / 29.0))
    xyz = t * _WHITE
    lin = xyz @ _XYZ_TO_RGB.T
    lin = np.clip(lin, 0.0, 1.0)
    c = np.where(lin <= 0.0031308, lin * 12.92, 1.055 * lin ** (1.0 / 2.4) - 0.055)
    return np.clip(np.round(c * 255.0), 0, 255).astype(np.uint8)


def load_rgb(path: str) -> np.ndarray:
    """Load an image file as an (H, W, 3) uint8 RGB array."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"image not found: {path}")
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def load_image(path: str, color_space: str = "lab") -> LabImage:
    """Load an image and convert it to per-pixel features.

    Args:
        path: PNG/JPEG path; anything PIL reads and converts to RGB.
        color_space: "lab" (default) or "rgb" for ablation runs, in which
            case the feature planes hold the raw 0..255 channel values.

    Returns:
        LabImage with float64 feature planes.

    Raises:
        FileNotFoundError: path does not exist.
        ValueError: image smaller than 2x2 or unknown color space.
    """
    rgb = load_rgb(path)
    height, width = rgb.shape[:2]
    if width < 2 or height < 2:
        raise ValueError(f"image must be at least 2x2, got {width}x{height}")
    if color_space == "lab":
        planes = rgb_to_lab(rgb)
    elif color_space == "rgb":
        planes = rgb.astype(np.float64)
    else:
        raise ValueError(f"unknown color space: {color_space!r}")
    return LabImage(width=width, height=height, lab=planes)


def _renumber(labels: np.ndarray) -> np.ndarray:
    """Map arbitrary integer labels onto 0..K-1 (sorted-value order)."""
    _, inverse = np.unique(labels, return_inverse=True)
    return inverse.reshape(labels.shape).astype(np.int64)


def load_label_map(path: str) -> LabelMap:
    """Load a label map from 16-bit grayscale PNG or CSV grid.

    Labels are renumbered to contiguous 0..K-1.  CSV rows must be rectangular
    and hold integers only.

    Raises:
        FileNotFoundError: path does not exist.
        ValueError: multi-channel PNG, ragged rows, or non-integer cells.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"label map not found: {path}")
    if path.lower().endswith(".csv"):
        rows = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rows.append([int(cell) for cell in line.split(",")])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: non-integer label cell") from exc
        if not rows:
            raise ValueError(f"{path}: empty label CSV")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ValueError(f"{path}: ragged CSV rows, widths {sorted(widths)}")
        arr = np.array(rows, dtype=np.int64)
    else:
        with Image.open(path) as img:
            if img.mode not in ("L", "I", "I;16", "P"):
                raise ValueError(
                    f"{path}: label PNG must be single-channel, got mode {img.mode}"
                )
            arr = np.asarray(img.convert("I"), dtype=np.int64)
    labels = _renumber(arr)
    return LabelMap(width=arr.shape[1], height=arr.shape[0], labels=labels)


def write_label_map(label_map: LabelMap, path: str) -> None:
    """Write labels as 16-bit grayscale PNG (or CSV when path ends .csv)."""
    labels = label_map.labels
    if path.lower().endswith(".csv"):
        np.savetxt(path, labels, fmt="%d", delimiter=",")
        return
    if labels.max(initial=0) > np.iinfo(np.uint16).max:
        raise ValueError("more than 65536 labels cannot be stored in 16-bit PNG")
    Image.fromarray(labels.astype(np.uint16)).save(path)


def boundary_mask(labels: np.ndarray) -> np.ndarray:
    """Pixels with a 4-neighbor carrying a different label."""
    mask = np.zeros(labels.shape, dtype=bool)
    horiz = labels[:, :-1] != labels[:, 1:]
    vert = labels[:-1, :] != labels[1:, :]
    mask[:, :-1] |= horiz
    mask[:, 1:] |= horiz
    mask[:-1, :] |= vert
    mask[1:, :] |= vert
    return mask


def render_overlay(rgb: np.ndarray, label_map: LabelMap, color=(255, 0, 0)) -> np.ndarray:
    """Paint segment boundaries onto an RGB image copy."""
    if rgb.shape[:2] != label_map.labels.shape:
        raise ValueError("overlay image and label map dimensions differ")
    out = np.array(rgb, dtype=np.uint8, copy=True)
    out[boundary_mask(label_map.labels)] = color
    return out
