"""Grayscale images, label maps, file I/O and synthetic phantoms.

Images are 8-bit grayscale held as read-only numpy arrays of shape
(height, width). Label maps hold class indices in {1..K}. The canonical
on-disk format is binary PGM ("P5", maxval 255); 8-bit single-channel PNG
is accepted read-only. Label maps are stored as PGM with labels spread
linearly over [0, 255] and the class count K recorded in a sidecar text
file ``<path>.meta`` so the encoding is invertible.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

__all__ = [
    "ImageFormatError",
    "GrayImage",
    "LabelMap",
    "PhantomSpec",
    "load_gray_image",
    "save_gray_image",
    "save_label_map",
    "load_label_map",
    "generate_phantom",
]

# Reject absurd PGM headers before allocating anything.
MAX_PIXELS = 100_000_000

PGM_MAGIC = b"P5"
PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

REGION_LAYOUTS = ("horizontal-bands", "concentric-disks")


class ImageFormatError(ValueError):
    """Raised for unsupported or malformed image files."""


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale image; intensities in [0, 255], row-major layout."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8, read-only

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        arr = np.asarray(self.pixels)
        if arr.size != self.width * self.height:
            raise ValueError(
                f"pixel count {arr.size} != width*height {self.width * self.height}"
            )
        if arr.dtype != np.uint8:
            if np.any(arr < 0) or np.any(arr > 255):
                raise ValueError("pixel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = arr.reshape(self.height, self.width)
        object.__setattr__(self, "pixels", _as_readonly(arr))

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel class labels in {1..num_classes}, row-major layout."""

    width: int
    height: int
    labels: np.ndarray  # (height, width) int32, read-only
    num_classes: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("label map dimensions must be positive")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        arr = np.asarray(self.labels, dtype=np.int32)
        if arr.size != self.width * self.height:
            raise ValueError(
                f"label count {arr.size} != width*height {self.width * self.height}"
            )
        if arr.size and (arr.min() < 1 or arr.max() > self.num_classes):
            raise ValueError(f"labels must lie in [1, {self.num_classes}]")
        arr = arr.reshape(self.height, self.width)
        object.__setattr__(self, "labels", _as_readonly(arr))

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.num_classes == other.num_classes
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class PhantomSpec:
    """Recipe for a synthetic test image with known ground truth.

    ``class_means`` must be strictly ascending intensities in [0, 255];
    one region per class is laid out per ``region_layout`` and Gaussian
    noise of ``noise_sigma`` is added, then clamped back to [0, 255].
    Identical specs always produce identical outputs.
    """

    width: int
    height: int
    class_means: tuple[float, ...]
    region_layout: str = "horizontal-bands"
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("phantom dimensions must be positive")
        means = tuple(float(m) for m in self.class_means)
        if len(means) < 2:
            raise ValueError("need at least 2 class means")
        if any(b <= a for a, b in zip(means, means[1:])):
            raise ValueError("class_means must be strictly ascending")
        if means[0] < 0 or means[-1] > 255:
            raise ValueError("class_means must lie in [0, 255]")
        if self.region_layout not in REGION_LAYOUTS:
            raise ValueError(f"region_layout must be one of {REGION_LAYOUTS}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "class_means", means)


def _tokenize_pgm_header(data: bytes) -> tuple[list[int], int]:
    """Read magic + 3 integer tokens, skipping whitespace and # comments.

    Returns the parsed (width, height, maxval) and the offset of the first
    raster byte (one whitespace character past the maxval token).
    """
    whitespace = b" \t\n\r\x0b\x0c"
    pos = len(PGM_MAGIC)
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(data) and (
            data[pos : pos + 1] in (b"#",) or data[pos] in whitespace
        ):
            if data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and data[pos] not in whitespace:
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PGM header")
        try:
            tokens.append(int(data[start:pos]))
        except ValueError:
            raise ImageFormatError(
                f"malformed PGM header token {data[start:pos]!r}"
            ) from None
    if pos >= len(data) or data[pos] not in whitespace:
        raise ImageFormatError("PGM raster must follow a single whitespace byte")
    return tokens, pos + 1


def _load_pgm(data: bytes) -> GrayImage:
    (width, height, maxval), offset = _tokenize_pgm_header(data)
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"bad PGM dimensions {width}x{height}")
    if width * height > MAX_PIXELS:
        raise ImageFormatError(f"PGM dimensions {width}x{height} overflow limit")
    if maxval != 255:
        raise ImageFormatError(f"unsupported PGM maxval {maxval} (only 255)")
    raster = data[offset : offset + width * height]
    if len(raster) < width * height:
        raise ImageFormatError("PGM raster shorter than header promises")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GrayImage(width, height, pixels)


def _load_png(data: bytes) -> GrayImage:
    with Image.open(io.BytesIO(data)) as img:
        if img.mode != "L":
            raise ImageFormatError(
                f"PNG mode {img.mode!r} not supported; need 8-bit grayscale ('L')"
            )
        if img.width * img.height > MAX_PIXELS:
            raise ImageFormatError("PNG dimensions overflow limit")
        pixels = np.asarray(img, dtype=np.uint8)
    return GrayImage(pixels.shape[1], pixels.shape[0], pixels)


def load_gray_image(path) -> GrayImage:
    """Load a binary PGM (P5, maxval 255) or 8-bit grayscale PNG.

    The format is sniffed from magic bytes, not the file extension.
    Multi-channel or high-bit-depth PNGs are rejected, never converted.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(PGM_MAGIC):
        return _load_pgm(data)
    if data.startswith(PNG_MAGIC):
        return _load_png(data)
    raise ImageFormatError(f"{path}: neither binary PGM (P5) nor PNG")


def save_gray_image(image: GrayImage, path) -> None:
    """Write a GrayImage as binary PGM (P5, maxval 255)."""
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(image.pixels.tobytes())


def _label_to_gray(labels: np.ndarray, num_classes: int) -> np.ndarray:
    if num_classes == 1:
        return np.zeros_like(labels, dtype=np.uint8)
    scale = 255.0 / (num_classes - 1)
    return np.rint((labels - 1) * scale).astype(np.uint8)


def _gray_to_label(pixels: np.ndarray, num_classes: int) -> np.ndarray:
    if num_classes == 1:
        return np.ones_like(pixels, dtype=np.int32)
    scale = (num_classes - 1) / 255.0
    return (np.rint(pixels.astype(np.float64) * scale) + 1).astype(np.int32)


def save_label_map(labels: LabelMap, path) -> None:
    """Write a LabelMap as PGM plus a ``<path>.meta`` sidecar recording K.

    Gray value = round((label-1) * 255/(K-1)); all zeros for K=1. The
    sidecar makes the linear scaling invertible, so K must not exceed 256
    (coarser spacing would collide on 8-bit output).
    """
    if labels.num_classes > 256:
        raise ValueError("cannot encode more than 256 classes in 8-bit PGM")
    gray = _label_to_gray(labels.labels, labels.num_classes)
    save_gray_image(GrayImage(labels.width, labels.height, gray), path)
    with open(f"{path}.meta", "w", encoding="utf-8") as fh:
        fh.write(f"classes={labels.num_classes}\n")


def load_label_map(path, num_classes: int | None = None) -> LabelMap:
    """Load a label map stored by :func:`save_label_map`.

    K is read from the ``<path>.meta`` sidecar unless ``num_classes`` is
    given explicitly (useful for externally produced ground truths that
    use the same linear gray coding but lack a sidecar).
    """
    if num_classes is None:
        num_classes = _read_sidecar_classes(f"{path}.meta")
    if num_classes < 1:
        raise ValueError("num_classes must be >= 1")
    image = load_gray_image(path)
    labels = _gray_to_label(image.pixels, num_classes)
    return LabelMap(image.width, image.height, labels, num_classes)


def _read_sidecar_classes(meta_path) -> int:
    with open(meta_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("classes="):
                return int(line.split("=", 1)[1])
    raise ImageFormatError(f"{meta_path}: no 'classes=' entry")


def _layout_labels(spec: PhantomSpec) -> np.ndarray:
    k = len(spec.class_means)
    h, w = spec.height, spec.width
    if spec.region_layout == "horizontal-bands":
        rows = np.arange(h)
        band = np.minimum(k, 1 + (rows * k) // h).astype(np.int32)
        return np.repeat(band[:, None], w, axis=1)
    # concentric-disks: class 1 innermost, class K outermost
    ci, cj = (h - 1) / 2.0, (w - 1) / 2.0
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    r = np.hypot(ii - ci, jj - cj)
    r_max = r.max()
    if r_max == 0:
        return np.ones((h, w), dtype=np.int32)
    return np.minimum(k, 1 + (r / r_max * k).astype(np.int32)).astype(np.int32)


def generate_phantom(spec: PhantomSpec) -> tuple[GrayImage, LabelMap]:
    """Build a synthetic (image, ground-truth) pair from a PhantomSpec.

    Pure function of the spec: the PRNG is seeded from ``spec.seed``, so
    identical specs yield bit-identical outputs.
    """
    labels = _layout_labels(spec)
    means = np.asarray(spec.class_means, dtype=np.float64)
    clean = means[labels - 1]
    rng = np.random.default_rng(spec.seed)
    noisy = clean + rng.normal(0.0, spec.noise_sigma, size=clean.shape)
    pixels = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
    image = GrayImage(spec.width, spec.height, pixels)
    truth = LabelMap(spec.width, spec.height, labels, len(spec.class_means))
    return image, truth
