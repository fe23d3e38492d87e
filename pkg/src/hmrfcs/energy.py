"""The HMRF segmentation objective.

A candidate solution is a vector of K class means mu (any real values;
out-of-range components are charged a linear penalty). The labeling
induced by mu assigns every pixel to its nearest mean; the energy sums a
Gaussian data term over the induced classes — ln(sigma_j) plus squared
residuals against mu_j, with per-class standard deviations estimated from
the labeling itself — and a Potts-style clique potential (B/T) * sum over
neighboring pairs of (1 - 2*delta(x_s, x_t)). Minimizing this energy over
mu is what the cuckoo-search optimizer does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .images import GrayImage, LabelMap

__all__ = [
    "ClassStats",
    "EnergyParams",
    "classify",
    "class_stats",
    "clique_sum",
    "psi",
    "SegmentationObjective",
]

NEIGHBORHOODS = (4, 8)


@dataclass(frozen=True)
class EnergyParams:
    """Knobs of the energy function.

    B weights the clique potential, T (temperature) divides it.
    sigma_floor keeps ln(sigma) finite when a class has zero variance;
    penalty_slope is the per-intensity-unit charge for mean components
    outside [0, 255].
    """

    B: float = 1.0
    T: float = 4.0
    neighborhood: int = 8
    sigma_floor: float = 1e-2
    penalty_slope: float = 1e3

    def __post_init__(self):
        if self.B <= 0:
            raise ValueError("B must be positive")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.neighborhood not in NEIGHBORHOODS:
            raise ValueError(f"neighborhood must be one of {NEIGHBORHOODS}")
        if self.sigma_floor <= 0:
            raise ValueError("sigma_floor must be positive")
        if self.penalty_slope <= 0:
            raise ValueError("penalty_slope must be positive")


@dataclass(frozen=True)
class ClassStats:
    """Per-class pixel statistics of a labeling.

    means/stddevs are population statistics (divide by class size);
    stddevs are floored. Empty classes get mean 0, stddev == the floor,
    and count 0.
    """

    means: np.ndarray
    stddevs: np.ndarray
    counts: np.ndarray


def _classify_flat(y: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """0-based nearest-mean labels; ties go to the lowest class index."""
    dist = np.abs(y[:, None] - mu[None, :])
    return dist.argmin(axis=1)


def classify(image: GrayImage, mu) -> LabelMap:
    """Assign each pixel to the class of its nearest mean.

    Ties break toward the smaller class index. Total on any real-valued
    mu; values outside [0, 255] are used as given (no clamping here).
    """
    mu = np.asarray(mu, dtype=np.float64)
    if mu.ndim != 1 or mu.size < 1:
        raise ValueError("mu must be a non-empty 1-D vector")
    y = image.pixels.astype(np.float64).ravel()
    labels = _classify_flat(y, mu) + 1
    return LabelMap(image.width, image.height, labels, mu.size)


def _label_moments(y: np.ndarray, y2: np.ndarray, labels0: np.ndarray, k: int):
    counts = np.bincount(labels0, minlength=k).astype(np.float64)
    sums = np.bincount(labels0, weights=y, minlength=k)
    sqsums = np.bincount(labels0, weights=y2, minlength=k)
    return counts, sums, sqsums


def _floored_stddevs(
    counts: np.ndarray, sums: np.ndarray, sqsums: np.ndarray, sigma_floor: float
) -> tuple[np.ndarray, np.ndarray]:
    """Population means/stddevs per class; empty classes get (0, floor)."""
    k = counts.size
    means = np.zeros(k)
    var = np.zeros(k)
    occupied = counts > 0
    means[occupied] = sums[occupied] / counts[occupied]
    # max() guards tiny negative residuals from floating-point cancellation
    var[occupied] = np.maximum(
        sqsums[occupied] / counts[occupied] - means[occupied] ** 2, 0.0
    )
    stddevs = np.maximum(np.sqrt(var), sigma_floor)
    return means, stddevs


def class_stats(
    image: GrayImage, labels: LabelMap, sigma_floor: float = 1e-2
) -> ClassStats:
    """Population mean/stddev and pixel count of every class in a labeling."""
    if (image.width, image.height) != (labels.width, labels.height):
        raise ValueError("image and label map dimensions differ")
    y = image.pixels.astype(np.float64).ravel()
    labels0 = labels.labels.ravel() - 1
    counts, sums, sqsums = _label_moments(y, y * y, labels0, labels.num_classes)
    means, stddevs = _floored_stddevs(counts, sums, sqsums, sigma_floor)
    return ClassStats(means=means, stddevs=stddevs, counts=counts.astype(np.int64))


def _clique_sum_grid(grid: np.ndarray, neighborhood: int) -> int:
    pairs = [
        (grid[:, :-1], grid[:, 1:]),  # horizontal
        (grid[:-1, :], grid[1:, :]),  # vertical
    ]
    if neighborhood == 8:
        pairs += [
            (grid[:-1, :-1], grid[1:, 1:]),  # diagonal down-right
            (grid[:-1, 1:], grid[1:, :-1]),  # diagonal down-left
        ]
    total = 0
    for a, b in pairs:
        equal = int(np.count_nonzero(a == b))
        total += a.size - 2 * equal  # each pair adds 1 - 2*delta
    return total


def clique_sum(labels: LabelMap, neighborhood: int = 8) -> int:
    """Sum of (1 - 2*delta(x_s, x_t)) over unordered neighboring pairs.

    4-connected counts horizontal and vertical pairs; 8-connected adds
    both diagonals. Pairs crossing the border are simply absent.
    """
    if neighborhood not in NEIGHBORHOODS:
        raise ValueError(f"neighborhood must be one of {NEIGHBORHOODS}")
    return _clique_sum_grid(labels.labels, neighborhood)


def _psi_flat(
    y: np.ndarray,
    y2: np.ndarray,
    height: int,
    width: int,
    mu: np.ndarray,
    params: EnergyParams,
) -> float:
    k = mu.size
    mu_c = np.clip(mu, 0.0, 255.0)
    labels0 = _classify_flat(y, mu_c)
    counts, sums, sqsums = _label_moments(y, y2, labels0, k)
    _, stddevs = _floored_stddevs(counts, sums, sqsums, params.sigma_floor)

    occupied = counts > 0
    # sum over class members of (y - mu_j)^2, expanded so one pass suffices
    resid = (
        sqsums[occupied]
        - 2.0 * mu_c[occupied] * sums[occupied]
        + counts[occupied] * mu_c[occupied] ** 2
    )
    data = float(
        np.sum(
            counts[occupied] * np.log(stddevs[occupied])
            + resid / (2.0 * stddevs[occupied] ** 2)
        )
    )

    clique = _clique_sum_grid(labels0.reshape(height, width), params.neighborhood)
    excursion = float(np.sum(np.maximum(0.0, -mu) + np.maximum(0.0, mu - 255.0)))
    return data + (params.B / params.T) * clique + params.penalty_slope * excursion


def psi(image: GrayImage, mu, params: EnergyParams) -> float:
    """Penalty-extended segmentation energy of a candidate means vector.

    Components of mu outside [0, 255] participate via their clamped value
    (for classification and the data term) and add penalty_slope times
    the excursion, which keeps the function total and finite on R^K.
    Pure: identical inputs give bit-identical values.
    """
    mu = np.asarray(mu, dtype=np.float64)
    if mu.ndim != 1 or mu.size < 1:
        raise ValueError("mu must be a non-empty 1-D vector")
    y = image.pixels.astype(np.float64).ravel()
    return _psi_flat(y, y * y, image.height, image.width, mu, params)


class SegmentationObjective:
    """Callable psi(mu) for a fixed image and parameter set.

    Precomputes the flattened intensities (and their squares) once, so
    repeated evaluations inside the optimizer skip per-call conversion.
    Values are bit-identical to :func:`psi` on the same inputs. Stateless
    after construction and safe to call from multiple threads.
    """

    def __init__(self, image: GrayImage, params: EnergyParams):
        self.image = image
        self.params = params
        self._y = image.pixels.astype(np.float64).ravel()
        self._y2 = self._y * self._y

    def __call__(self, mu: np.ndarray) -> float:
        mu = np.asarray(mu, dtype=np.float64)
        return _psi_flat(
            self._y, self._y2, self.image.height, self.image.width, mu, self.params
        )
