"""HMRF grayscale image segmentation driven by cuckoo-search variants."""

from .cuckoo import CsConfig, Nest, Trace, optimize
from .energy import ClassStats, EnergyParams, SegmentationObjective, classify, class_stats, clique_sum, psi
from .evaluation import DiceReport, align_labels, dice, evaluate
from .images import (
    GrayImage,
    ImageFormatError,
    LabelMap,
    PhantomSpec,
    generate_phantom,
    load_gray_image,
    load_label_map,
    save_gray_image,
    save_label_map,
)

__version__ = "0.1.0"

__all__ = [
    "CsConfig",
    "Nest",
    "Trace",
    "optimize",
    "ClassStats",
    "EnergyParams",
    "SegmentationObjective",
    "classify",
    "class_stats",
    "clique_sum",
    "psi",
    "DiceReport",
    "align_labels",
    "dice",
    "evaluate",
    "GrayImage",
    "ImageFormatError",
    "LabelMap",
    "PhantomSpec",
    "generate_phantom",
    "load_gray_image",
    "load_label_map",
    "save_gray_image",
    "save_label_map",
    "__version__",
]
