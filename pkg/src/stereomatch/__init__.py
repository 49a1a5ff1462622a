"""Dense stereo matching with census and learned siamese-feature costs."""

__version__ = "0.1.0"

from .census import CensusGrid, census_cost_volume, census_transform
from .cnn import (
    FeatureGrid,
    FeatureNetwork,
    PatchTriple,
    cnn_cost_volume,
    forward_features,
    hinge_loss,
    init_network,
    load_weights,
    save_weights,
    train,
)
from .disparity import lr_check, median_fuse, right_cost_volume, subpixel, wta
from .estimator import StereoMatcher
from .evaluation import (
    EvalConfig,
    EvalReport,
    absolute_accuracy,
    completeness,
    error_histogram,
    evaluate,
    systematic_error,
    write_report,
)
from .image_io import CostVolume, DisparityMap, GrayImage, load_pfm, load_pgm, save_pfm, save_pgm
from .sgm import SgmParams, aggregate, normalize_costs
from .synth import SceneSpec, extract_triples, generate

__all__ = [
    "CensusGrid",
    "CostVolume",
    "DisparityMap",
    "EvalConfig",
    "EvalReport",
    "FeatureGrid",
    "FeatureNetwork",
    "GrayImage",
    "PatchTriple",
    "SceneSpec",
    "SgmParams",
    "StereoMatcher",
    "absolute_accuracy",
    "aggregate",
    "census_cost_volume",
    "census_transform",
    "cnn_cost_volume",
    "completeness",
    "error_histogram",
    "evaluate",
    "extract_triples",
    "forward_features",
    "generate",
    "hinge_loss",
    "init_network",
    "load_pfm",
    "load_pgm",
    "load_weights",
    "lr_check",
    "median_fuse",
    "normalize_costs",
    "right_cost_volume",
    "save_pfm",
    "save_pgm",
    "save_weights",
    "subpixel",
    "systematic_error",
    "train",
    "wta",
    "write_report",
]
