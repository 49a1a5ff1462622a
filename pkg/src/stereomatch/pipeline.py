"""Cost volume to disparity map: aggregation, WTA, refinement, LR check."""

from __future__ import annotations

from dataclasses import dataclass

from .census import DEFAULT_RADIUS, census_cost_volume, census_transform
from .cnn import FeatureNetwork, cnn_cost_volume, forward_features
from .disparity import lr_check, right_cost_volume, subpixel, wta
from .image_io import CostVolume, DisparityMap, GrayImage
from .sgm import SgmParams, aggregate


@dataclass(frozen=True)
class MatchConfig:
    d_max: int = 16
    use_sgm: bool = True
    sgm: SgmParams = SgmParams()
    subpixel: bool = False
    lr_tol: float | None = 1.0


def census_volume(left: GrayImage, right: GrayImage, d_max: int, radius: int = DEFAULT_RADIUS):
    return census_cost_volume(census_transform(left, radius), census_transform(right, radius), d_max)


def cnn_volume(left: GrayImage, right: GrayImage, d_max: int, net: FeatureNetwork):
    return cnn_cost_volume(forward_features(net, left), forward_features(net, right), d_max)


def _disparity(cv: CostVolume, cfg: MatchConfig, refine: bool) -> DisparityMap:
    agg = aggregate(cv, cfg.sgm) if cfg.use_sgm else cv
    d = wta(agg)
    if refine and cfg.subpixel:
        d = subpixel(agg, d)
    return d


def disparity_from_volume(cv: CostVolume, cfg: MatchConfig = MatchConfig()) -> DisparityMap:
    """Left-referenced disparity; pixels failing the LR check are invalid."""
    dL = _disparity(cv, cfg, refine=True)
    if cfg.lr_tol is None:
        return dL
    dR = _disparity(right_cost_volume(cv), cfg, refine=False)
    return lr_check(dL, dR, cfg.lr_tol)
