"""scikit-learn style front end.

``X`` is a sequence of ``(left, right)`` pairs (GrayImage or 2-D arrays in
[0, 1]); ``y`` is a matching sequence of ground-truth DisparityMaps.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .census import DEFAULT_RADIUS
from .cnn import DEFAULT_CHANNELS, FeatureNetwork, init_network, train
from .exceptions import NotFittedError
from .pipeline import MatchConfig, census_volume, cnn_volume, disparity_from_volume
from .sgm import SgmParams
from .synth import extract_triples
from .validation import check_disparity, check_pairs

__all__ = ["StereoMatcher"]


class StereoMatcher(BaseEstimator):
    """Dense stereo matcher with a census or learned-feature matching cost.

    Parameters
    ----------
    cost : {"census", "cnn"}
    d_max : int
        Largest disparity searched.
    radius : int
        Census window radius (census only).
    use_sgm, p1, p2, num_paths : aggregation settings; penalties apply to
        costs normalised to [0, 1].
    subpixel : bool
        Parabolic refinement of the left disparity.
    lr_tol : float or None
        Left-right consistency tolerance; ``None`` skips the check.
    network : FeatureNetwork, optional
        Pretrained weights. ``fit`` starts from these when given.
    channels, margin, learning_rate, epochs, batch_size, n_triples, augment :
        Training settings for ``cost="cnn"``.
    random_state : int
        Seeds weight init, triple sampling and batch order.
    """

    def __init__(
        self,
        cost="census",
        d_max=16,
        radius=DEFAULT_RADIUS,
        use_sgm=True,
        p1=0.03,
        p2=0.3,
        num_paths=8,
        subpixel=False,
        lr_tol=1.0,
        network=None,
        channels=DEFAULT_CHANNELS,
        margin=0.2,
        learning_rate=0.002,
        epochs=20,
        batch_size=128,
        n_triples=5000,
        augment=True,
        random_state=0,
    ):
        self.cost = cost
        self.d_max = d_max
        self.radius = radius
        self.use_sgm = use_sgm
        self.p1 = p1
        self.p2 = p2
        self.num_paths = num_paths
        self.subpixel = subpixel
        self.lr_tol = lr_tol
        self.network = network
        self.channels = channels
        self.margin = margin
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.n_triples = n_triples
        self.augment = augment
        self.random_state = random_state

    def _check_params(self):
        if self.cost not in ("census", "cnn"):
            raise ValueError(f"cost must be 'census' or 'cnn', got {self.cost!r}")
        if int(self.d_max) < 0:
            raise ValueError("d_max must be non-negative")

    def _match_config(self) -> MatchConfig:
        return MatchConfig(
            d_max=int(self.d_max),
            use_sgm=self.use_sgm,
            sgm=SgmParams(self.p1, self.p2, self.num_paths, True),
            subpixel=self.subpixel,
            lr_tol=self.lr_tol,
        )

    def _min_size(self) -> int:
        if self.cost == "census":
            return 2 * self.radius + 1
        net = getattr(self, "network_", None) or self.network
        return net.receptive_field if net is not None else 9

    def fit(self, X, y=None):
        """Learn the feature network (``cost="cnn"``); census only validates input."""
        self._check_params()
        pairs = check_pairs(X, self._min_size())
        if self.cost == "census":
            self.network_ = None
            self.loss_curve_ = []
            self.initial_loss_ = None
            return self
        if y is None:
            raise ValueError("cost='cnn' needs ground-truth disparities y to fit")
        truths = [check_disparity(t, "y") for t in y]
        if len(truths) != len(pairs):
            raise ValueError(f"{len(pairs)} pairs but {len(truths)} truth maps")

        rng = np.random.default_rng(self.random_state)
        seeds = rng.integers(0, 2**31, size=len(pairs) + 2)
        per_pair = -(-int(self.n_triples) // len(pairs))
        triples = []
        for (left, right), truth, s in zip(pairs, truths, seeds):
            triples += extract_triples(left, right, truth, per_pair, int(s), augment=self.augment)
        triples = triples[: int(self.n_triples)]

        net = self.network
        if net is None:
            net = init_network(self.channels, seed=int(seeds[-2]))
        result = train(
            net,
            triples,
            margin=self.margin,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            rng_seed=int(seeds[-1]),
            batch_size=self.batch_size,
        )
        self.network_ = result.network
        self.loss_curve_ = list(result.epoch_losses)
        self.initial_loss_ = result.initial_loss
        return self

    def _network(self) -> FeatureNetwork:
        net = getattr(self, "network_", None) or self.network
        if net is None:
            raise NotFittedError("cost='cnn' needs fit() or a network= argument before predicting")
        return net

    def cost_volume(self, left, right):
        """Raw (unaggregated) matching cost volume for one pair."""
        self._check_params()
        ((left, right),) = check_pairs([(left, right)], self._min_size())
        if self.cost == "census":
            return census_volume(left, right, int(self.d_max), self.radius)
        return cnn_volume(left, right, int(self.d_max), self._network())

    def match(self, left, right):
        """Disparity map for a single pair."""
        return disparity_from_volume(self.cost_volume(left, right), self._match_config())

    def predict(self, X):
        """Disparity maps for every pair in ``X``."""
        return [self.match(left, right) for left, right in check_pairs(X, self._min_size())]

    def score(self, X, y):
        """Fraction of truth-valid pixels estimated within one disparity (invalid counts as wrong)."""
        hits = total = 0
        for d, t in zip(self.predict(X), y):
            t = check_disparity(t, "y")
            ok = d.valid & t.valid & (np.abs(d.data - t.data) <= 1.0)
            hits += int(ok.sum())
            total += t.n_valid
        return hits / total if total else 0.0
