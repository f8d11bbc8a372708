"""scikit-learn style wrappers around the testers and the erasure learner.

Each row of ``X`` is one user's sample, a symbol in ``[0, 2k)``. ``fit``
runs the protocol over those users; channel randomness comes from
``random_state``. Testers predict 1 for "far" and 0 for "uniform".
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array, check_random_state
from sklearn.utils.validation import check_is_fitted

from .protocols import (
    CHANNEL,
    Decision,
    centralized_collision_tester,
    default_eta,
    erasure_histogram_learner,
    erasure_simulation_tester,
    interactive_leaky_tester,
    noninteractive_leaky_tester,
    preset_constants,
    stream,
)


def check_samples(X, k: int) -> np.ndarray:
    """Validate user samples as a 1-D integer array over ``[0, 2k)``."""
    X = check_array(X, ensure_2d=False, dtype=None, ensure_min_samples=0)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected one sample per row, got {X.shape[1]} columns")
        X = X[:, 0]
    if X.size and not np.all(np.equal(np.mod(X, 1), 0)):
        raise ValueError("samples must be integer symbols")
    X = X.astype(np.int64)
    if X.size and (X.min() < 0 or X.max() >= 2 * k):
        raise ValueError(f"samples must lie in [0, {2 * k})")
    return X


def _seed(random_state) -> int:
    return int(check_random_state(random_state).randint(2**31 - 1))


class _TesterMixin:
    def predict(self, X=None):
        """1 when the fitted sample was judged far from uniform, else 0.

        With ``X`` given, the tester is refit on ``X`` first.
        """
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "decision_")
        return np.array([int(self.decision_.is_far)])

    def _store(self, decision: Decision, n: int):
        self.decision_ = decision
        self.verdict_ = decision.verdict
        self.statistics_ = dict(decision.statistics)
        self.n_users_ = n
        return self


class CollisionUniformityTester(_TesterMixin, BaseEstimator):
    """Centralized collision-count test on raw samples."""

    def __init__(self, k=2, eps=0.25):
        self.k = k
        self.eps = eps

    def fit(self, X, y=None):
        x = check_samples(X, self.k)
        return self._store(centralized_collision_tester(x, self.k, self.eps), x.size)


class PartialErasureUniformityTester(_TesterMixin, BaseEstimator):
    """Noninteractive tester through the partial-erasure channel."""

    def __init__(self, k=2, eps=0.25, eta=None, random_state=None):
        self.k = k
        self.eps = eps
        self.eta = eta
        self.random_state = random_state

    def fit(self, X, y=None):
        x = check_samples(X, self.k)
        seed = _seed(self.random_state)
        strategy = erasure_simulation_tester(self.k, self.eps, x.size, seed, self.eta)
        v = stream(seed, CHANNEL).random(x.size)
        return self._store(strategy.run_on_samples(x, v, seed), x.size)


class LeakyQueryUniformityTester(_TesterMixin, BaseEstimator):
    """Leaky-query tester, interactive (three stages) or noninteractive."""

    def __init__(self, k=2, eps=0.25, interactive=True, preset="calibrated", random_state=None):
        self.k = k
        self.eps = eps
        self.interactive = interactive
        self.preset = preset
        self.random_state = random_state

    def fit(self, X, y=None):
        x = check_samples(X, self.k)
        seed = _seed(self.random_state)
        if self.interactive:
            strategy = interactive_leaky_tester(self.k, self.eps, x.size, preset_constants(self.preset), seed)
        else:
            strategy = noninteractive_leaky_tester(self.k, self.eps, x.size, seed)
        v = stream(seed, CHANNEL).random(x.size)
        return self._store(strategy.run_on_samples(x, v, seed), x.size)


class ErasureHistogramLearner(BaseEstimator):
    """Empirical distribution of the samples that survive erasure."""

    def __init__(self, k=2, eta=None, random_state=None):
        self.k = k
        self.eta = eta
        self.random_state = random_state

    def fit(self, X, y=None):
        x = check_samples(X, self.k)
        seed = _seed(self.random_state)
        eta = default_eta(self.k) if self.eta is None else self.eta
        strategy = erasure_histogram_learner(self.k, eta, x.size, seed)
        v = stream(seed, CHANNEL).random(x.size)
        self.distribution_ = strategy.run_on_samples(x, v, seed)
        self.probs_ = np.array(self.distribution_.probs)
        self.n_users_ = x.size
        return self

    def predict(self, X):
        """Estimated mass of each symbol in ``X``."""
        check_is_fitted(self, "probs_")
        return self.probs_[check_samples(X, self.k)]
