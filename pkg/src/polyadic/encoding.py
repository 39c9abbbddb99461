"""
Feature-to-angle encoding.

Each feature is standardized with the training-set mean and population
standard deviation, then scaled linearly so that a standard score of ``q``
lands on ``(1 - alpha/2) * pi``. Values beyond that are clamped, which keeps
an empty arc of width ``alpha * pi`` on the circle between the two extremes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

DEFAULT_ALPHA = 0.1
DEFAULT_Q = 3.0


@dataclass(frozen=True)
class EncoderStats:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        std = np.asarray(self.std, dtype=float).ravel()
        if mean.shape != std.shape:
            raise ValueError(f"mean and std lengths differ: {mean.size} vs {std.size}")
        if np.any(~(std > 0)):
            raise ValueError("standard deviations must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return self.mean.size

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d) -> "EncoderStats":
        return cls(np.array(d["mean"]), np.array(d["std"]))


@dataclass(frozen=True)
class EncoderConfig:
    alpha: float = DEFAULT_ALPHA
    q: float = DEFAULT_Q

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not (self.q > 0 and np.isfinite(self.q)):
            raise ValueError(f"q must be a positive finite number, got {self.q}")

    @property
    def bound(self) -> float:
        """Largest encoded angle magnitude, (1 - alpha/2) pi."""
        return (1 - self.alpha / 2) * np.pi

    @property
    def scale(self) -> float:
        return self.bound / self.q


def fit(X) -> EncoderStats:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-D array with at least two samples")
    std = X.std(axis=0)
    constant = np.flatnonzero(std == 0)
    if constant.size:
        raise ValueError(f"feature {int(constant[0])} is constant across the training set")
    return EncoderStats(X.mean(axis=0), std)


def quantile_from_epsilon(epsilon: float, d: int) -> float:
    """Standard score ``q`` beyond which about an ``epsilon`` fraction of d-dim Gaussian data falls."""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    return float(ndtri(1 - epsilon ** (1 / d) / 2))


def encode(X, stats: EncoderStats, config: EncoderConfig = EncoderConfig()) -> np.ndarray:
    """Angles for one feature vector or a batch of them (rows)."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != stats.dim:
        raise ValueError(f"expected {stats.dim} features, got {X.shape[-1]}")
    # z / q first, so that z = q lands exactly on the bound
    omega = config.bound * (((X - stats.mean) / stats.std) / config.q)
    return np.clip(omega, -config.bound, config.bound)


class AngleEncoder(TransformerMixin, BaseEstimator):
    """Scikit-learn transformer wrapping :func:`fit` and :func:`encode`.

    With ``passthrough=True`` the raw features are used as angles unchanged.
    """

    def __init__(self, alpha: float = DEFAULT_ALPHA, q: float = DEFAULT_Q, passthrough: bool = False):
        self.alpha = alpha
        self.q = q
        self.passthrough = passthrough

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        self.config_ = EncoderConfig(self.alpha, self.q)
        self.stats_ = None if self.passthrough else fit(X)
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        if self.passthrough:
            return X.astype(float)
        return encode(X, self.stats_, self.config_)
