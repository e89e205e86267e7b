"""Probability heads and losses for the 5-level damage scale.

Two head realizations over the fused feature+meta vector: a cumulative-link
(proportional-odds) head whose nonnegative hazard weight makes predictions
provably monotone in hazard level, and a plain softmax-linear head.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NonMonotoneCutPoints
from .features import DESIGN_DIM, HAZARD_ENTRY_INDEX

N_LEVELS = 5
PROB_EPSILON = 1e-12
DEFAULT_TAU = 0.35


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, handles +/-inf."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax (max subtracted), invariant to constant shifts."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def _check_cutpoints(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (N_LEVELS - 1,):
        raise NonMonotoneCutPoints(f"expected {N_LEVELS - 1} cut points, got shape {theta.shape}")
    if np.any(np.diff(theta) <= 0):
        raise NonMonotoneCutPoints(f"cut points must strictly increase, got {theta}")
    return theta


def ordinal_probs(score: float, theta: np.ndarray) -> np.ndarray:
    """Level probabilities from a scalar score under the cumulative-link model.

    p_k = sigmoid(theta_k - s) - sigmoid(theta_{k-1} - s) with theta_0 = -inf
    and theta_5 = +inf; higher scores shift mass toward level 5.
    """
    theta = _check_cutpoints(theta)
    padded = np.concatenate([[-np.inf], theta, [np.inf]])
    cdf = sigmoid(padded - score)
    return np.diff(cdf)


def cross_entropy(probs: np.ndarray, y: int) -> float:
    """Negative log probability of the true level, clamped away from zero."""
    probs = np.asarray(probs, dtype=np.float64)
    if not 1 <= y <= N_LEVELS:
        raise ValueError(f"level must be in 1..{N_LEVELS}, got {y}")
    return float(-np.log(max(probs[y - 1], PROB_EPSILON)))


def predicted_level(probs: np.ndarray) -> int:
    """Argmax level, ties resolved toward the lowest level."""
    return int(np.argmax(probs)) + 1


def ordinal_cross_entropy(probs: np.ndarray, y: int) -> float:
    """Cross-entropy scaled by 1 + |predicted - true| / (K-1).

    Reduces to plain cross-entropy when the argmax is already correct and
    doubles the penalty at maximal ordinal distance.
    """
    distance = abs(predicted_level(probs) - y)
    return cross_entropy(probs, y) * (1.0 + distance / (N_LEVELS - 1))


def classify(probs: np.ndarray, tau: float = DEFAULT_TAU) -> Optional[int]:
    """Argmax level when confident enough, else None (unclassified)."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"confidence threshold must be in (0, 1), got {tau}")
    probs = np.asarray(probs, dtype=np.float64)
    if probs.max() < tau:
        return None
    return predicted_level(probs)


def _identity_scaler(dim: int) -> tuple[np.ndarray, np.ndarray]:
    return np.zeros(dim), np.ones(dim)


@dataclass
class OrdinalHead:
    """Cumulative-link head over the fused feature+meta vector.

    Inputs are standardized by (input_mean, input_scale) before the dot
    product; the weight on the overall-hazard entry stays nonnegative so the
    expected damage level can only rise with hazard level.
    """

    weights: np.ndarray
    cutpoints: np.ndarray
    input_mean: np.ndarray = field(default_factory=lambda: _identity_scaler(DESIGN_DIM)[0])
    input_scale: np.ndarray = field(default_factory=lambda: _identity_scaler(DESIGN_DIM)[1])

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.cutpoints = _check_cutpoints(self.cutpoints)
        self.input_mean = np.asarray(self.input_mean, dtype=np.float64)
        self.input_scale = np.asarray(self.input_scale, dtype=np.float64)
        if self.weights.shape != self.input_mean.shape or self.weights.shape != self.input_scale.shape:
            raise ValueError("weights and scaler shapes disagree")
        if np.any(self.input_scale <= 0):
            raise ValueError("input_scale entries must be positive")
        if self.weights[HAZARD_ENTRY_INDEX] < 0:
            raise ValueError("hazard-level weight must be >= 0")

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def score(self, x: np.ndarray) -> float:
        z = (np.asarray(x, dtype=np.float64) - self.input_mean) / self.input_scale
        return float(z @ self.weights)

    def probs(self, x: np.ndarray) -> np.ndarray:
        return ordinal_probs(self.score(x), self.cutpoints)

    def logits(self, x: np.ndarray) -> np.ndarray:
        return np.log(np.maximum(self.probs(x), PROB_EPSILON))

    def to_dict(self) -> dict:
        return {
            "kind": "ordinal",
            "weights": self.weights.tolist(),
            "cutpoints": self.cutpoints.tolist(),
            "input_mean": self.input_mean.tolist(),
            "input_scale": self.input_scale.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OrdinalHead":
        return cls(
            weights=np.array(data["weights"], dtype=np.float64),
            cutpoints=np.array(data["cutpoints"], dtype=np.float64),
            input_mean=np.array(data["input_mean"], dtype=np.float64),
            input_scale=np.array(data["input_scale"], dtype=np.float64),
        )


@dataclass
class SoftmaxHead:
    """Linear-softmax head: logits = W @ standardized(x) + bias."""

    weight_matrix: np.ndarray  # (5, dim)
    bias: np.ndarray  # (5,)
    input_mean: np.ndarray = field(default_factory=lambda: _identity_scaler(DESIGN_DIM)[0])
    input_scale: np.ndarray = field(default_factory=lambda: _identity_scaler(DESIGN_DIM)[1])

    def __post_init__(self) -> None:
        self.weight_matrix = np.asarray(self.weight_matrix, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight_matrix.shape[0] != N_LEVELS or self.bias.shape != (N_LEVELS,):
            raise ValueError("softmax head needs 5 logit rows")

    def logits(self, x: np.ndarray) -> np.ndarray:
        z = (np.asarray(x, dtype=np.float64) - self.input_mean) / self.input_scale
        return self.weight_matrix @ z + self.bias

    def probs(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.logits(x))

    def to_dict(self) -> dict:
        return {
            "kind": "softmax",
            "weight_matrix": self.weight_matrix.tolist(),
            "bias": self.bias.tolist(),
            "input_mean": self.input_mean.tolist(),
            "input_scale": self.input_scale.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SoftmaxHead":
        return cls(
            weight_matrix=np.array(data["weight_matrix"], dtype=np.float64),
            bias=np.array(data["bias"], dtype=np.float64),
            input_mean=np.array(data["input_mean"], dtype=np.float64),
            input_scale=np.array(data["input_scale"], dtype=np.float64),
        )


def _default_direction() -> np.ndarray:
    # untrained fallback: hazard dominates, darker/busier/sprawling chips
    # score slightly weaker
    w = np.zeros(DESIGN_DIM)
    w[HAZARD_ENTRY_INDEX] = 5.0
    w[0:3] = -2.0 * np.array([0.299, 0.587, 0.114])  # mean RGB, luminance-weighted
    w[6] = 0.5   # edge density
    w[8] = 0.15  # compactness
    return w


def default_ordinal_head() -> OrdinalHead:
    """Deterministic untrained head used when no trained parameters are given."""
    return OrdinalHead(weights=_default_direction(), cutpoints=np.array([1.0, 2.0, 3.0, 4.0]))


def neutral_ordinal_head() -> OrdinalHead:
    """Optimizer seed for training: zero weights, cut points spread to match
    the score scale standardized inputs reach under the default schedule."""
    return OrdinalHead(weights=np.zeros(DESIGN_DIM), cutpoints=np.array([-3.0, -1.0, 1.0, 3.0]))


def default_softmax_head() -> SoftmaxHead:
    """Softmax twin of the default head: logits_k = c_k*s - c_k^2/2.

    Equivalent to scoring each level k by closeness of s to its center c_k,
    so the argmax tracks the same score the ordinal head uses.
    """
    centers = np.arange(1, N_LEVELS + 1, dtype=np.float64)
    direction = _default_direction()
    return SoftmaxHead(
        weight_matrix=np.outer(centers, direction),
        bias=-0.5 * centers**2,
    )


def load_head(data: dict) -> OrdinalHead | SoftmaxHead:
    kind = data.get("kind")
    if kind == "ordinal":
        return OrdinalHead.from_dict(data)
    if kind == "softmax":
        return SoftmaxHead.from_dict(data)
    raise ValueError(f"unknown head kind {kind!r}")
