"""Desk-scale trainer for the cumulative-link head.

Adam with step lr decay (default: lr 0.001 multiplied by 0.1 every 7 epochs,
20 epochs total), minibatch shuffling from a seeded generator, and a
projection after every step that keeps the cut points strictly increasing
and the hazard weight nonnegative. Fully deterministic for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateDataset
from .features import HAZARD_ENTRY_INDEX, design_vector, extract_features
from .heads import N_LEVELS, PROB_EPSILON, OrdinalHead, sigmoid
from .rastergeom import Chip

THETA_MIN_GAP = 1e-3


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    lr: float = 0.001
    gamma: float = 0.1
    step_size: int = 7
    batch_size: int = 1
    loss: str = "ce"  # "ce" or "ordinal-ce"
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.loss not in ("ce", "ordinal-ce"):
            raise ValueError(f"loss must be 'ce' or 'ordinal-ce', got {self.loss!r}")


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """Learning rate in force during a 1-based epoch."""
    return cfg.lr * cfg.gamma ** ((epoch - 1) // cfg.step_size)


@dataclass
class TrainingSet:
    """Chips plus their meta vectors and gold damage levels."""

    chips: Sequence[Chip]
    metas: Sequence[np.ndarray]
    levels: Sequence[int]

    def __post_init__(self) -> None:
        if not (len(self.chips) == len(self.metas) == len(self.levels)):
            raise ValueError("chips, metas and levels must align")

    def design_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        X = np.stack([
            design_vector(extract_features(chip), meta)
            for chip, meta in zip(self.chips, self.metas)
        ])
        y = np.asarray(self.levels, dtype=np.int64)
        return X, y


def loss_and_grad(weights: np.ndarray, cutpoints: np.ndarray,
                  X: np.ndarray, y: np.ndarray, loss: str = "ce"
                  ) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean loss over a batch and its exact gradient wrt (weights, cutpoints).

    X is the already-standardized design matrix. For the ordinal loss the
    distance factor uses the current argmax, which is locally constant, so
    the gradient is the cross-entropy gradient scaled per sample.
    """
    n = X.shape[0]
    scores = X @ weights
    padded = np.concatenate([[-np.inf], cutpoints, [np.inf]])

    z_hi = padded[y] - scores
    z_lo = padded[y - 1] - scores
    sig_hi = sigmoid(z_hi)
    sig_lo = sigmoid(z_lo)
    p_true = sig_hi - sig_lo
    clamped = p_true <= PROB_EPSILON

    losses = -np.log(np.maximum(p_true, PROB_EPSILON))

    d_hi = sig_hi * (1.0 - sig_hi)  # sigmoid'(z); exactly 0 at +/-inf
    d_lo = sig_lo * (1.0 - sig_lo)
    inv_p = np.where(clamped, 0.0, 1.0 / np.maximum(p_true, PROB_EPSILON))

    dloss_dscore = (d_hi - d_lo) * inv_p

    if loss == "ordinal-ce":
        cdf = sigmoid(padded[None, :] - scores[:, None])
        all_probs = np.diff(cdf, axis=1)
        preds = np.argmax(all_probs, axis=1) + 1
        factors = 1.0 + np.abs(preds - y) / (N_LEVELS - 1)
        losses = losses * factors
        dloss_dscore = dloss_dscore * factors
    else:
        factors = np.ones(n)

    grad_w = X.T @ dloss_dscore / n

    grad_theta = np.zeros(N_LEVELS - 1, dtype=np.float64)
    upper = -d_hi * inv_p * factors  # d loss / d theta_y for y <= 4
    lower = d_lo * inv_p * factors   # d loss / d theta_{y-1} for y >= 2
    has_upper = y <= N_LEVELS - 1
    has_lower = y >= 2
    np.add.at(grad_theta, y[has_upper] - 1, upper[has_upper])
    np.add.at(grad_theta, y[has_lower] - 2, lower[has_lower])
    grad_theta /= n

    return float(losses.mean()), grad_w, grad_theta


def _project(weights: np.ndarray, cutpoints: np.ndarray) -> None:
    """In-place constraint projection: nonnegative hazard weight, strictly
    increasing cut points."""
    if weights[HAZARD_ENTRY_INDEX] < 0:
        weights[HAZARD_ENTRY_INDEX] = 0.0
    for k in range(1, cutpoints.shape[0]):
        if cutpoints[k] <= cutpoints[k - 1]:
            cutpoints[k] = cutpoints[k - 1] + THETA_MIN_GAP


def fit_scaler(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column mean/std standardizer; constant columns keep scale 1."""
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-8] = 1.0
    return mean, scale


def train(head: OrdinalHead, data: TrainingSet | tuple[np.ndarray, np.ndarray],
          cfg: TrainConfig = TrainConfig()) -> tuple[OrdinalHead, list[float]]:
    """Fit the head on (chips, metas, levels); returns (trained head, per-epoch loss).

    The standardizer is refit from the training data and the incoming head's
    parameters are translated into the refit space, so the optimizer starts
    from the same scoring function the head already computes.
    """
    if isinstance(data, TrainingSet):
        X_raw, y = data.design_matrix()
    else:
        X_raw, y = data
        y = np.asarray(y, dtype=np.int64)
    if np.unique(y).size < 2:
        raise DegenerateDataset("training data needs at least 2 distinct levels")
    if np.any((y < 1) | (y > N_LEVELS)):
        raise ValueError("levels must be in 1..5")

    mean, scale = fit_scaler(X_raw)
    X = (X_raw - mean) / scale
    n = X.shape[0]

    # w_old . (x - m_old)/s_old == w_new . (x - mean)/scale - shift
    weights = head.weights * scale / head.input_scale
    shift = float(head.weights @ ((mean - head.input_mean) / head.input_scale))
    cutpoints = head.cutpoints + shift
    _project(weights, cutpoints)

    dim = weights.shape[0]
    m = np.zeros(dim + N_LEVELS - 1)
    v = np.zeros(dim + N_LEVELS - 1)
    step = 0

    rng = np.random.default_rng(cfg.seed)
    history: list[float] = []
    for epoch in range(1, cfg.epochs + 1):
        lr = lr_at_epoch(cfg, epoch)
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grad_w, grad_theta = loss_and_grad(weights, cutpoints, X[batch], y[batch], cfg.loss)
            epoch_loss += loss * batch.size

            grad = np.concatenate([grad_w, grad_theta])
            step += 1
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad
            m_hat = m / (1.0 - cfg.beta1 ** step)
            v_hat = v / (1.0 - cfg.beta2 ** step)
            delta = lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
            weights -= delta[:dim]
            cutpoints -= delta[dim:]
            _project(weights, cutpoints)
        history.append(epoch_loss / n)

    trained = OrdinalHead(weights=weights, cutpoints=cutpoints, input_mean=mean, input_scale=scale)
    return trained, history


def accuracy(head: OrdinalHead, X_raw: np.ndarray, y: np.ndarray) -> float:
    """Fraction of argmax predictions matching gold levels."""
    z = (X_raw - head.input_mean) / head.input_scale
    scores = z @ head.weights
    padded = np.concatenate([[-np.inf], head.cutpoints, [np.inf]])
    probs = np.diff(sigmoid(padded[None, :] - scores[:, None]), axis=1)
    preds = np.argmax(probs, axis=1) + 1
    return float(np.mean(preds == np.asarray(y)))


def assemble_training_set(catalog, thresholds=None, chip_size: int | None = None) -> TrainingSet:
    """Chips, meta vectors and gold levels for every classified building in
    an event catalog.

    Per-event hazard intensities come from an optional `hazard.json` next to
    the event's images (same attribute schema as hazard scoring); events
    without one train at a neutral overall level 3.
    """
    from .dataset import DamageClass, class_to_level
    from .features import meta_vector
    from .hazard import HazardAttributes, attribute_levels, load_thresholds, overall_level
    from .rastergeom import DEFAULT_CHIP_SIZE, extract_chip, rasterize
    from .sceneio import load_scene

    thresholds = thresholds or load_thresholds()
    chip_size = chip_size or DEFAULT_CHIP_SIZE

    chips, metas, levels = [], [], []
    for event in catalog.events():
        overall, attr_levels = 3, None
        hazard_path = next(iter(event.scenes.values())).image_path.parent.parent / "hazard.json"
        if hazard_path.exists():
            attrs = HazardAttributes.from_mapping(json.loads(hazard_path.read_text()))
            overall = overall_level(attrs, thresholds)
            attr_levels = attribute_levels(attrs, thresholds)
        meta = meta_vector(event.disaster_type, overall, attr_levels)

        for entry in event.scenes.values():
            scene = load_scene(entry.image_path, scene_id=entry.scene_id)
            for building in entry.buildings:
                if building.damage == DamageClass.UNCLASSIFIED:
                    continue
                mask = rasterize(building.footprint, scene.width, scene.height)
                if not mask.any():
                    continue
                chips.append(extract_chip(scene, mask, chip_size,
                                          building_id=building.building_id))
                metas.append(meta)
                levels.append(class_to_level(building.damage))
    return TrainingSet(chips=chips, metas=metas, levels=levels)
