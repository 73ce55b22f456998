"""Mini-batch SGD training and finite-difference gradient verification."""

from __future__ import annotations

import hashlib
import warnings

import numpy as np

from .layers import cross_entropy
from .model import DnnConfig, DnnModel


def _canonical_order(matrices: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Order samples by a content digest so training is invariant to the
    order the dataset arrived in."""
    digests = [
        hashlib.blake2b(
            matrices[i].tobytes() + bytes([int(labels[i])]), digest_size=16
        ).digest()
        for i in range(len(labels))
    ]
    return np.array(sorted(range(len(labels)), key=lambda i: (digests[i], i)))


def train(
    model: DnnModel,
    matrices: np.ndarray,
    labels: np.ndarray,
    cfg: DnnConfig | None = None,
) -> list[float]:
    """Train in place on (N, rows, cols) inputs; returns per-epoch mean loss."""
    cfg = cfg or model.config
    matrices = np.asarray(matrices)
    labels = np.asarray(labels, dtype=np.int64)
    if len(matrices) == 0:
        raise ValueError("empty training set")
    if len(np.unique(labels)) < 2:
        warnings.warn("training set contains a single class", stacklevel=2)

    canonical = _canonical_order(matrices, labels)
    rng = np.random.default_rng(cfg.seed)
    params = model.params()
    grads = model.grads()
    curve: list[float] = []
    n = len(labels)
    for _ in range(cfg.epochs):
        order = canonical[rng.permutation(n)]
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            logits = model.forward_batch(matrices[batch], training=True)
            loss, dlogits = cross_entropy(logits, labels[batch])
            model.backward_batch(dlogits)
            for p, g in zip(params, grads):
                p -= cfg.learning_rate * g
            total += loss * len(batch)
        model.assert_finite()
        curve.append(total / n)
    return curve


def dataset_loss(model: DnnModel, matrices: np.ndarray, labels: np.ndarray) -> float:
    logits = model.forward_batch(np.asarray(matrices), training=False)
    loss, _ = cross_entropy(logits, np.asarray(labels, dtype=np.int64))
    return loss


def accuracy(model: DnnModel, matrices: np.ndarray, labels: np.ndarray) -> float:
    probs = model.predict_proba(np.asarray(matrices))
    return float((probs.argmax(axis=1) == np.asarray(labels)).mean())


def grad_check_by_layer(
    model: DnnModel,
    matrices: np.ndarray,
    labels: np.ndarray,
    eps: float = 1e-5,
    per_type: int = 200,
    seed: int = 0,
) -> dict[str, float]:
    """Max relative error between analytic and central-difference gradients,
    per layer type, over >= per_type sampled parameters each.

    Parameters whose perturbation flips a ReLU mask or pooling argmax sit on
    a kink of the loss and are excluded from the comparison.
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ValueError("eps must lie in [1e-6, 1e-4]")
    matrices = np.asarray(matrices)
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)

    def loss_and_switches() -> tuple[float, list[np.ndarray]]:
        logits = model.forward_batch(matrices, training=True)
        loss, _ = cross_entropy(logits, labels)
        return loss, [s.copy() for s in model.switch_states()]

    # analytic gradients at the base point
    logits = model.forward_batch(matrices, training=True)
    _, dlogits = cross_entropy(logits, labels)
    model.backward_batch(dlogits)

    by_type: dict[str, list[tuple[np.ndarray, np.ndarray]]] = {}
    for layer in model.flat_layers():
        for p, g in zip(layer.params(), layer.grads()):
            by_type.setdefault(type(layer).__name__, []).append((p, g.copy()))

    result: dict[str, float] = {}
    for type_name, pairs in by_type.items():
        sizes = np.array([p.size for p, _ in pairs])
        total = int(sizes.sum())
        draws = rng.choice(total, size=per_type, replace=total < per_type)
        bounds = np.cumsum(sizes)
        worst = 0.0
        for flat in np.sort(draws):
            which = int(np.searchsorted(bounds, flat, side="right"))
            idx = int(flat - (bounds[which - 1] if which else 0))
            param, grad = pairs[which]
            orig = param.flat[idx]
            param.flat[idx] = orig + eps
            loss_hi, sw_hi = loss_and_switches()
            param.flat[idx] = orig - eps
            loss_lo, sw_lo = loss_and_switches()
            param.flat[idx] = orig
            if any(not np.array_equal(a, b) for a, b in zip(sw_hi, sw_lo)):
                continue  # perturbation crossed a kink
            numeric = (loss_hi - loss_lo) / (2 * eps)
            analytic = grad.flat[idx]
            # the 1e-6 floor keeps central-difference rounding noise
            # (~ulp(loss)/2eps) from flagging parameters whose true gradient
            # is zero, e.g. conv channels masked out by ReLU or pooling
            denom = max(abs(analytic), abs(numeric), 1e-6)
            worst = max(worst, abs(analytic - numeric) / denom)
        result[type_name] = worst
    return result


def grad_check(
    model: DnnModel,
    matrices: np.ndarray,
    labels: np.ndarray,
    eps: float = 1e-5,
    per_type: int = 200,
    seed: int = 0,
) -> float:
    """Overall max relative gradient error across layer types."""
    report = grad_check_by_layer(model, matrices, labels, eps, per_type, seed)
    return max(report.values())
