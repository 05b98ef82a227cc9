"""Input validation for the estimator front end."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ShapeMismatch
from .layerplan import LayerSpec


def check_weight_set(X) -> list[np.ndarray]:
    """Validate a sequence of weight tensors (2-D linear or 4-D square-kernel conv)."""
    if isinstance(X, np.ndarray) and X.ndim in (2, 4):
        X = [X]
    weights = []
    for k, w in enumerate(X):
        w = check_array(w, allow_nd=True, dtype=np.float64, ensure_min_samples=1, ensure_min_features=1)
        if w.ndim not in (2, 4):
            raise ShapeMismatch(f"weight {k}: expected a 2-D or 4-D array, got {w.ndim}-D")
        if w.ndim == 4 and w.shape[2] != w.shape[3]:
            raise ShapeMismatch(f"weight {k}: non-square kernel {w.shape[2:]} is not supported")
        weights.append(np.ascontiguousarray(w))
    if not weights:
        raise ValueError("expected at least one weight tensor")
    return weights


def specs_from_weights(weights, names=None, gain: float = 2.0) -> list[LayerSpec]:
    names = names or [f"layer{k}" for k in range(len(weights))]
    specs = []
    for name, w in zip(names, weights):
        if w.ndim == 2:
            specs.append(LayerSpec(name, "linear", w.shape[0], w.shape[1], 1, gain))
        else:
            specs.append(LayerSpec(name, "conv", w.shape[0], w.shape[1], w.shape[2], gain))
    return specs


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
