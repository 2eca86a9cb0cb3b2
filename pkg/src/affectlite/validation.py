"""Input validation helpers shared by the estimators and the service."""

from __future__ import annotations

import numpy as np

from .architectures import INPUT_SHAPE, NUM_EMOTIONS
from .tensor import as_array


class ValidationError(ValueError):
    pass


def check_images(x, input_shape=INPUT_SHAPE) -> np.ndarray:
    """Coerce to a float32 batch (N,) + input_shape with values in [0, 1]."""
    arr = np.asarray(as_array(x), dtype=np.float32)
    if arr.shape == tuple(input_shape):
        arr = arr[None, ...]
    if arr.ndim != len(input_shape) + 1 or arr.shape[1:] != tuple(input_shape):
        raise ValidationError(
            f"expected images shaped {tuple(input_shape)} (optionally batched), got {arr.shape}"
        )
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValidationError("pixel values must lie in [0, 1]; run preprocess() first")
    return arr


def check_labels(y, n, num_classes=NUM_EMOTIONS) -> np.ndarray:
    labels = np.asarray(y)
    if labels.shape != (n,):
        raise ValidationError(f"expected {n} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == labels.astype(np.int64)):
            raise ValidationError("labels must be integers")
    labels = labels.astype(np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValidationError(f"labels must lie in 0..{num_classes - 1}")
    return labels


def check_va_targets(y, n) -> np.ndarray:
    targets = np.asarray(y, dtype=np.float32)
    if targets.shape != (n, 2):
        raise ValidationError(f"expected (n, 2) valence/arousal targets, got {targets.shape}")
    if targets.size and (targets.min() < -1.0 or targets.max() > 1.0):
        raise ValidationError("valence/arousal targets must lie in [-1, 1]")
    return targets
