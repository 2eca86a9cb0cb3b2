"""Estimator-style front door: fit/predict objects over the CNN engine.

Both estimators follow the scikit-learn calling convention (``fit`` returns
self, ``get_params``/``set_params`` mirror the constructor signature) so
they drop into pipelines and grid searches without inheriting from any
external base class.
"""

from __future__ import annotations

import inspect

import numpy as np

from . import architectures, modelio, training
from .validation import ValidationError, check_images, check_labels, check_va_targets


class _Estimator:
    """get_params/set_params driven by the constructor signature."""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValidationError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"

    def _require_fitted(self):
        if getattr(self, "model_", None) is None:
            raise ValidationError(f"{type(self).__name__} is not fitted; call fit() or load()")


def _train_config(self, loss, weights=None):
    return training.TrainConfig(
        epochs=self.epochs,
        batch_size=self.batch_size,
        loss=loss,
        class_weights=weights,
        augment=training.AugmentConfig() if self.augment else None,
        seed=self.seed,
        learning_rate=self.learning_rate,
    )


class EmotionClassifier(_Estimator):
    """Eight-way emotion classifier over 128x128 RGB face crops."""

    def __init__(
        self,
        arch=architectures.ARCH_VGGNET,
        epochs=architectures.REFERENCE_EPOCHS["train"],
        batch_size=None,
        learning_rate=0.001,
        class_weighting=True,
        augment=True,
        seed=0,
    ):
        self.arch = arch
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.class_weighting = class_weighting
        self.augment = augment
        self.seed = seed
        self.model_ = None
        self.log_ = None

    def fit(self, x, y):
        x = check_images(x)
        y = check_labels(y, len(x))
        weights = None
        if self.class_weighting:
            counts = np.bincount(y, minlength=architectures.NUM_EMOTIONS)
            if np.any(counts == 0):
                raise ValidationError(
                    "class weighting needs every class present; "
                    f"counts were {counts.tolist()} (or pass class_weighting=False)"
                )
            weights = training.class_weights(counts)
        self.model_ = architectures.build(self.arch, architectures.HEAD_EMOTION, seed=self.seed)
        self.log_ = training.train(
            self.model_, (x, y), _train_config(self, training.LOSS_WCE, weights), val=(x, y)
        )
        return self

    def predict_proba(self, x):
        self._require_fitted()
        x = check_images(x)
        return training._predict_batched(self.model_, x, self.batch_size or 32)

    def predict(self, x):
        return self.predict_proba(x).argmax(axis=1)

    def score(self, x, y):
        y = check_labels(y, len(check_images(x)))
        return float(np.mean(self.predict(x) == y))

    def save(self, path):
        self._require_fitted()
        return modelio.save(self.model_, path)

    @classmethod
    def load(cls, path):
        model = modelio.load(path)
        if model.head != architectures.HEAD_EMOTION:
            raise ValidationError(f"{path} holds a {model.head!r} head, not an emotion classifier")
        est = cls(arch=model.arch_id)
        est.model_ = model
        return est


class ValenceArousalRegressor(_Estimator):
    """Valence/arousal regressor; optionally fine-tuned from a classifier."""

    def __init__(
        self,
        arch=architectures.ARCH_VGGNET,
        epochs=architectures.REFERENCE_EPOCHS["finetune"],
        batch_size=None,
        learning_rate=0.001,
        augment=True,
        seed=0,
    ):
        self.arch = arch
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.augment = augment
        self.seed = seed
        self.model_ = None
        self.log_ = None

    @classmethod
    def from_classifier(cls, classifier: EmotionClassifier, **kwargs):
        """Start from a fitted classifier's backbone (transfer learning)."""
        classifier._require_fitted()
        est = cls(arch=classifier.model_.arch_id, **kwargs)
        est.model_ = architectures.swap_head(
            classifier.model_, architectures.HEAD_VA, seed=est.seed
        )
        return est

    def fit(self, x, y):
        x = check_images(x)
        y = check_va_targets(y, len(x))
        if self.model_ is None:
            self.model_ = architectures.build(self.arch, architectures.HEAD_VA, seed=self.seed)
        self.log_ = training.train(
            self.model_, (x, y), _train_config(self, training.LOSS_MSE), val=(x, y)
        )
        return self

    def predict(self, x):
        self._require_fitted()
        x = check_images(x)
        return training._predict_batched(self.model_, x, self.batch_size or 32)

    def save(self, path):
        self._require_fitted()
        return modelio.save(self.model_, path)

    @classmethod
    def load(cls, path):
        model = modelio.load(path)
        if model.head != architectures.HEAD_VA:
            raise ValidationError(f"{path} holds a {model.head!r} head, not a valence/arousal model")
        est = cls(arch=model.arch_id)
        est.model_ = model
        return est
