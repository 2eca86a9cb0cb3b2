"""Compact CNN facial-affect analysis with affect-driven music recommendation.

The public surface follows the familiar estimator idiom: build an
:class:`EmotionClassifier` or :class:`ValenceArousalRegressor`, ``fit`` it
on 128x128 RGB face crops, ``predict`` on new images, then ``save`` the
weights to a compact binary file the CLI and HTTP service can load.
"""

from .architectures import (
    ARCH_ALEXNET,
    ARCH_IDS,
    ARCH_MOBILENET,
    ARCH_VGGNET,
    HEAD_EMOTION,
    HEAD_VA,
    INPUT_SHAPE,
    build,
    param_report,
    swap_head,
)
from .data import EMOTIONS, load_manifest, preprocess
from .estimators import EmotionClassifier, ValenceArousalRegressor
from .recommender import AffectPrediction, RecommendationQuery, build_query, fetch
from .tensor import Rng, Tensor

__version__ = "0.1.0"

__all__ = [
    "ARCH_ALEXNET",
    "ARCH_VGGNET",
    "ARCH_MOBILENET",
    "ARCH_IDS",
    "HEAD_EMOTION",
    "HEAD_VA",
    "INPUT_SHAPE",
    "EMOTIONS",
    "EmotionClassifier",
    "ValenceArousalRegressor",
    "AffectPrediction",
    "RecommendationQuery",
    "Rng",
    "Tensor",
    "build",
    "build_query",
    "fetch",
    "load_manifest",
    "param_report",
    "preprocess",
    "swap_head",
]
