"""Black-box oracle interfaces, reference implementations, and HTTP transport."""

from .base import (
    DECISION_THRESHOLD,
    CallStats,
    CachingClassifier,
    CachingFillMask,
    ClassifierOracle,
    FillMaskOracle,
    MaskCandidates,
    OracleSuite,
    PerplexityOracle,
    hard_label,
    predict_hard,
)
from .builtin import (
    BigramFillMask,
    BigramPerplexity,
    LinearClassifier,
    fit_log_odds_classifier,
    logistic,
)
from .remote import RemoteClassifier, RemoteFillMask, RemotePerplexity

__all__ = [
    "DECISION_THRESHOLD",
    "CallStats",
    "CachingClassifier",
    "CachingFillMask",
    "ClassifierOracle",
    "FillMaskOracle",
    "MaskCandidates",
    "OracleSuite",
    "PerplexityOracle",
    "hard_label",
    "predict_hard",
    "BigramFillMask",
    "BigramPerplexity",
    "LinearClassifier",
    "fit_log_odds_classifier",
    "logistic",
    "RemoteClassifier",
    "RemoteFillMask",
    "RemotePerplexity",
]
