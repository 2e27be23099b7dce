"""soaudit: second-order robustness and counterfactual token bias audits for
black-box text classifiers."""

__version__ = "0.1.0"

from .textcore import (  # noqa: E402
    PatchPair,
    Sentence,
    Token,
    apply_patch,
    l0_distance,
    occurrence_count,
    tokenize,
)

__all__ = [
    "__version__",
    "PatchPair",
    "Sentence",
    "Token",
    "apply_patch",
    "l0_distance",
    "occurrence_count",
    "tokenize",
]
