"""Input validation helpers and the shared estimator parameter protocol."""

from __future__ import annotations

import inspect
from typing import Any, Sequence

import numpy as np

from ..corpus import ScreeningDecision
from ..errors import DegenerateTrainingError, FitError


class ParamsMixin:
    """get_params/set_params over the constructor signature, so estimators
    here compose with pipeline tooling that clones by parameters."""

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep: bool = True) -> dict[str, Any]:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params: Any):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(f"invalid parameter {name!r} for {type(self).__name__}")
            setattr(self, name, value)
        return self


def check_is_fitted(estimator: Any, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise FitError(f"{type(estimator).__name__} is not fitted (missing {attribute})")


def check_consistent_length(X: Sequence, y: Sequence) -> None:
    if len(X) != len(y):
        raise FitError(f"X and y have inconsistent lengths: {len(X)} vs {len(y)}")


def as_binary_labels(y: Sequence) -> np.ndarray:
    """Map labels to a float {0, 1} vector; Include is the positive class."""
    out = np.empty(len(y), dtype=float)
    for i, label in enumerate(y):
        if isinstance(label, ScreeningDecision):
            out[i] = 1.0 if label is ScreeningDecision.INCLUDE else 0.0
        elif isinstance(label, (bool, int, np.integer)) and int(label) in (0, 1):
            out[i] = float(int(label))
        else:
            raise FitError(f"label {label!r} is not binary")
    return out


def require_both_classes(y01: np.ndarray) -> None:
    if len(y01) < 2 or y01.min() == y01.max():
        raise DegenerateTrainingError(
            "training data must contain both classes and at least two samples")
