"""Scalar observables J(x) with analytic gradients."""

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Observable:
    """
    A smooth observable. ``evaluate`` maps (..., n) -> (...); ``gradient``
    maps (..., n) -> (..., n). ``min_dim`` is the smallest state dimension the
    formula makes sense for.
    """

    name: str
    evaluate: Callable
    gradient: Callable
    min_dim: int = 1
    description: str = ""

    def __call__(self, x):
        return self.evaluate(x)


def _cos4x2(x):
    return np.cos(4.0 * x[..., 1])


def _cos4x2_grad(x):
    grad = np.zeros_like(x, dtype=float)
    grad[..., 1] = -4.0 * np.sin(4.0 * x[..., 1])
    return grad


def _sin_cos_x3(x):
    x2, x3 = x[..., 1], x[..., 2]
    return np.sin(x2) * np.cos(4.0 * x2) * x3


def _sin_cos_x3_grad(x):
    x2, x3 = x[..., 1], x[..., 2]
    grad = np.zeros_like(x, dtype=float)
    grad[..., 1] = (np.cos(x2) * np.cos(4.0 * x2) - 4.0 * np.sin(x2) * np.sin(4.0 * x2)) * x3
    grad[..., 2] = np.sin(x2) * np.cos(4.0 * x2)
    return grad


def _constant(x):
    return np.ones(np.shape(x)[:-1])


def _constant_grad(x):
    return np.zeros_like(x, dtype=float)


COS4X2 = Observable("cos4x2", _cos4x2, _cos4x2_grad, 2, "J = cos(4 x2)")
SIN_COS_X3 = Observable("sin_cos_x3", _sin_cos_x3, _sin_cos_x3_grad, 3, "J = sin(x2) cos(4 x2) x3")
CONSTANT = Observable("constant", _constant, _constant_grad, 1, "J = 1")
