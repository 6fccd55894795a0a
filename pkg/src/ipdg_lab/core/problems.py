"""Точные решения задачи Пуассона в единичном квадрате."""
from __future__ import annotations

import logging
from typing import Callable

import numpy as np

from ..models.functions import ExactFunction, PartialField, Problem

logger = logging.getLogger(__name__)

DEFAULT_LAYER_EPSILON = 0.01


def _xy(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    points = np.asarray(points, dtype=np.float64)
    return points[..., 0], points[..., 1]


def _tensor(xx: np.ndarray, xy: np.ndarray, yy: np.ndarray) -> np.ndarray:
    return np.stack([np.stack([xx, xy], axis=-1), np.stack([xy, yy], axis=-1)], axis=-2)


Factor = Callable[[np.ndarray, int], np.ndarray]


def _separable(dx: Factor, dy: Factor) -> PartialField:
    """Mixed partials of ``X(x) Y(y)`` from the derivatives of each factor."""

    def partial(p: np.ndarray, a: int, b: int) -> np.ndarray:
        x, y = _xy(p)
        return dx(x, a) * dy(y, b)

    return partial


def _bubble(t: np.ndarray, n: int) -> np.ndarray:
    """n-th derivative of t(1-t)."""
    if n == 0:
        return t * (1.0 - t)
    if n == 1:
        return 1.0 - 2.0 * t
    return np.full_like(t, -2.0 if n == 2 else 0.0)


def sinsin() -> Problem:
    """``u = sin(πx) sin(πy)``, ``f = 2π² u``."""
    pi = np.pi

    def value(p: np.ndarray) -> np.ndarray:
        x, y = _xy(p)
        return np.sin(pi * x) * np.sin(pi * y)

    def gradient(p: np.ndarray) -> np.ndarray:
        x, y = _xy(p)
        return pi * np.stack(
            [np.cos(pi * x) * np.sin(pi * y), np.sin(pi * x) * np.cos(pi * y)], axis=-1
        )

    def laplacian(p: np.ndarray) -> np.ndarray:
        return -2.0 * pi**2 * value(p)

    def hessian(p: np.ndarray) -> np.ndarray:
        x, y = _xy(p)
        diag = -(pi**2) * np.sin(pi * x) * np.sin(pi * y)
        mixed = pi**2 * np.cos(pi * x) * np.cos(pi * y)
        return _tensor(diag, mixed, diag)

    def wave(t: np.ndarray, n: int) -> np.ndarray:
        return pi**n * np.sin(pi * t + n * pi / 2)

    exact = ExactFunction(
        "sinsin",
        value,
        gradient,
        laplacian,
        hessian,
        homogeneous_dirichlet=True,
        partial=_separable(wave, wave),
    )
    return Problem("sinsin", exact)


def polybubble() -> Problem:
    """``u = x(1-x) y(1-y)``, ``f = 2(x(1-x) + y(1-y))``."""

    def value(p: np.ndarray) -> np.ndarray:
        x, y = _xy(p)
        return x * (1.0 - x) * y * (1.0 - y)

    def gradient(p: np.ndarray) -> np.ndarray:
        x, y = _xy(p)
        return np.stack(
            [(1.0 - 2.0 * x) * y * (1.0 - y), x * (1.0 - x) * (1.0 - 2.0 * y)], axis=-1
        )

    def laplacian(p: np.ndarray) -> np.ndarray:
        x, y = _xy(p)
        return -2.0 * (x * (1.0 - x) + y * (1.0 - y))

    def hessian(p: np.ndarray) -> np.ndarray:
        x, y = _xy(p)
        return _tensor(-2.0 * y * (1.0 - y), (1.0 - 2.0 * x) * (1.0 - 2.0 * y), -2.0 * x * (1.0 - x))

    exact = ExactFunction(
        "polybubble",
        value,
        gradient,
        laplacian,
        hessian,
        homogeneous_dirichlet=True,
        partial=_separable(_bubble, _bubble),
    )
    return Problem("polybubble", exact)


def layer(epsilon: float = DEFAULT_LAYER_EPSILON) -> Problem:
    """``u = g(x) q(y)`` with ``g = (1 - e^{-x/ε})(1 - x)`` and ``q = y(1-y)``.

    ``g`` has a boundary layer of width ε at ``x = 0``.
    """
    if not epsilon > 0:
        raise ValueError(f"Layer width epsilon must be positive, got {epsilon}")
    eps = float(epsilon)

    def parts(p: np.ndarray) -> tuple[np.ndarray, ...]:
        x, y = _xy(p)
        decay = np.exp(-x / eps)
        g = (1.0 - decay) * (1.0 - x)
        dg = decay * (1.0 - x) / eps - (1.0 - decay)
        ddg = -decay * ((1.0 - x) / eps**2 + 2.0 / eps)
        q = y * (1.0 - y)
        dq = 1.0 - 2.0 * y
        return g, dg, ddg, q, dq

    def value(p: np.ndarray) -> np.ndarray:
        g, _, _, q, _ = parts(p)
        return g * q

    def gradient(p: np.ndarray) -> np.ndarray:
        g, dg, _, q, dq = parts(p)
        return np.stack([dg * q, g * dq], axis=-1)

    def laplacian(p: np.ndarray) -> np.ndarray:
        g, _, ddg, q, _ = parts(p)
        return ddg * q - 2.0 * g

    def hessian(p: np.ndarray) -> np.ndarray:
        g, dg, ddg, q, dq = parts(p)
        return _tensor(ddg * q, dg * dq, -2.0 * g)

    def decay_factor(t: np.ndarray, n: int) -> np.ndarray:
        # g = 1 - t - e + t e with e = exp(-t/ε)
        if n == 0:
            return (1.0 - np.exp(-t / eps)) * (1.0 - t)
        s = -1.0 / eps
        result = (s**n * (t - 1.0) + n * s ** (n - 1)) * np.exp(-t / eps)
        return result - 1.0 if n == 1 else result

    name = f"layer(eps={eps:g})"
    exact = ExactFunction(
        name,
        value,
        gradient,
        laplacian,
        hessian,
        homogeneous_dirichlet=True,
        partial=_separable(decay_factor, _bubble),
    )
    return Problem(name, exact)


PROBLEMS: dict[str, Callable[..., Problem]] = {
    "sinsin": sinsin,
    "polybubble": polybubble,
    "layer": layer,
}


def get_problem(name: str, epsilon: float = DEFAULT_LAYER_EPSILON) -> Problem:
    if name not in PROBLEMS:
        raise ValueError(f"Unknown problem '{name}'. Choose from: {', '.join(PROBLEMS)}")
    if name == "layer":
        return layer(epsilon)
    return PROBLEMS[name]()
