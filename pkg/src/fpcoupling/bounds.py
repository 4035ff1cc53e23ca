"""Theoretical convergence estimates used as test predicates."""

from __future__ import annotations


def contraction_bound(c: float, k: int, f0_norm: float) -> float:
    """Picard residual bound ``c**k * ||f_0||`` for a contraction with factor ``c``."""
    if not 0.0 <= c < 1.0:
        raise ValueError(f"contraction factor must lie in [0, 1), got {c}")
    if k < 0:
        raise ValueError("k must be non-negative")
    return c**k * f0_norm


def nonexpansive_bound(dist0: float, k: int, beta: float) -> float:
    """Bound on ``min_{j<=k} ||f_j||`` for relaxed Picard on a non-expansive map.

    ``dist0`` is the distance from the starting point to a fixed point.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if k < 0 or dist0 < 0:
        raise ValueError("k and dist0 must be non-negative")
    return dist0 / ((k + 1) * beta * (1.0 - beta))


def anderson_sufficient_factor(c: float) -> float:
    """Worst-case rate ``(3c - c**2)/(1 - c)`` for two-point Anderson on a contraction.

    The guarantee is only meaningful while the result is below one, i.e. for
    ``c < 2 - sqrt(3)``.
    """
    if not 0.0 <= c < 1.0:
        raise ValueError(f"contraction factor must lie in [0, 1), got {c}")
    return (3.0 * c - c * c) / (1.0 - c)
