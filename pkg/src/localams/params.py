"""Elementwise arithmetic over flat float64 parameter vectors.

A parameter vector is a 1-D ``numpy.ndarray`` of float64. Model state,
gradients, momenta, and per-coordinate learning rates are all carried in
this one representation; every function here is pure and returns a fresh
array, so vectors can be shared freely across threads.
"""
from __future__ import annotations

from typing import Iterable, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatchError, DomainError

ParamVector = np.ndarray


def as_param(values: Iterable[float]) -> ParamVector:
    """Copy ``values`` into a finite 1-D float64 vector."""
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"expected a flat vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("parameter vector contains NaN or Inf")
    return arr


def zeros(dim: int) -> ParamVector:
    return np.zeros(dim, dtype=np.float64)


def full(dim: int, value: float) -> ParamVector:
    return np.full(dim, value, dtype=np.float64)


def _require_same_length(a: ParamVector, b: ParamVector) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")


def hadamard(a: ParamVector, b: ParamVector) -> ParamVector:
    """Coordinatewise product a[j] * b[j]."""
    _require_same_length(a, b)
    return a * b


def elementwise_max(a: ParamVector, b: ParamVector) -> ParamVector:
    """Coordinatewise max; the result dominates both inputs."""
    _require_same_length(a, b)
    return np.maximum(a, b)


def inv_sqrt(a: ParamVector) -> ParamVector:
    """Coordinatewise 1/sqrt(a[j]); every entry must be strictly positive."""
    if np.any(a <= 0.0):
        raise DomainError("inv_sqrt requires strictly positive entries")
    return 1.0 / np.sqrt(a)


def norms(a: ParamVector) -> Tuple[float, float, float]:
    """Return (l1, squared l2, max-abs) norms of a."""
    if a.size == 0:
        return 0.0, 0.0, 0.0
    abs_a = np.abs(a)
    return float(abs_a.sum()), float(np.dot(a, a)), float(abs_a.max())


def mean_of(vectors: Sequence[ParamVector]) -> ParamVector:
    """Coordinatewise mean, summed strictly left to right.

    The fixed summation order makes repeated calls on the same inputs
    bit-identical, which the reproducibility contract relies on; do not
    replace with pairwise-summing reductions.

    The result is clamped into the coordinatewise [min, max] envelope of
    the inputs. The true mean always lies there, but the rounded
    sum-then-divide can drift one ulp outside — in particular below the
    common value when all inputs agree — and downstream monotonicity
    guarantees (a mean of values ≥ b stays ≥ b) must hold exactly.
    """
    if len(vectors) == 0:
        raise DimensionMismatchError("mean_of needs at least one vector")
    total = np.array(vectors[0], dtype=np.float64, copy=True)
    lo = np.array(vectors[0], dtype=np.float64, copy=True)
    hi = np.array(vectors[0], dtype=np.float64, copy=True)
    for vec in vectors[1:]:
        _require_same_length(total, vec)
        total += vec
        np.minimum(lo, vec, out=lo)
        np.maximum(hi, vec, out=hi)
    total /= len(vectors)
    return np.clip(total, lo, hi)


def clip_inf(g: ParamVector, bound: float) -> ParamVector:
    """Clamp every coordinate into [-bound, bound]."""
    if bound <= 0.0:
        raise DomainError("clip bound must be positive")
    return np.clip(g, -bound, bound)
