"""Uniform scalar quantizers: codebooks, intervals, and the element-wise Q(.).

A Q-bit uniform quantizer has 2^Q codewords q_r = (2r - 2^Q - 1) * step / 2,
r = 1..2^Q, symmetric about zero and spaced `step` apart.  The 1-bit quantizer
is the sign function with codewords fixed to {-1, +1} (step is ignored).

Codeword r owns the half-open cell [q_r - step/2, q_r + step/2); the lowest
and highest cells extend to -inf / +inf (saturating quantizer), and for 1-bit
the boundary z = 0 belongs to +1.  Cells therefore partition the real line.

Indices are base-0 throughout (index = r - 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import InputError, ParameterError


class IntervalBounds(NamedTuple):
    lower: float  # may be -inf
    upper: float  # may be +inf


@dataclass(frozen=True)
class QuantizerSpec:
    bits: int
    step: float = 1.0

    def __post_init__(self):
        if not isinstance(self.bits, (int, np.integer)) or not 1 <= self.bits <= 8:
            raise ParameterError(f"bits must be an integer in [1, 8], got {self.bits!r}")
        if self.bits > 1 and not (np.isfinite(self.step) and self.step > 0):
            raise ParameterError(f"step must be finite and > 0, got {self.step!r}")

    @property
    def levels(self) -> int:
        return 2 ** self.bits


def codewords(spec: QuantizerSpec) -> np.ndarray:
    """Codeword values q_1 < q_2 < ... < q_{2^Q}."""
    if spec.bits == 1:
        return np.array([-1.0, 1.0])
    r = np.arange(1, spec.levels + 1)
    return (2 * r - spec.levels - 1) * spec.step / 2.0


def cell_edges(spec: QuantizerSpec) -> np.ndarray:
    """The 2^Q - 1 finite boundaries between adjacent cells, increasing.

    Edge j separates index j from index j+1; quantize/interval_of share this
    array so containment is exact by construction.
    """
    if spec.bits == 1:
        return np.array([0.0])
    r = np.arange(1, spec.levels)
    return (r - spec.levels // 2) * spec.step


def quantize(v, spec: QuantizerSpec):
    """Map value(s) to base-0 codeword indices (half-open cells, saturating)."""
    arr = np.asarray(v, dtype=float)
    if not np.isfinite(arr).all():
        raise InputError("quantize requires finite inputs")
    idx = np.searchsorted(cell_edges(spec), arr, side="right")
    if np.isscalar(v) or arr.ndim == 0:
        return int(idx)
    return idx.astype(np.int64)


def interval_of(index: int, spec: QuantizerSpec) -> IntervalBounds:
    """The half-open cell [lower, upper) owned by a codeword index."""
    if not 0 <= index < spec.levels:
        raise ParameterError(f"index {index} out of range for {spec.bits}-bit spec")
    edges = cell_edges(spec)
    lower = -np.inf if index == 0 else edges[index - 1]
    upper = np.inf if index == spec.levels - 1 else edges[index]
    return IntervalBounds(float(lower), float(upper))


def intervals_of(indices, spec: QuantizerSpec) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized interval_of: (lower, upper) arrays for an index array."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= spec.levels):
        raise ParameterError("codeword index out of range for spec")
    edges = cell_edges(spec)
    padded = np.concatenate(([-np.inf], edges, [np.inf]))
    return padded[idx], padded[idx + 1]


def dequantize(indices, spec: QuantizerSpec) -> np.ndarray:
    """Codeword values for an index array (the L2 baseline's y-hat)."""
    idx = np.asarray(indices, dtype=np.int64)
    return codewords(spec)[idx]
