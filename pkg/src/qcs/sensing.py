"""Sensing operators and measurement simulation y = Q(Mx + n)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, ParameterError
from .quantizer import QuantizerSpec, quantize

# Matrix and noise realizations use independent seeds so a fixed operator can
# be re-measured under fresh noise.


@dataclass
class SensingOperator:
    entries: np.ndarray  # (rows, cols), dense row-major
    seed: int = 0

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


@dataclass
class MeasurementRecord:
    indices: np.ndarray  # length-rows base-0 codeword indices
    spec: QuantizerSpec
    sigma: float
    noise_seed: int
    operator_seed: int


def gaussian_operator(m: int, n: int, seed: int = 0) -> SensingOperator:
    """i.i.d. N(0, 1/m) matrix; rows have expected unit norm so diag(MM^T) ~ 1."""
    if m < 1 or n < 1:
        raise ParameterError(f"operator dims must be >= 1, got ({m}, {n})")
    rng = np.random.default_rng(seed)
    entries = rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, n))
    return SensingOperator(entries=entries, seed=seed)


def apply(op: SensingOperator, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (op.cols,):
        raise DimensionError(f"expected signal of shape ({op.cols},), got {x.shape}")
    return op.entries @ x


def apply_transpose(op: SensingOperator, g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (op.rows,):
        raise DimensionError(f"expected measurement vector of shape ({op.rows},), got {g.shape}")
    return op.entries.T @ g


def row_gram_diag(op: SensingOperator) -> np.ndarray:
    """d_i = sum_j M_ij^2, the diagonal of M M^T."""
    return np.einsum("ij,ij->i", op.entries, op.entries)


def simulate(x, op: SensingOperator, sigma: float, spec: QuantizerSpec,
             noise_seed: int = 0) -> MeasurementRecord:
    """Quantized noisy measurement of x: indices of Q(Mx + n), n ~ N(0, sigma^2)."""
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    z = apply(op, x)
    if sigma > 0:
        z = z + np.random.default_rng(noise_seed).normal(0.0, sigma, size=op.rows)
    return MeasurementRecord(
        indices=np.asarray(quantize(z, spec)),
        spec=spec,
        sigma=float(sigma),
        noise_seed=noise_seed,
        operator_seed=op.seed,
    )
