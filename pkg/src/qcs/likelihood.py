"""Noise-perturbed quantized likelihoods, their logs, and their z-gradients.

A quantized observation with codeword cell [l, u) under Gaussian perturbation
of scale eps has probability p = Phi(u~) - Phi(l~) with standardized bounds
l~ = (l - z)/eps, u~ = (u - z)/eps, and score

    d/dz log p = [phi(l~) - phi(u~)] / [Phi(u~) - Phi(l~)] / eps.

Half-infinite cells reduce to one-sided CDFs; the 1-bit cells give the Mills
ratio form (y/eps) * phi(y z/eps) / Phi(y z/eps).

Numerical routing (the whole point of this module):

* log Phi comes from scipy's log_ndtr, which is accurate far into the lower
  tail, so one-sided quantities never underflow prematurely.
* Two-sided cells whose standardized bounds share a sign are evaluated in log
  space on the nearer tail: log(e^a - e^b) = a + log1p(-e^(b-a)).  The naive
  difference Phi(u~) - Phi(l~) is never formed in a tail.
* Two-sided cells straddling zero use the erf difference, whose two terms have
  opposite signs and cannot cancel.
* Gradients in same-sign tails take the ratio entirely in log space, where
  numerator and denominator underflow together and the quotient stays O(|t|).

All element functions broadcast over numpy arrays; eps may be per-measurement.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf, log_ndtr

from .exceptions import DegenerateScaleError, DimensionError, InputError
from .quantizer import IntervalBounds, intervals_of
from .sensing import MeasurementRecord, SensingOperator, apply, apply_transpose

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)


def _log_pdf(t):
    return -0.5 * t * t - _LOG_SQRT_2PI


def effective_scale(sigma: float, beta: float, d) -> np.ndarray:
    """Per-measurement eps_i = sqrt(sigma^2 + beta^2 * d_i).

    Raises DegenerateScaleError where eps_i would be zero: hard quantization
    has no smooth likelihood, so a zero scale is an error, not a limit.
    """
    if sigma < 0 or beta < 0:
        raise InputError("sigma and beta must be >= 0")
    d = np.asarray(d, dtype=float)
    eps = np.sqrt(sigma * sigma + beta * beta * d)
    if not (eps > 0).all():
        raise DegenerateScaleError(
            "effective scale is 0 for some measurement (sigma = beta*d = 0)")
    return eps


def mills_ratio(t):
    """phi(t)/Phi(t), evaluated as exp(log phi - log Phi); stable on [-40, 40].

    For very negative t the log difference is O(log|t|), so the ratio tracks
    the |t| + 1/|t| - ... asymptote without forming either tiny factor.
    """
    arr = np.asarray(t, dtype=float)
    if np.isnan(arr).any():
        raise InputError("mills_ratio: NaN input")
    out = np.exp(_log_pdf(arr) - log_ndtr(arr))
    return float(out) if np.isscalar(t) or arr.ndim == 0 else out


def _log_tail_diff(a, b):
    # log(e^a - e^b) for a > b, guarded against b - a rounding to exactly 0.
    with np.errstate(divide="ignore", invalid="ignore"):
        return a + np.log1p(-np.exp(b - a))


def _standardized(z, lower, upper, eps):
    z, lower, upper, eps = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (z, lower, upper, eps)))
    lt = np.where(np.isneginf(lower), -np.inf, (lower - z) / eps)
    ut = np.where(np.isposinf(upper), np.inf, (upper - z) / eps)
    return lt, ut, eps


def log_interval_prob(z, lower, upper, eps) -> np.ndarray:
    """log of the cell probability Phi(u~) - Phi(l~); finite for width > 0.

    Non-finite z propagates to NaN without warnings: masked branches create
    and repair non-finite intermediates by design.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        lt, ut, _ = _standardized(z, lower, upper, eps)

        out = np.zeros(lt.shape)
        lo_inf = np.isneginf(lt)
        hi_inf = np.isposinf(ut)

        m = lo_inf & ~hi_inf
        out[m] = log_ndtr(ut[m])
        m = hi_inf & ~lo_inf
        out[m] = log_ndtr(-lt[m])

        finite = ~lo_inf & ~hi_inf
        pos = finite & (lt >= 0)          # both bounds at or above z
        neg = finite & (ut <= 0)          # both bounds at or below z
        mid = finite & ~pos & ~neg        # cell straddles z
        if pos.any():
            out[pos] = _log_tail_diff(log_ndtr(-lt[pos]), log_ndtr(-ut[pos]))
        if neg.any():
            out[neg] = _log_tail_diff(log_ndtr(ut[neg]), log_ndtr(lt[neg]))
        if mid.any():
            p = 0.5 * (erf(ut[mid] / _SQRT2) - erf(lt[mid] / _SQRT2))
            out[mid] = np.log(p)

        # Width narrower than the log-CDF resolution: density * width estimate.
        bad = finite & ~np.isfinite(out) & (ut > lt)
        if bad.any():
            mid_t = 0.5 * (lt[bad] + ut[bad])
            out[bad] = _log_pdf(mid_t) + np.log(ut[bad] - lt[bad])
    return out


def _tail_grad(lt, ut):
    # [phi(lt) - phi(ut)] / [Phi(ut) - Phi(lt)] for 0 <= lt < ut, in log space.
    lp_l, lp_u = _log_pdf(lt), _log_pdf(ut)
    ln_num = _log_tail_diff(lp_l, lp_u)
    ln_den = _log_tail_diff(log_ndtr(-lt), log_ndtr(-ut))
    return np.exp(ln_num - ln_den)


def interval_grad(z, lower, upper, eps) -> np.ndarray:
    """d/dz log p for the cell [lower, upper); finite for all finite z."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        lt, ut, eps = _standardized(z, lower, upper, eps)

        out = np.zeros(lt.shape)
        lo_inf = np.isneginf(lt)
        hi_inf = np.isposinf(ut)

        m = lo_inf & ~hi_inf
        if m.any():
            out[m] = -np.exp(_log_pdf(ut[m]) - log_ndtr(ut[m]))
        m = hi_inf & ~lo_inf
        if m.any():
            out[m] = np.exp(_log_pdf(lt[m]) - log_ndtr(-lt[m]))

        finite = ~lo_inf & ~hi_inf
        pos = finite & (lt >= 0)
        neg = finite & (ut <= 0)
        mid = finite & ~pos & ~neg
        if pos.any():
            out[pos] = _tail_grad(lt[pos], ut[pos])
        if neg.any():
            out[neg] = -_tail_grad(-ut[neg], -lt[neg])
        if mid.any():
            num = np.exp(_log_pdf(lt[mid])) - np.exp(_log_pdf(ut[mid]))
            den = 0.5 * (erf(ut[mid] / _SQRT2) - erf(lt[mid] / _SQRT2))
            out[mid] = num / den

        # Degenerate-width repair, same regime as log_interval_prob's fallback.
        bad = finite & ~np.isfinite(out) & (ut > lt)
        if bad.any():
            out[bad] = 0.5 * (lt[bad] + ut[bad])
        return out / eps


def log_likelihood_element(z: float, interval: IntervalBounds, eps: float) -> float:
    return float(log_interval_prob(z, interval.lower, interval.upper, eps))


def grad_element(z: float, interval: IntervalBounds, eps: float) -> float:
    return float(interval_grad(z, interval.lower, interval.upper, eps))


def grad_measurement(z, record: MeasurementRecord, eps) -> np.ndarray:
    """Element-wise score over a measurement vector and its recorded cells."""
    z = np.asarray(z, dtype=float)
    if z.shape != record.indices.shape:
        raise DimensionError(
            f"z has shape {z.shape}, record has {record.indices.shape}")
    lower, upper = intervals_of(record.indices, record.spec)
    return interval_grad(z, lower, upper, eps)


def likelihood_projection(x, op: SensingOperator, record: MeasurementRecord,
                          lam: float, eps) -> np.ndarray:
    """One data-consistency step: mu = x + lam * M^T grad_z log p(y | Mx)."""
    x = np.asarray(x, dtype=float)
    g = grad_measurement(apply(op, x), record, eps)
    return x + lam * apply_transpose(op, g)


def nll(record: MeasurementRecord, z, eps) -> float:
    """Mean negative log-likelihood of the record at measurement values z."""
    z = np.asarray(z, dtype=float)
    if z.shape != record.indices.shape:
        raise DimensionError(
            f"z has shape {z.shape}, record has {record.indices.shape}")
    lower, upper = intervals_of(record.indices, record.spec)
    return float(-np.mean(log_interval_prob(z, lower, upper, eps)))
