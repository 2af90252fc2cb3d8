"""K-stage deterministic reconstruction: likelihood projection + refinement.

Each stage evaluates the likelihood gradient at the stage's effective scale
eps_k = sqrt(sigma^2 + beta_k^2 d), takes mu = x + lambda_k M^T g, then applies
a refinement operator.  `vanilla_reconstruct` swaps the likelihood step for
the linear-case L2 step mu = x + lambda_k M^T (yhat - Mx) with dequantized
yhat, which is the classical proximal-gradient data term.

Monotone mode backtracks lambda_k (halving, up to 20 times) until the stage
does not increase the NLL measured at that stage's eps_k, keeping the previous
iterate when backtracking is exhausted.  With a constant beta schedule (eps
fixed across stages) the recorded NLL trace is therefore exactly
non-increasing.

Schedules are fit, not trained: `calibrate` runs Nelder-Mead in log-space over
the 2K vector (log lambda_k, log beta_k), tracking the best candidate seen and
never exceeding its evaluation budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dctn, idctn
from scipy.optimize import minimize

from .dmb import DMBParams, dmb_forward
from .exceptions import DataError, DimensionError, ParameterError, QcsError
from .likelihood import (effective_scale, grad_measurement,
                         likelihood_projection, nll)
from .quantizer import dequantize
from .sensing import (MeasurementRecord, SensingOperator, apply,
                      apply_transpose, row_gram_diag)

COMPOSITE_NLL_WEIGHT = 0.05   # alpha in  |x - x_gt|_2 + alpha * NLL
MAX_HALVINGS = 20

DEFAULT_LAMBDA = 0.5
DEFAULT_BETA = 0.1


@dataclass
class StageSchedule:
    lambdas: np.ndarray   # per-stage step sizes
    betas: np.ndarray     # per-stage smoothing levels, >= 0
    sigma: float = 0.0    # measurement noise level assumed by the model

    def __post_init__(self):
        self.lambdas = np.atleast_1d(np.asarray(self.lambdas, dtype=float))
        self.betas = np.atleast_1d(np.asarray(self.betas, dtype=float))
        if self.lambdas.shape != self.betas.shape or self.lambdas.ndim != 1:
            raise ParameterError("lambdas and betas must be 1D of equal length")
        if self.stages < 1:
            raise ParameterError("schedule needs at least one stage")
        if not np.isfinite(self.lambdas).all() or (self.betas < 0).any():
            raise ParameterError("lambdas must be finite and betas >= 0")

    @property
    def stages(self) -> int:
        return len(self.lambdas)


def default_schedule(stages: int, sigma: float = 0.0) -> StageSchedule:
    """lambda_k = 0.5, beta_k = 0.1 (K - k + 1)/K: decaying coarse-to-fine."""
    k = np.arange(1, stages + 1)
    return StageSchedule(
        lambdas=np.full(stages, DEFAULT_LAMBDA),
        betas=DEFAULT_BETA * (stages - k + 1) / stages,
        sigma=sigma,
    )


# ---------------------------------------------------------------------------
# Refinement operators (classical stand-ins for a trained denoiser)

class IdentityRefinement:
    kind = "identity"

    def refine(self, x: np.ndarray, image_shape=None) -> np.ndarray:
        return x


@dataclass
class DctSoftThreshold:
    """Soft-shrink orthonormal DCT-II coefficients by tau (sparsity prior)."""
    tau: float
    kind: str = field(default="dct", init=False)

    def __post_init__(self):
        if self.tau < 0:
            raise ParameterError(f"tau must be >= 0, got {self.tau}")

    def refine(self, x: np.ndarray, image_shape=None) -> np.ndarray:
        shaped = x.reshape(image_shape) if image_shape is not None else x
        coef = dctn(shaped, type=2, norm="ortho")
        coef = np.sign(coef) * np.maximum(np.abs(coef) - self.tau, 0.0)
        return idctn(coef, type=2, norm="ortho").reshape(x.shape)


@dataclass
class TvDenoise:
    """Fixed-iteration Chambolle dual projection for weight * TV(x)."""
    weight: float
    iters: int = 10
    kind: str = field(default="tv", init=False)

    def refine(self, x: np.ndarray, image_shape=None) -> np.ndarray:
        shaped = x.reshape(image_shape) if image_shape is not None else x[None, :]
        if shaped.ndim == 3:   # per-channel
            out = np.stack([self._denoise2d(shaped[..., c])
                            for c in range(shaped.shape[-1])], axis=-1)
        else:
            out = self._denoise2d(shaped)
        return out.reshape(x.shape)

    def _denoise2d(self, f: np.ndarray) -> np.ndarray:
        if self.weight <= 0:
            return f
        p = np.zeros((2,) + f.shape)
        tau = 0.25
        for _ in range(self.iters):
            div = np.zeros_like(f)
            div += p[0] - np.roll(p[0], 1, axis=0)
            div += p[1] - np.roll(p[1], 1, axis=1)
            u = div - f / self.weight
            gy = np.roll(u, -1, axis=0) - u
            gx = np.roll(u, -1, axis=1) - u
            norm = np.sqrt(gy ** 2 + gx ** 2)
            p[0] = (p[0] + tau * gy) / (1.0 + tau * norm)
            p[1] = (p[1] + tau * gx) / (1.0 + tau * norm)
        div = np.zeros_like(f)
        div += p[0] - np.roll(p[0], 1, axis=0)
        div += p[1] - np.roll(p[1], 1, axis=1)
        return f - self.weight * div


@dataclass
class DmbRefinement:
    """Run the dual-domain block on the (lifted) image as the refinement step.

    The scalar image is replicated across the block's channels on the way in
    and averaged back to one channel on the way out.
    """
    params: DMBParams
    kind: str = field(default="dmb", init=False)

    def refine(self, x: np.ndarray, image_shape=None) -> np.ndarray:
        shape = image_shape if image_shape is not None else (1, x.size)
        if len(shape) != 2:
            raise DimensionError("dmb refinement expects a 2D image shape")
        channels = self.params.norm_scale.shape[0]
        lifted = np.broadcast_to(x.reshape(1, 1, *shape),
                                 (1, channels, *shape)).copy()
        out = dmb_forward(lifted, self.params)
        return out.mean(axis=1).reshape(x.shape)


# ---------------------------------------------------------------------------
# Reconstruction

@dataclass
class ReconstructionResult:
    estimate: np.ndarray
    nll_trace: np.ndarray        # per-stage NLL at that stage's eps_k
    residual_trace: np.ndarray   # per-stage |x_k - x_{k-1}|_2


def _initial_estimate(record: MeasurementRecord, op: SensingOperator,
                      x0_mode: str) -> np.ndarray:
    if x0_mode == "zeros":
        return np.zeros(op.cols)
    if x0_mode == "backprojection":
        yhat = dequantize(record.indices, record.spec)
        return apply_transpose(op, yhat) / np.max(row_gram_diag(op))
    raise ParameterError(f"unknown x0_mode {x0_mode!r}")


def _stage_error(err: QcsError, stage: int) -> QcsError:
    err.args = (f"stage {stage}: {err.args[0] if err.args else err}",)
    return err


def reconstruct(record: MeasurementRecord, op: SensingOperator,
                schedule: StageSchedule, refinement=None,
                x0_mode: str = "zeros", monotone: bool = False,
                image_shape=None) -> ReconstructionResult:
    """Likelihood-gradient-projection reconstruction over schedule.stages.

    An overly aggressive schedule can diverge (the score's curvature grows
    like 1/eps^2); a non-finite iterate ends the run with inf in the
    remaining trace entries.  Monotone mode cannot diverge.
    """
    refinement = refinement or IdentityRefinement()
    d = row_gram_diag(op)
    x = _initial_estimate(record, op, x0_mode)
    stages = schedule.stages
    nll_trace = np.zeros(stages)
    residual_trace = np.zeros(stages)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(stages):
            try:
                eps = effective_scale(schedule.sigma, schedule.betas[k], d)
            except QcsError as err:
                raise _stage_error(err, k + 1)
            lam = schedule.lambdas[k]
            if monotone:
                # The score is evaluated at x, so halving lam only rescales
                # the fixed ascent direction.
                direction = apply_transpose(
                    op, grad_measurement(apply(op, x), record, eps))
                baseline = nll(record, apply(op, x), eps)
                x_new = x
                for _ in range(MAX_HALVINGS + 1):
                    cand = refinement.refine(x + lam * direction, image_shape)
                    if nll(record, apply(op, cand), eps) <= baseline:
                        x_new = cand
                        break
                    lam *= 0.5
            else:
                mu = likelihood_projection(x, op, record, lam, eps)
                x_new = refinement.refine(mu, image_shape)
            if not np.isfinite(x_new).all():
                nll_trace[k:] = np.inf
                residual_trace[k:] = np.inf
                return ReconstructionResult(x_new, nll_trace, residual_trace)
            residual_trace[k] = np.linalg.norm(x_new - x)
            x = x_new
            nll_trace[k] = nll(record, apply(op, x), eps)
    return ReconstructionResult(x, nll_trace, residual_trace)


def vanilla_reconstruct(record: MeasurementRecord, op: SensingOperator,
                        schedule: StageSchedule, refinement=None,
                        x0_mode: str = "zeros",
                        image_shape=None) -> ReconstructionResult:
    """L2 baseline: mu = x + lambda_k M^T (yhat - Mx) with dequantized yhat.

    The NLL trace is still evaluated at each stage's eps_k so runs are
    directly comparable with `reconstruct` at matched budgets.
    """
    refinement = refinement or IdentityRefinement()
    d = row_gram_diag(op)
    yhat = dequantize(record.indices, record.spec)
    x = _initial_estimate(record, op, x0_mode)
    stages = schedule.stages
    nll_trace = np.zeros(stages)
    residual_trace = np.zeros(stages)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(stages):
            try:
                eps = effective_scale(schedule.sigma, schedule.betas[k], d)
            except QcsError as err:
                raise _stage_error(err, k + 1)
            mu = x + schedule.lambdas[k] * apply_transpose(
                op, yhat - apply(op, x))
            x_new = refinement.refine(mu, image_shape)
            if not np.isfinite(x_new).all():
                nll_trace[k:] = np.inf
                residual_trace[k:] = np.inf
                return ReconstructionResult(x_new, nll_trace, residual_trace)
            residual_trace[k] = np.linalg.norm(x_new - x)
            x = x_new
            nll_trace[k] = nll(record, apply(op, x), eps)
    return ReconstructionResult(x, nll_trace, residual_trace)


def composite_loss(estimate, ground_truth, record: MeasurementRecord,
                   op: SensingOperator, eps_final) -> float:
    """|x - x_gt|_2 + 0.05 * NLL(record, M x, eps_final)."""
    estimate = np.asarray(estimate, dtype=float)
    ground_truth = np.asarray(ground_truth, dtype=float)
    if estimate.shape != ground_truth.shape:
        raise DimensionError("estimate and ground truth shapes differ")
    err = float(np.linalg.norm(estimate - ground_truth))
    return err + COMPOSITE_NLL_WEIGHT * nll(record, apply(op, estimate), eps_final)


# ---------------------------------------------------------------------------
# Schedule calibration

@dataclass
class CalibrationResult:
    schedule: StageSchedule
    initial_loss: float
    best_loss: float
    evaluations: int


class _BudgetExhausted(Exception):
    pass


def calibrate(pairs, op: SensingOperator, stages: int, refinement=None,
              budget: int = 200, sigma: float = 0.0, x0_mode: str = "zeros",
              image_shape=None, monotone: bool = False,
              init: StageSchedule | None = None) -> CalibrationResult:
    """Fit (log lambda_k, log beta_k) by Nelder-Mead on the mean composite loss.

    `pairs` is a sequence of (ground_truth, record).  Deterministic: no
    randomness enters; the best evaluated candidate (including the starting
    schedule) is returned, and the loss is called at most `budget` times.
    Candidates whose reconstruction diverges score +inf.
    """
    if not pairs:
        raise DataError("calibrate requires at least one training pair")
    if budget < 1:
        raise ParameterError("budget must be >= 1")
    refinement = refinement or IdentityRefinement()
    start = init if init is not None else default_schedule(stages, sigma)
    d = row_gram_diag(op)
    theta0 = np.concatenate([np.log(start.lambdas), np.log(start.betas)])

    state = {"count": 0, "best_loss": np.inf, "best_theta": theta0,
             "initial_loss": None}

    def schedule_of(theta):
        return StageSchedule(lambdas=np.exp(theta[:stages]),
                             betas=np.exp(theta[stages:]), sigma=sigma)

    def loss_of(theta):
        if state["count"] >= budget:
            raise _BudgetExhausted
        state["count"] += 1
        sched = schedule_of(theta)
        eps_final = effective_scale(sigma, sched.betas[-1], d)
        total = 0.0
        # divergent candidates are part of the search space: evaluate them
        # quietly and score them +inf
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for truth, record in pairs:
                res = reconstruct(record, op, sched, refinement,
                                  x0_mode=x0_mode, monotone=monotone,
                                  image_shape=image_shape)
                total += composite_loss(res.estimate, truth, record, op,
                                        eps_final)
        mean = total / len(pairs)
        if not np.isfinite(mean):
            mean = np.inf
        if state["initial_loss"] is None:
            state["initial_loss"] = mean
        if mean < state["best_loss"]:
            state["best_loss"] = mean
            state["best_theta"] = np.array(theta)
        return mean

    try:
        minimize(loss_of, theta0, method="Nelder-Mead",
                 options={"maxfev": budget, "xatol": 1e-3, "fatol": 1e-6})
    except _BudgetExhausted:
        pass
    return CalibrationResult(
        schedule=schedule_of(state["best_theta"]),
        initial_loss=state["initial_loss"],
        best_loss=state["best_loss"],
        evaluations=state["count"],
    )
