"""Quantized compressive sensing engine.

Simulates y = Q(Mx + n), evaluates noise-perturbed quantized likelihoods and
their closed-form gradients, and reconstructs signals by a deterministic
multi-stage likelihood-gradient projection with pluggable refinement
operators, including a dual-domain spectral/spatial state-space block.
"""

from .exceptions import (ConsistencyError, DataError, DegenerateScaleError,
                         DimensionError, InputError, ParameterError, QcsError,
                         StabilityError)
from .quantizer import (IntervalBounds, QuantizerSpec, codewords, dequantize,
                        interval_of, intervals_of, quantize)
from .sensing import (MeasurementRecord, SensingOperator, apply,
                      apply_transpose, gaussian_operator, row_gram_diag,
                      simulate)
from .likelihood import (effective_scale, grad_element, grad_measurement,
                         interval_grad, likelihood_projection,
                         log_interval_prob, log_likelihood_element,
                         mills_ratio, nll)
from .spectral_op import (HalfSpectrum, LowRankCoupling, SpectralParams,
                          diagonal_filter, forward_rfft2, gelu,
                          geometric_gain, hermitian_project,
                          hermitian_project_and_invert, inverse_rfft2,
                          lowrank_couple, recurrence_oracle, silu, transition)
from .dmb import (DMBParams, FFBKernels, SpatialSSMParams, dmb_forward,
                  layer_norm, random_dmb_params, spatial_scan)
from .unfold import (CalibrationResult, DctSoftThreshold, DmbRefinement,
                     IdentityRefinement, ReconstructionResult, StageSchedule,
                     TvDenoise, calibrate, composite_loss, default_schedule,
                     reconstruct, vanilla_reconstruct)
from .metrics import MetricReport, cosine_similarity, evaluate, mse, psnr, ssim

__version__ = "0.1.0"
