"""Dual-domain mixing block: layer norm, spatial scan, spectral filter, fusion.

Forward pass on a (B, C, H, W) feature map:

    F_LN  = layer_norm(F_in)
    Y_spa = spatial scan of F_LN, gated by SiLU(F_LN)
    Y_spe = spectral branch of F_LN (diagonal filter + low-rank coupling,
            Hermitian-consistent inverse), gated by SiLU(F_LN)
    Y_out = w1 * Y_spa + w2 * Y_spe + F_in
    out   = pointwise( GELU( depthwise3x3( pointwise(Y_out) ) ) )

This component is forward-only: parameters come from files or seeded random
init, never from training here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError
from .spectral_op import (HalfSpectrum, LowRankCoupling, SpectralParams,
                          diagonal_filter, forward_rfft2, gelu,
                          hermitian_project_and_invert, lowrank_couple,
                          random_lowrank_coupling, random_spectral_params, silu)

__all__ = [
    "SpatialSSMParams", "FFBKernels", "DMBParams",
    "layer_norm", "scan_tokens", "spatial_scan", "spectral_branch",
    "feature_fusion", "dmb_forward", "silu", "gelu", "random_dmb_params",
]

LAYERNORM_EPS = 1e-5


@dataclass
class SpatialSSMParams:
    """Token-scan recurrence h' = a h + b z, y = c h + d_skip * z."""
    a: np.ndarray        # (S, S) state transition
    b: np.ndarray        # (S, C) input map
    c: np.ndarray        # (C, S) output map
    d_skip: np.ndarray   # (C,) per-channel skip

    def __post_init__(self):
        # Stability contract: spectral radius of `a` at most 1; rescale on load.
        radius = np.max(np.abs(np.linalg.eigvals(self.a))) if self.a.size else 0.0
        if radius > 1.0:
            self.a = self.a / radius


@dataclass
class FFBKernels:
    pw1: np.ndarray   # (C, C) first pointwise mix
    dw: np.ndarray    # (C, 3, 3) depthwise kernel, zero padding 1
    pw2: np.ndarray   # (C, C) second pointwise mix


@dataclass
class DMBParams:
    w1: float
    w2: float
    norm_scale: np.ndarray           # (C,)
    norm_shift: np.ndarray           # (C,)
    spatial: SpatialSSMParams
    spectral: SpectralParams
    coupling: LowRankCoupling | None = None
    ffb: FFBKernels | None = None    # None = fusion bypass (exact identity tail)


def layer_norm(x: np.ndarray, scale: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Normalize each spatial position over channels, then per-channel affine."""
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    normed = (x - mean) / np.sqrt(var + LAYERNORM_EPS)
    return normed * scale[None, :, None, None] + shift[None, :, None, None]


def scan_tokens(x: np.ndarray, params: SpatialSSMParams) -> np.ndarray:
    """Raw recurrence outputs over row-major tokens, before gating.

    The output at token t reads the state *before* it advances:
    y_t = c h_t + d z_t, then h_{t+1} = a h_t + b z_t, with h_1 = 0.
    """
    x = np.asarray(x, dtype=float)
    batch, channels, height, width = x.shape
    if params.b.shape[1] != channels or params.c.shape[0] != channels:
        raise DimensionError("spatial SSM parameter shapes do not match channels")
    tokens = x.reshape(batch, channels, height * width)
    y = np.empty_like(tokens)
    state_dim = params.a.shape[0]
    for bi in range(batch):
        h = np.zeros(state_dim)
        for t in range(height * width):
            z = tokens[bi, :, t]
            y[bi, :, t] = params.c @ h + params.d_skip * z
            h = params.a @ h + params.b @ z
    return y.reshape(x.shape)


def spatial_scan(x: np.ndarray, params: SpatialSSMParams) -> np.ndarray:
    """Token scan gated positionwise: scan_tokens(x) * SiLU(x)."""
    return scan_tokens(x, params) * silu(x)


def spectral_branch(x: np.ndarray, params: SpectralParams,
                    coupling: LowRankCoupling | None,
                    gate: np.ndarray | None) -> np.ndarray:
    spectrum = forward_rfft2(x)
    filtered = diagonal_filter(spectrum, params)
    if coupling is not None and coupling.rank > 0:
        filtered = HalfSpectrum(
            data=filtered.data + lowrank_couple(spectrum, coupling).data,
            full_width=filtered.full_width)
    return hermitian_project_and_invert(filtered, gate=gate)


def _pointwise(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    return np.einsum("oc,bchw->bohw", weight, x)


def _depthwise3x3(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Cross-correlation with zero padding 1, per channel.
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    height, width = x.shape[2], x.shape[3]
    out = np.zeros_like(x)
    for dy in range(3):
        for dx in range(3):
            out += kernel[None, :, dy, dx, None, None] * \
                padded[:, :, dy:dy + height, dx:dx + width]
    return out


def feature_fusion(x: np.ndarray, ffb: FFBKernels) -> np.ndarray:
    return _pointwise(gelu(_depthwise3x3(_pointwise(x, ffb.pw1), ffb.dw)), ffb.pw2)


def dmb_forward(x: np.ndarray, params: DMBParams) -> np.ndarray:
    """Full block forward; shape-preserving (B, C, H, W) -> (B, C, H, W)."""
    x = np.asarray(x, dtype=float)
    f_ln = layer_norm(x, params.norm_scale, params.norm_shift)
    y_spa = spatial_scan(f_ln, params.spatial)
    y_spe = spectral_branch(f_ln, params.spectral, params.coupling, gate=f_ln)
    y_out = params.w1 * y_spa + params.w2 * y_spe + x
    if params.ffb is None:
        return y_out
    return feature_fusion(y_out, params.ffb)


def random_dmb_params(channels: int, height: int, width: int,
                      state_dim: int = 4, groups: int = 1, rank: int = 0,
                      steps: int = 1, seed: int = 0,
                      scale: float = 0.02) -> DMBParams:
    """Seeded Gaussian init (scale 0.02) for every learned tensor."""
    rng = np.random.default_rng(seed)
    spatial = SpatialSSMParams(
        a=rng.normal(0.0, scale, (state_dim, state_dim)),
        b=rng.normal(0.0, scale, (state_dim, channels)),
        c=rng.normal(0.0, scale, (channels, state_dim)),
        d_skip=rng.normal(0.0, scale, channels),
    )
    spectral = random_spectral_params(groups, height, width, steps, rng, scale)
    coupling = None
    if rank > 0:
        coupling = random_lowrank_coupling(groups, rank, height, width, rng, scale)
    ffb = FFBKernels(
        pw1=rng.normal(0.0, scale, (channels, channels)),
        dw=rng.normal(0.0, scale, (channels, 3, 3)),
        pw2=rng.normal(0.0, scale, (channels, channels)),
    )
    return DMBParams(
        w1=float(rng.normal(0.0, scale)),
        w2=float(rng.normal(0.0, scale)),
        norm_scale=np.ones(channels),
        norm_shift=np.zeros(channels),
        spatial=spatial,
        spectral=spectral,
        coupling=coupling,
        ffb=ffb,
    )
