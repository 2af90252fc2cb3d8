"""Frequency-conditioned stable complex filtering on real 2D half-spectra.

The operator runs a driven complex recurrence s_{j+1} = A s_j + B X per
frequency bin, whose J-step output C s_J collapses to the closed-form filter
D = C * B * (1 - A^J)/(1 - A) with A = exp(-delta) * exp(i*theta), |A| <= 1.
A rank-R projection/broadcast term adds cross-frequency coupling at O(L*R)
without ever materializing an L x L operator.  A Hermitian projection makes
the filtered half-spectrum invertible to an exactly real image.

FFT convention: unnormalized forward, 1/(H*W) inverse (numpy default).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .exceptions import DimensionError, ParameterError, StabilityError

GAIN_LIMIT_TOL = 1e-7   # |1 - A| below this returns the exact limit J
THETA_MARGIN = 1e-6     # theta clamped to +-(pi - margin): open interval


def silu(x):
    """x * sigmoid(x)."""
    x = np.asarray(x, dtype=float)
    return x / (1.0 + np.exp(-x))


def gelu(x):
    """Exact-CDF GELU, x * Phi(x) (no tanh approximation)."""
    x = np.asarray(x, dtype=float)
    return x * ndtr(x)


@dataclass
class HalfSpectrum:
    data: np.ndarray   # complex (batch, channels, H, W_f)
    full_width: int    # W, needed to disambiguate the inverse transform

    def __post_init__(self):
        wf = self.data.shape[-1]
        if wf != self.full_width // 2 + 1:
            raise DimensionError(
                f"half width {wf} inconsistent with full width {self.full_width}")


@dataclass
class SpectralParams:
    """Per-group, per-frequency filter parameters, shapes (G, H, W_f)."""
    delta: np.ndarray        # decay >= 0 (stability)
    theta: np.ndarray        # rotation, clamped into (-pi, pi)
    b: np.ndarray            # complex input map
    c: np.ndarray            # complex output map
    steps: int               # J >= 1

    def __post_init__(self):
        if self.steps < 1:
            raise ParameterError(f"steps must be >= 1, got {self.steps}")
        if (np.asarray(self.delta) < 0).any():
            raise StabilityError("delta must be >= 0 everywhere")
        lim = np.pi - THETA_MARGIN
        self.theta = np.clip(np.asarray(self.theta, dtype=float), -lim, lim)

    @property
    def groups(self) -> int:
        return self.delta.shape[0]


@dataclass
class LowRankCoupling:
    """Rank-R cross-frequency bases, shapes (G, R, L) with L = H * W_f."""
    u: np.ndarray            # complex broadcast bases
    v: np.ndarray            # complex projection bases
    alpha: np.ndarray        # per-group coupling scale (G,)
    warmup: float = 1.0      # lambda(t) in [0, 1], supplied by the caller

    def __post_init__(self):
        if not 0.0 <= self.warmup <= 1.0:
            raise ParameterError(f"warmup must be in [0, 1], got {self.warmup}")
        if self.u.shape != self.v.shape:
            raise DimensionError("u and v must have identical shapes")

    @property
    def rank(self) -> int:
        return self.u.shape[1]


def forward_rfft2(x: np.ndarray) -> HalfSpectrum:
    """Real-to-complex 2D FFT of (B, C, H, W), keeping width floor(W/2) + 1."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 4:
        raise DimensionError(f"expected (B, C, H, W), got shape {x.shape}")
    return HalfSpectrum(data=np.fft.rfft2(x, axes=(-2, -1)), full_width=x.shape[-1])


def inverse_rfft2(spec: HalfSpectrum) -> np.ndarray:
    h = spec.data.shape[-2]
    return np.fft.irfft2(spec.data, s=(h, spec.full_width), axes=(-2, -1))


def transition(delta, theta) -> np.ndarray:
    """A = exp(-delta) * exp(i*theta); |A| = exp(-delta) <= 1."""
    delta = np.asarray(delta, dtype=float)
    if (delta < 0).any():
        raise StabilityError("delta must be >= 0")
    return np.exp(-delta) * np.exp(1j * np.asarray(theta, dtype=float))


def geometric_gain(a, steps: int):
    """(1 - A^J) / (1 - A), with the exact limit J when |1 - A| < 1e-7."""
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    a = np.asarray(a, dtype=complex)
    near_one = np.abs(1.0 - a) < GAIN_LIMIT_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = (1.0 - a ** steps) / (1.0 - a)
    return np.where(near_one, complex(steps), gain)


def _per_channel(values: np.ndarray, channels: int) -> np.ndarray:
    # (G, H, W_f) group parameters -> (C, H, W_f) via block broadcast.
    groups = values.shape[0]
    if channels % groups:
        raise DimensionError(f"{groups} groups do not divide {channels} channels")
    return np.repeat(values, channels // groups, axis=0)


def diagonal_filter(spectrum: HalfSpectrum, params: SpectralParams) -> HalfSpectrum:
    """Y(w) = D(w) X(w) with D = C * B * geometric gain, per channel group."""
    x = spectrum.data
    a = transition(params.delta, params.theta)
    d = params.c * params.b * geometric_gain(a, params.steps)
    out = x * _per_channel(d, x.shape[1])
    return HalfSpectrum(data=out, full_width=spectrum.full_width)


def recurrence_oracle(spectrum: HalfSpectrum, params: SpectralParams) -> HalfSpectrum:
    """Literal J-step recurrence s_{j+1} = A s_j + B X, output C s_J.

    Reference implementation for equivalence checks; diagonal_filter is the
    closed form of exactly this loop.
    """
    x = spectrum.data
    channels = x.shape[1]
    a = _per_channel(transition(params.delta, params.theta), channels)
    b = _per_channel(params.b, channels)
    c = _per_channel(params.c, channels)
    s = np.zeros_like(x)
    for _ in range(params.steps):
        s = a * s + b * x
    return HalfSpectrum(data=c * s, full_width=spectrum.full_width)


def lowrank_couple(spectrum: HalfSpectrum, coupling: LowRankCoupling) -> HalfSpectrum:
    """Rank-R increment lambda * alpha_g * sum_r U_r <V_r, X>, per group.

    <V, X> = sum_w conj(V(w)) X(w) compresses each group's spectrum to R
    coefficients (R projections), which U then redistributes over bins
    (R broadcasts): O(L*R) work, no dense operator.
    """
    x = spectrum.data
    batch, channels, h, wf = x.shape
    groups = coupling.u.shape[0]
    if channels % groups:
        raise DimensionError(f"{groups} groups do not divide {channels} channels")
    if coupling.u.shape[2] != h * wf:
        raise DimensionError(
            f"bases cover {coupling.u.shape[2]} bins, spectrum has {h * wf}")
    xg = x.reshape(batch, groups, channels // groups, h * wf)
    proj = np.einsum("grl,bgcl->bgcr", np.conj(coupling.v), xg)
    inc = np.einsum("grl,bgcr->bgcl", coupling.u, proj)
    inc *= coupling.warmup * coupling.alpha[None, :, None, None]
    return HalfSpectrum(data=inc.reshape(x.shape), full_width=spectrum.full_width)


def hermitian_project(data: np.ndarray, full_width: int) -> np.ndarray:
    """Orthogonal projection onto half-spectra of real images.

    Interior columns (0 < w < W/2) are uniquely represented and untouched.
    The w = 0 column and, for even W, the Nyquist column carry their own
    conjugate symmetry along H: rows h and H-h are averaged into a conjugate
    pair, which also zeroes the imaginary part of the self-paired bins
    (h = 0 and h = H/2).
    """
    out = np.array(data, dtype=complex)
    h = out.shape[-2]
    reflect = (-np.arange(h)) % h
    sc_cols = [0]
    if full_width % 2 == 0 and out.shape[-1] == full_width // 2 + 1:
        sc_cols.append(full_width // 2)
    for col in sc_cols:
        column = out[..., :, col]
        out[..., :, col] = 0.5 * (column + np.conj(column[..., reflect]))
    return out


def hermitian_project_and_invert(spectrum: HalfSpectrum,
                                 gate: np.ndarray | None = None) -> np.ndarray:
    """IFFT of the Hermitian-projected spectrum, optionally gated by SiLU(gate).

    The projection guarantees the inverse transform of the retained
    coefficients is exactly real; gate=None skips the activation gating
    (used by the pure-operator checks).
    """
    projected = HalfSpectrum(
        data=hermitian_project(spectrum.data, spectrum.full_width),
        full_width=spectrum.full_width)
    out = inverse_rfft2(projected)
    if gate is not None:
        gate = np.asarray(gate, dtype=float)
        if gate.shape != out.shape:
            raise DimensionError(
                f"gate shape {gate.shape} != output shape {out.shape}")
        out = out * silu(gate)
    return out


def random_spectral_params(groups: int, height: int, width: int, steps: int,
                           rng: np.random.Generator,
                           scale: float = 0.02) -> SpectralParams:
    """Seeded Gaussian init (scale 0.02); delta folded positive for stability."""
    wf = width // 2 + 1
    shape = (groups, height, wf)
    return SpectralParams(
        delta=np.abs(rng.normal(0.0, scale, shape)),
        theta=rng.normal(0.0, scale, shape),
        b=rng.normal(0.0, scale, shape) + 1j * rng.normal(0.0, scale, shape),
        c=rng.normal(0.0, scale, shape) + 1j * rng.normal(0.0, scale, shape),
        steps=steps,
    )


def random_lowrank_coupling(groups: int, rank: int, height: int, width: int,
                            rng: np.random.Generator, scale: float = 0.02,
                            warmup: float = 1.0) -> LowRankCoupling:
    wf = width // 2 + 1
    shape = (groups, rank, height * wf)
    return LowRankCoupling(
        u=rng.normal(0.0, scale, shape) + 1j * rng.normal(0.0, scale, shape),
        v=rng.normal(0.0, scale, shape) + 1j * rng.normal(0.0, scale, shape),
        alpha=rng.normal(0.0, scale, groups),
        warmup=warmup,
    )
