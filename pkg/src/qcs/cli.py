"""Command-line surface: simulate, reconstruct, calibrate, eval, gradcheck,
ssmcheck.

Exit codes: 0 success (all checks pass for the check commands), 1 failed
check, 2 malformed input file, 3 bad parameter, 4 inconsistent metadata,
5 missing/empty data.  QCS_SEED provides the default for every seed flag.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import fileio, plots
from .exceptions import (ConsistencyError, DataError, DimensionError,
                         InputError, ParameterError, QcsError)
from .likelihood import interval_grad, log_interval_prob
from .metrics import evaluate
from .quantizer import QuantizerSpec, codewords, intervals_of
from .sensing import gaussian_operator, simulate
from .spectral_op import (HalfSpectrum, SpectralParams, diagonal_filter,
                          forward_rfft2, hermitian_project_and_invert,
                          lowrank_couple, random_lowrank_coupling,
                          random_spectral_params, recurrence_oracle)
from .unfold import (DctSoftThreshold, DmbRefinement, IdentityRefinement,
                     TvDenoise, calibrate, reconstruct, vanilla_reconstruct)


def _default_seed() -> int:
    return int(os.environ.get("QCS_SEED", "0"))


def _parse_refinement(text: str):
    if text == "identity":
        return IdentityRefinement(), None
    kind, _, arg = text.partition(":")
    try:
        if kind == "dct":
            return DctSoftThreshold(tau=float(arg)), None
        if kind == "tv":
            weight, iters = arg.split(",")
            return TvDenoise(weight=float(weight), iters=int(iters)), None
        if kind == "dmb":
            params, height, width = fileio.read_dmb_params(arg)
            return DmbRefinement(params=params), (height, width)
    except (ValueError, OSError) as err:
        raise ParameterError(f"bad --refine argument {text!r}: {err}")
    raise ParameterError(f"unknown refinement kind {text!r}")


def _operator_for(record_n: int, header_m: int, seed: int):
    return gaussian_operator(header_m, record_n, seed)


# -- subcommands -------------------------------------------------------------

def cmd_simulate(args) -> int:
    values, _ = fileio.read_tensor(args.input)
    x = values.ravel()
    spec = QuantizerSpec(bits=args.q, step=args.delta if args.q > 1 else 1.0)
    if args.m < 1:
        raise ParameterError("--m must be >= 1")
    if args.sigma < 0:
        raise ParameterError("--sigma must be >= 0")
    op = gaussian_operator(args.m, x.size, args.op_seed)
    record = simulate(x, op, args.sigma, spec, args.noise_seed)
    fileio.write_measurement(args.out, record, n=x.size)
    counts = np.bincount(record.indices, minlength=spec.levels)
    print(f"M={args.m} N={x.size} Q={args.q}")
    print("codeword histogram:")
    for value, count in zip(codewords(spec), counts):
        print(f"  {value:+.6g}: {count}")
    return 0


def cmd_reconstruct(args) -> int:
    record, n = fileio.read_measurement(args.meas)
    schedule = fileio.read_schedule(args.schedule)
    refinement, dmb_grid = _parse_refinement(args.refine)
    image_shape = tuple(args.shape) if args.shape else None
    if image_shape is not None and int(np.prod(image_shape)) != n:
        raise ConsistencyError(
            f"--shape {image_shape} has {int(np.prod(image_shape))} elements, "
            f"measurement header says N={n}")
    if dmb_grid is not None:
        grid = image_shape if image_shape is not None else (1, n)
        if tuple(grid[:2]) != dmb_grid:
            raise ConsistencyError(
                f"DMB parameters were built for grid {dmb_grid}, "
                f"reconstruction grid is {tuple(grid[:2])}")
    op = _operator_for(n, record.indices.size, record.operator_seed)
    kwargs = dict(refinement=refinement, x0_mode=args.x0,
                  image_shape=image_shape)
    if args.mode == "likelihood":
        result = reconstruct(record, op, schedule, monotone=args.monotone,
                             **kwargs)
    else:
        result = vanilla_reconstruct(record, op, schedule, **kwargs)
    estimate = result.estimate
    kind = "signal"
    out_values = estimate
    if image_shape is not None:
        out_values = estimate.reshape(image_shape)
        kind = "image"
    fileio.write_tensor(args.out, out_values, kind=kind)
    if args.trace:
        lines = ["stage,nll,residual"]
        for k in range(schedule.stages):
            lines.append(f"{k + 1},{float(result.nll_trace[k])!r},"
                         f"{float(result.residual_trace[k])!r}")
        Path(args.trace).write_text("\n".join(lines) + "\n")
        if not args.no_figures:
            plots.render_trace_figure(result.nll_trace, result.residual_trace,
                                      Path(args.trace).with_suffix(".png"))
    if args.export_pgm:
        if image_shape is None:
            raise ParameterError("--export-pgm requires --shape")
        fileio.write_pgm(args.export_pgm, estimate.reshape(image_shape))
    print(f"stages={schedule.stages} final_nll={float(result.nll_trace[-1])!r}")
    return 0


def cmd_calibrate(args) -> int:
    train_dir = Path(args.train_dir)
    files = sorted(train_dir.glob("*")) if train_dir.is_dir() else []
    files = [f for f in files if f.is_file()]
    if not files:
        raise DataError(f"no training tensors in {args.train_dir}")
    spec = QuantizerSpec(bits=args.q, step=args.delta if args.q > 1 else 1.0)
    refinement, _ = _parse_refinement(args.refine)
    pairs = []
    op = None
    for i, f in enumerate(files):
        values, _ = fileio.read_tensor(f)
        x = values.ravel()
        if op is None:
            op = gaussian_operator(args.m, x.size, args.seed)
        elif x.size != op.cols:
            raise ConsistencyError(
                f"{f}: signal length {x.size} != first file's {op.cols}")
        record = simulate(x, op, args.sigma, spec, noise_seed=args.seed + 1 + i)
        pairs.append((x, record))
    result = calibrate(pairs, op, stages=args.stages, refinement=refinement,
                       budget=args.budget, sigma=args.sigma,
                       monotone=args.monotone)
    fileio.write_schedule(args.out, result.schedule)
    print(f"pairs={len(pairs)} evaluations={result.evaluations} "
          f"budget={args.budget}")
    print(f"initial_loss={result.initial_loss!r}")
    print(f"final_loss={result.best_loss!r}")
    return 0


def cmd_eval(args) -> int:
    est, est_kind = fileio.read_tensor(args.estimate)
    ref, _ = fileio.read_tensor(args.reference)
    if est.shape != ref.shape:
        raise ConsistencyError(
            f"estimate shape {est.shape} != reference shape {ref.shape}")
    image_shape = est.shape if est_kind == "image" and est.ndim >= 2 else None
    report = evaluate(est.ravel(), ref.ravel(), image_shape=image_shape)
    lines = ["file,psnr,ssim,cosine,mse",
             f"{args.estimate},{report.psnr!r},{report.ssim!r},"
             f"{report.cosine!r},{report.mse!r}"]
    Path(args.out).write_text("\n".join(lines) + "\n")
    if not args.no_figures:
        plots.render_eval_figure(est.ravel(), ref.ravel(), image_shape,
                                 Path(args.out).with_suffix(".png"))
    if args.export_pgm:
        if image_shape is None:
            raise ParameterError("--export-pgm requires an image estimate")
        fileio.write_pgm(args.export_pgm, est)
    print(f"psnr={report.psnr:.4f} ssim={report.ssim:.6f} "
          f"cosine={report.cosine:.6f} mse={report.mse!r}")
    return 0


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    qs = [args.q] if args.q else [1, 2, 3]
    lo, hi = args.eps_range
    if not (0 < lo < hi):
        raise ParameterError("--eps-range must satisfy 0 < lo < hi")
    worst = 0.0
    for q in qs:
        spec = QuantizerSpec(bits=q, step=args.delta if q > 1 else 1.0)
        trials = max(args.trials // len(qs), 1)
        idx = rng.integers(0, spec.levels, size=trials)
        lower, upper = intervals_of(idx, spec)
        eps = np.exp(rng.uniform(np.log(lo), np.log(hi), size=trials))
        z = rng.normal(0.0, 1.0, size=trials) * \
            np.maximum(spec.step * spec.levels, eps)
        grad = interval_grad(z, lower, upper, eps)
        step = 1e-6 * eps
        fd = (log_interval_prob(z + step, lower, upper, eps)
              - log_interval_prob(z - step, lower, upper, eps)) / (2 * step)
        rel = np.abs(grad - fd) / np.maximum(1.0, np.abs(grad))
        worst = max(worst, float(rel.max()))
        # deep-tail scan: |z|/eps up to 40 must stay finite
        tails = np.linspace(-40.0, 40.0, 401)
        for e in (lo, 1.0, hi):
            g = interval_grad(tails * e, *intervals_of(
                rng.integers(0, spec.levels, size=tails.size), spec), e)
            if not np.isfinite(g).all():
                print(f"FAIL: non-finite gradient at Q={q}, eps={e}")
                return 1
    print(f"max relative FD mismatch: {worst:.3e} (tolerance 1e-5)")
    if worst <= 1e-5:
        print("gradcheck PASS")
        return 0
    print("gradcheck FAIL")
    return 1


def _ssm_relerr(a: HalfSpectrum, b: HalfSpectrum) -> float:
    denom = np.linalg.norm(b.data)
    return float(np.linalg.norm(a.data - b.data) / denom) if denom else 0.0


def cmd_ssmcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    height, width = args.grid
    failures = []

    worst_equiv = 0.0
    for steps in args.steps:
        for _ in range(args.trials):
            params = random_spectral_params(1, height, width, steps, rng)
            params.delta = rng.uniform(0.0, 2.0, params.delta.shape)
            params.theta = rng.uniform(-3.0, 3.0, params.theta.shape)
            x = forward_rfft2(rng.normal(size=(1, 1, height, width)))
            worst_equiv = max(worst_equiv, _ssm_relerr(
                diagonal_filter(x, params), recurrence_oracle(x, params)))
        # exact limit: A = 1 everywhere must return gain J
        limit = SpectralParams(delta=np.zeros((1, height, width // 2 + 1)),
                               theta=np.zeros((1, height, width // 2 + 1)),
                               b=np.ones((1, height, width // 2 + 1), complex),
                               c=np.ones((1, height, width // 2 + 1), complex),
                               steps=steps)
        x = forward_rfft2(rng.normal(size=(1, 1, height, width)))
        worst_equiv = max(worst_equiv, _ssm_relerr(
            diagonal_filter(x, limit), recurrence_oracle(x, limit)))
    print(f"closed-form vs recurrence: max rel err {worst_equiv:.3e} (tol 1e-10)")
    if worst_equiv > 1e-10:
        failures.append("recurrence-equivalence")

    # Hermitian realness vs a full complex IFFT oracle
    worst_real = 0.0
    for _ in range(args.trials):
        data = (rng.normal(size=(1, 1, height, width // 2 + 1))
                + 1j * rng.normal(size=(1, 1, height, width // 2 + 1)))
        spec = HalfSpectrum(data=data, full_width=width)
        out = hermitian_project_and_invert(spec)
        full = _full_spectrum_oracle(
            hermitian_projected_data(spec), height, width)
        ifft = np.fft.ifft2(full, axes=(-2, -1))
        norm = np.linalg.norm(out)
        worst_real = max(worst_real,
                         float(np.linalg.norm(ifft.imag) / norm),
                         float(np.linalg.norm(ifft.real - out) / norm))
    print(f"hermitian realness residue: {worst_real:.3e} (tol 1e-10)")
    if worst_real > 1e-10:
        failures.append("hermitian-realness")

    # circular-shift equivariance of the diagonal path
    worst_shift = 0.0
    for _ in range(args.trials):
        params = random_spectral_params(1, height, width, args.steps[0], rng)
        x = rng.normal(size=(1, 1, height, width))
        y = _diag_apply(x, params)
        dh, dw = int(rng.integers(height)), int(rng.integers(width))
        y_shift = _diag_apply(np.roll(x, (dh, dw), axis=(2, 3)), params)
        err = np.linalg.norm(y_shift - np.roll(y, (dh, dw), axis=(2, 3)))
        worst_shift = max(worst_shift, float(err / np.linalg.norm(y)))
    print(f"shift equivariance: max rel err {worst_shift:.3e} (tol 1e-8)")
    if worst_shift > 1e-8:
        failures.append("shift-equivariance")

    # low-rank coupling vs the dense Diag + sum u v^H oracle
    worst_lr = 0.0
    bins = height * (width // 2 + 1)
    for _ in range(args.trials):
        params = random_spectral_params(1, height, width, args.steps[0], rng)
        coupling = random_lowrank_coupling(1, args.rank, height, width, rng)
        x = forward_rfft2(rng.normal(size=(1, 1, height, width)))
        fast = diagonal_filter(x, params).data + lowrank_couple(x, coupling).data
        from .spectral_op import geometric_gain, transition
        diag = (params.c * params.b * geometric_gain(
            transition(params.delta, params.theta), params.steps)).ravel()
        dense = np.diag(diag).astype(complex)
        for r in range(args.rank):
            dense += coupling.warmup * coupling.alpha[0] * np.outer(
                coupling.u[0, r], np.conj(coupling.v[0, r]))
        slow = (dense @ x.data.reshape(bins)).reshape(fast.shape)
        worst_lr = max(worst_lr, float(
            np.linalg.norm(fast - slow) / np.linalg.norm(slow)))
    print(f"low-rank vs dense oracle: max rel err {worst_lr:.3e} (tol 1e-10)")
    if worst_lr > 1e-10:
        failures.append("low-rank-oracle")

    if failures:
        print(f"ssmcheck FAIL: {failures[0]}")
        return 1
    print("ssmcheck PASS")
    return 0


def hermitian_projected_data(spec: HalfSpectrum) -> np.ndarray:
    from .spectral_op import hermitian_project
    return hermitian_project(spec.data, spec.full_width)


def _full_spectrum_oracle(half: np.ndarray, height: int, width: int) -> np.ndarray:
    """Hermitian reflection of a half-spectrum into the full W columns."""
    full = np.zeros(half.shape[:-1] + (width,), dtype=complex)
    wf = width // 2 + 1
    full[..., :wf] = half
    reflect = (-np.arange(height)) % height
    for w in range(wf, width):
        full[..., :, w] = np.conj(half[..., reflect, width - w])
    return full


def _diag_apply(x: np.ndarray, params: SpectralParams) -> np.ndarray:
    spec = forward_rfft2(x)
    return hermitian_project_and_invert(diagonal_filter(spec, params))


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcs",
        description="Quantized compressive sensing engine")
    sub = parser.add_subparsers(dest="command", required=True)
    seed_default = _default_seed()

    p = sub.add_parser("simulate", help="simulate y = Q(Mx + n)")
    p.add_argument("--input", required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--op-seed", type=int, default=seed_default)
    p.add_argument("--noise-seed", type=int, default=seed_default)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="multi-stage reconstruction")
    p.add_argument("--meas", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--refine", default="identity",
                   help="identity | dct:TAU | tv:WEIGHT,ITERS | dmb:FILE")
    p.add_argument("--mode", choices=["likelihood", "vanilla"],
                   default="likelihood")
    p.add_argument("--monotone", action="store_true")
    p.add_argument("--x0", choices=["zeros", "backprojection"],
                   default="zeros")
    p.add_argument("--shape", type=int, nargs="+", default=None,
                   metavar="DIM")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--export-pgm", default=None)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("calibrate", help="fit a stage schedule")
    p.add_argument("--train-dir", required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--refine", default="identity")
    p.add_argument("--monotone", action="store_true",
                   help="calibrate with backtracking reconstructions")
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("eval", help="metrics CSV for estimate vs reference")
    p.add_argument("--estimate", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--export-pgm", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck",
                       help="finite-difference check of likelihood gradients")
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--eps-range", type=float, nargs=2, default=[1e-3, 10.0])
    p.add_argument("--seed", type=int, default=seed_default)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ssmcheck", help="spectral operator invariant suite")
    p.add_argument("--grid", type=int, nargs=2, default=[8, 8])
    p.add_argument("--rank", type=int, default=3)
    p.add_argument("--steps", type=int, nargs="+", default=[1, 2, 7, 64])
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=seed_default)
    p.set_defaults(func=cmd_ssmcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except ParameterError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (ConsistencyError, DimensionError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 5
    except QcsError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
