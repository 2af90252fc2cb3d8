"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every tolerance is asserted at its stated value and each criterion
carries its stated wall-clock budget.
"""

import json
import time
from pathlib import Path

import numpy as np

from qcs.cli import main as cli_main
from qcs.dmb import (SpatialSSMParams, dmb_forward, random_dmb_params,
                     silu, spatial_scan)
from qcs.likelihood import interval_grad, log_interval_prob
from qcs.quantizer import QuantizerSpec, intervals_of
from qcs.sensing import gaussian_operator, simulate
from qcs.spectral_op import (HalfSpectrum, diagonal_filter, forward_rfft2,
                             geometric_gain, hermitian_project,
                             hermitian_project_and_invert, lowrank_couple,
                             random_lowrank_coupling, random_spectral_params,
                             recurrence_oracle, transition)
from qcs.unfold import (StageSchedule, default_schedule, reconstruct,
                        vanilla_reconstruct)

DATA = Path(__file__).parent / "data"


class Budget:
    def __init__(self, seconds):
        self.limit = seconds
        self.start = time.perf_counter()

    def check(self):
        elapsed = time.perf_counter() - self.start
        assert elapsed < self.limit, f"{elapsed:.1f}s exceeds {self.limit}s budget"
        return elapsed


def announce(number, title, elapsed):
    print(f"\nACCEPTANCE {number:2d} PASS: {title}  [{elapsed:.1f}s]")


def test_criterion_01_gradient_fidelity():
    budget = Budget(10)
    rng = np.random.default_rng(101)
    worst = 0.0
    total = 0
    for bits in (1, 2, 3):
        spec = QuantizerSpec(bits, 1.0)
        n = 4000
        total += n
        idx = rng.integers(0, spec.levels, size=n)
        lower, upper = intervals_of(idx, spec)
        eps = np.exp(rng.uniform(np.log(1e-3), np.log(10.0), size=n))
        z = rng.normal(0.0, 1.0, size=n) * np.maximum(spec.levels * spec.step,
                                                      eps)
        grad = interval_grad(z, lower, upper, eps)
        step = 1e-6 * eps
        fd = (log_interval_prob(z + step, lower, upper, eps)
              - log_interval_prob(z - step, lower, upper, eps)) / (2 * step)
        worst = max(worst, float(np.max(np.abs(grad - fd)
                                        / np.maximum(1.0, np.abs(grad)))))
        # deep tails: |z|/eps up to 40, every cell, no NaN/Inf
        t = np.linspace(-40.0, 40.0, 801)
        for eps_tail in (1e-3, 1.0, 10.0):
            for cell in range(spec.levels):
                lo, up = intervals_of(np.full(t.size, cell), spec)
                g = interval_grad(t * eps_tail, lo, up, eps_tail)
                assert np.isfinite(g).all()
    assert total >= 10_000
    assert worst <= 1e-5, f"max relative FD mismatch {worst:.2e}"
    announce(1, f"gradient fidelity (max FD mismatch {worst:.2e} <= 1e-5, "
                "no NaN/Inf to |z|/eps = 40)", budget.check())


def test_criterion_02_partition_of_unity():
    budget = Budget(5)
    rng = np.random.default_rng(102)
    worst = 0.0
    for bits in (1, 2, 3, 4):
        spec = QuantizerSpec(bits, 0.7)
        lower, upper = intervals_of(np.arange(spec.levels), spec)
        for _ in range(1000):
            z = rng.uniform(-2.0 * spec.levels, 2.0 * spec.levels)
            eps = float(np.exp(rng.uniform(np.log(1e-2), np.log(10.0))))
            total = float(np.exp(log_interval_prob(z, lower, upper, eps)).sum())
            worst = max(worst, abs(total - 1.0))
    assert worst <= 1e-12, f"partition defect {worst:.2e}"
    announce(2, f"partition of unity (max |sum - 1| = {worst:.1e} <= 1e-12)",
             budget.check())


def test_criterion_03_spectral_equivalence():
    budget = Budget(10)
    rng = np.random.default_rng(103)
    worst = 0.0
    draws = 0
    for steps in (1, 2, 7, 64):
        for _ in range(25):
            params = random_spectral_params(2, 8, 8, steps, rng)
            params.delta = rng.uniform(0.0, 2.0, params.delta.shape)
            params.theta = rng.uniform(-3.0, 3.0, params.theta.shape)
            x = forward_rfft2(rng.normal(size=(1, 4, 8, 8)))
            cf = diagonal_filter(x, params).data
            rec = recurrence_oracle(x, params).data
            worst = max(worst, float(np.linalg.norm(cf - rec)
                                     / np.linalg.norm(rec)))
            draws += 1
        # |1 - A| < 1e-7 limit: A = 1 exactly, gain must be exactly J
        shape = (1, 8, 5)
        limit = random_spectral_params(1, 8, 8, steps, rng)
        limit.delta = np.zeros(shape)
        limit.theta = np.zeros(shape)
        assert complex(geometric_gain(
            transition(limit.delta, limit.theta), steps)[0, 0, 0]) == steps
        x = forward_rfft2(rng.normal(size=(1, 1, 8, 8)))
        cf = diagonal_filter(x, limit).data
        rec = recurrence_oracle(x, limit).data
        worst = max(worst, float(np.linalg.norm(cf - rec)
                                 / np.linalg.norm(rec)))
    assert draws == 100
    assert worst <= 1e-10, f"closed form vs recurrence {worst:.2e}"
    announce(3, f"S3M closed form = recurrence over 100 draws "
                f"(max rel {worst:.1e} <= 1e-10, limit cases exact)",
             budget.check())


def _full_spectrum(half, width):
    height = half.shape[-2]
    wf = width // 2 + 1
    out = np.zeros(half.shape[:-1] + (width,), dtype=complex)
    out[..., :wf] = half
    reflect = (-np.arange(height)) % height
    for w in range(wf, width):
        out[..., :, w] = np.conj(half[..., reflect, width - w])
    return out


def test_criterion_04_realness_and_equivariance():
    budget = Budget(10)
    rng = np.random.default_rng(104)
    worst_imag = 0.0
    worst_shift = 0.0
    for height, width in ((8, 8), (16, 16)):
        for _ in range(10):
            data = (rng.normal(size=(1, 2, height, width // 2 + 1))
                    + 1j * rng.normal(size=(1, 2, height, width // 2 + 1)))
            spec = HalfSpectrum(data=data, full_width=width)
            out = hermitian_project_and_invert(spec)
            oracle = np.fft.ifft2(
                _full_spectrum(hermitian_project(data, width), width),
                axes=(-2, -1))
            norm = np.linalg.norm(out)
            worst_imag = max(worst_imag,
                             float(np.linalg.norm(oracle.imag) / norm),
                             float(np.linalg.norm(oracle.real - out) / norm))

        params = random_spectral_params(1, height, width, 4, rng)
        params.delta = rng.uniform(0.0, 2.0, params.delta.shape)

        def apply_op(img):
            return hermitian_project_and_invert(
                diagonal_filter(forward_rfft2(img), params))

        x = rng.normal(size=(1, 1, height, width))
        y = apply_op(x)
        for _ in range(8):
            dh = int(rng.integers(height))
            dw = int(rng.integers(width))
            shifted = apply_op(np.roll(x, (dh, dw), axis=(2, 3)))
            err = np.linalg.norm(shifted - np.roll(y, (dh, dw), axis=(2, 3)))
            worst_shift = max(worst_shift, float(err / np.linalg.norm(y)))
    assert worst_imag <= 1e-10, f"imaginary residue {worst_imag:.2e}"
    assert worst_shift <= 1e-8, f"shift equivariance {worst_shift:.2e}"
    announce(4, f"Hermitian realness ({worst_imag:.1e} <= 1e-10) and shift "
                f"equivariance ({worst_shift:.1e} <= 1e-8)", budget.check())


def test_criterion_05_lowrank_correctness():
    budget = Budget(5)
    rng = np.random.default_rng(105)
    worst = 0.0
    height, width = 8, 8           # L = 40 <= 64
    bins = height * (width // 2 + 1)
    for rank in (1, 3):
        for _ in range(10):
            params = random_spectral_params(1, height, width, 3, rng)
            coupling = random_lowrank_coupling(1, rank, height, width, rng)
            x = forward_rfft2(rng.normal(size=(1, 1, height, width)))
            fast = diagonal_filter(x, params).data \
                + lowrank_couple(x, coupling).data
            diag = (params.c * params.b * geometric_gain(
                transition(params.delta, params.theta), params.steps)).ravel()
            dense = np.diag(diag).astype(complex)
            for r in range(rank):
                dense += coupling.warmup * coupling.alpha[0] * np.outer(
                    coupling.u[0, r], np.conj(coupling.v[0, r]))
            slow = (dense @ x.data.reshape(bins)).reshape(fast.shape)
            worst = max(worst, float(np.linalg.norm(fast - slow)
                                     / np.linalg.norm(slow)))
    assert worst <= 1e-10, f"low-rank vs dense oracle {worst:.2e}"
    announce(5, f"rank-R projection/broadcast = dense oracle "
                f"(max rel {worst:.1e} <= 1e-10, R in {{1,3}}, L = 40)",
             budget.check())


def test_criterion_06_monotone_reconstruction():
    budget = Budget(30)
    rng = np.random.default_rng(106)
    instances = 0
    for bits in (1, 2):
        spec = QuantizerSpec(bits, 0.7)
        for trial in range(10):
            n, m = 16, 64
            x = rng.normal(size=n)
            op = gaussian_operator(m, n, seed=1000 * bits + trial)
            record = simulate(x, op, 0.0, spec,
                              noise_seed=2000 * bits + trial)
            schedule = StageSchedule(lambdas=np.full(25, 0.5),
                                     betas=np.full(25, 0.1), sigma=0.0)
            res = reconstruct(record, op, schedule, monotone=True)
            diffs = np.diff(res.nll_trace)
            assert (diffs <= 0).all(), \
                f"NLL increased at Q={bits} trial {trial}: max diff {diffs.max()}"
            instances += 1
    assert instances == 20
    announce(6, "monotone mode: NLL trace non-increasing on all 20 seeded "
                "1-bit and 2-bit instances (exact)", budget.check())


def test_criterion_07_desk_scale_one_bit_recovery():
    budget = Budget(120)
    import sys
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "scripts"))
    from pilot_onebit import RECIPE, run_pilot

    pinned = json.loads((DATA / "pilot_onebit.json").read_text())
    cal, cosines = run_pilot(RECIPE)
    cosines = np.asarray(cosines)
    passing = int((cosines >= RECIPE["cosine_threshold"]).sum())
    assert passing >= RECIPE["min_passing"], \
        f"only {passing}/20 seeds reached cosine >= 0.95"
    # the committed pilot run must reproduce
    np.testing.assert_allclose(cosines, pinned["cosines"], atol=1e-6)
    announce(7, f"desk-scale 1-bit recovery: {passing}/20 seeds >= 0.95 "
                f"(min cosine {cosines.min():.4f}; pilot reproduced)",
             budget.check())


def test_criterion_08_directional_baseline_contrast():
    budget = Budget(120)
    finals_lik, finals_van = [], []
    spec = QuantizerSpec(2, 0.7)
    for s in range(20):
        rng = np.random.default_rng(7000 + s)
        x = rng.normal(size=256)
        op = gaussian_operator(512, 256, seed=8000 + s)
        record = simulate(x, op, 0.01, spec, noise_seed=9000 + s)
        schedule = default_schedule(30, sigma=0.01)
        finals_lik.append(reconstruct(
            record, op, schedule, monotone=True,
            x0_mode="backprojection").nll_trace[-1])
        finals_van.append(vanilla_reconstruct(
            record, op, schedule, x0_mode="backprojection").nll_trace[-1])
    mean_lik, mean_van = np.mean(finals_lik), np.mean(finals_van)
    assert mean_lik <= mean_van, \
        f"likelihood {mean_lik:.4f} > vanilla {mean_van:.4f}"
    announce(8, f"likelihood projection beats L2 baseline on mean final NLL "
                f"({mean_lik:.2e} <= {mean_van:.4f}, 20 paired 2-bit runs)",
             budget.check())


def test_criterion_09_dmb_contract():
    budget = Budget(10)
    rng = np.random.default_rng(109)
    # residual identity
    params = random_dmb_params(8, 8, 8, state_dim=3, groups=2, rank=2,
                               steps=2, seed=42)
    params.w1 = 0.0
    params.w2 = 0.0
    params.ffb = None
    x = rng.normal(size=(2, 8, 8, 8))
    assert np.array_equal(dmb_forward(x, params), x)

    # scan equals the naive loop oracle bit-for-bit
    channels, state_dim = 6, 4
    scan_params = SpatialSSMParams(
        a=rng.normal(size=(state_dim, state_dim)) * 0.2,
        b=rng.normal(size=(state_dim, channels)),
        c=rng.normal(size=(channels, state_dim)),
        d_skip=rng.normal(size=channels))
    feat = rng.normal(size=(2, channels, 4, 5))
    got = spatial_scan(feat, scan_params)
    tokens = feat.reshape(2, channels, 20)
    oracle = np.empty_like(tokens)
    for b in range(2):
        h = np.zeros(state_dim)
        for t in range(20):
            z = tokens[b, :, t]
            oracle[b, :, t] = scan_params.c @ h + scan_params.d_skip * z
            h = scan_params.a @ h + scan_params.b @ z
    want = oracle.reshape(feat.shape) * silu(feat)
    assert np.array_equal(got, want)

    # shape preservation on randomized dims
    for _ in range(5):
        bsz = int(rng.integers(1, 3))
        ch = int(rng.integers(1, 4)) * 2
        height = int(rng.integers(4, 12))
        width = int(rng.integers(4, 12))
        p = random_dmb_params(ch, height, width, state_dim=2, groups=2,
                              rank=1, steps=2, seed=int(rng.integers(1000)))
        inp = rng.normal(size=(bsz, ch, height, width))
        out = dmb_forward(inp, p)
        assert out.shape == inp.shape
        assert np.isfinite(out).all()
    announce(9, "DMB contract: exact residual identity, bit-exact scan vs "
                "loop oracle, shape preservation", budget.check())


def test_criterion_10_cli_round_trip(tmp_path, monkeypatch, capsys):
    budget = Budget(60)
    from qcs import fileio

    rng = np.random.default_rng(110)
    x = rng.normal(size=32)
    x /= np.linalg.norm(x)
    fileio.write_tensor(tmp_path / "x.tf", x)
    fileio.write_schedule(tmp_path / "sched.json", default_schedule(10))

    outputs = {}
    for tag in ("r1", "r2"):
        run_dir = tmp_path / tag
        run_dir.mkdir()
        monkeypatch.chdir(run_dir)
        assert cli_main(["simulate", "--input", str(tmp_path / "x.tf"),
                         "--q", "2", "--delta", "0.4", "--m", "64",
                         "--op-seed", "11", "--noise-seed", "12",
                         "--out", "m.qm"]) == 0
        assert cli_main(["reconstruct", "--meas", "m.qm", "--schedule",
                         str(tmp_path / "sched.json"), "--monotone",
                         "--out", "e.tf", "--trace", "t.csv"]) == 0
        assert cli_main(["eval", "--estimate", "e.tf", "--reference",
                         str(tmp_path / "x.tf"), "--out", "metrics.csv"]) == 0
        outputs[tag] = {name: (run_dir / name).read_bytes()
                        for name in ("m.qm", "e.tf", "t.csv", "t.png",
                                     "metrics.csv", "metrics.png")}
    assert outputs["r1"] == outputs["r2"], "pipeline outputs not byte-identical"

    assert cli_main(["gradcheck", "--trials", "10000", "--seed", "7"]) == 0
    assert cli_main(["ssmcheck", "--grid", "8", "8", "--rank", "3",
                     "--steps", "1", "2", "7", "64", "--trials", "5",
                     "--seed", "8"]) == 0
    capsys.readouterr()
    announce(10, "CLI pipeline byte-deterministic; gradcheck and ssmcheck "
                 "exit 0", budget.check())
