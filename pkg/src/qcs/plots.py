"""Figure rendering for the CLI report paths (Agg backend, files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def render_trace_figure(nll_trace, residual_trace, path) -> None:
    """Two-panel stage trace: NLL and update residual."""
    stages = np.arange(1, len(nll_trace) + 1)
    fig, (ax_nll, ax_res) = plt.subplots(1, 2, figsize=(8, 3))
    ax_nll.plot(stages, nll_trace, marker=".", color="tab:blue")
    ax_nll.set_xlabel("stage")
    ax_nll.set_ylabel("NLL")
    ax_res.semilogy(stages, np.maximum(residual_trace, 1e-300),
                    marker=".", color="tab:orange")
    ax_res.set_xlabel("stage")
    ax_res.set_ylabel(r"$\|x_{k} - x_{k-1}\|_2$")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_eval_figure(estimate, reference, image_shape, path) -> None:
    """Estimate vs reference: image panels for 2D shapes, overlay otherwise."""
    estimate = np.asarray(estimate, float)
    reference = np.asarray(reference, float)
    if image_shape is not None and len(image_shape) >= 2:
        est = estimate.reshape(image_shape)
        ref = reference.reshape(image_shape)
        if est.ndim == 3:  # channel-averaged grayscale panels
            est, ref = est.mean(axis=-1), ref.mean(axis=-1)
        fig, axes = plt.subplots(1, 3, figsize=(9, 3))
        for ax, img, title in zip(axes, (ref, est, est - ref),
                                  ("reference", "estimate", "difference")):
            im = ax.imshow(img, cmap="gray")
            ax.set_title(title)
            ax.set_axis_off()
            fig.colorbar(im, ax=ax, fraction=0.046)
    else:
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.plot(reference.ravel(), label="reference", lw=1.0)
        ax.plot(estimate.ravel(), label="estimate", lw=1.0, alpha=0.8)
        ax.set_xlabel("index")
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
