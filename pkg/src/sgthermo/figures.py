"""Render summary figures next to the CSV output of each experiment."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_KIND_STYLE = {
    "msgnht-split": dict(color="tab:red", marker="o"),
    "msgnht-euler": dict(color="tab:blue", marker="s"),
    "sghmc-split": dict(color="tab:orange", marker="^"),
    "sghmc-euler": dict(color="tab:green", marker="v"),
    "sgld": dict(color="tab:purple", marker="d"),
}


def _style(kind):
    return _KIND_STYLE.get(kind, dict(marker="x"))


def _save(fig, out_dir, name) -> Path:
    path = Path(out_dir) / name
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def doublewell_figures(result, out_dir) -> list:
    paths = []
    kinds = sorted({r.kind for r in result.runs})

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for kind in kinds:
        rows = [(r.h, r.kl) for r in result.runs if r.kind == kind and not r.diverged]
        if rows:
            h, kl = zip(*rows)
            ax.loglog(h, kl, label=kind, **_style(kind))
    ax.set_xlabel("stepsize h")
    ax.set_ylabel("KL(true || estimated)")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    paths.append(_save(fig, out_dir, "kl_vs_h.png"))

    by_h: dict = {}
    for kind, h, step, xi in result.thermostat_rows:
        by_h.setdefault(h, {}).setdefault(kind, []).append((step, xi))
    if by_h:
        h_show = max(by_h)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for kind, rows in sorted(by_h[h_show].items()):
            steps, xis = zip(*rows)
            ax.plot(steps, xis, label=kind, lw=1, color=_style(kind).get("color"))
        ax.axhline(1.0, color="k", ls="--", lw=0.8)
        ax.set_xlabel("step")
        ax.set_ylabel("mean thermostat")
        ax.set_title(f"h = {h_show:g}")
        ax.legend(fontsize=8)
        paths.append(_save(fig, out_dir, "thermostat.png"))

    centers = 0.5 * (result.true_density.edges[:-1] + result.true_density.edges[1:])
    width = centers[1] - centers[0]
    with_density = [r for r in result.runs if r.density is not None]
    h_set = sorted({r.h for r in with_density})
    if h_set:
        show = [h_set[0], h_set[-1]] if len(h_set) > 1 else h_set
        fig, axes = plt.subplots(1, len(show), figsize=(5 * len(show), 3.2), squeeze=False)
        for ax, h in zip(axes[0], show):
            ax.plot(centers, result.true_density.masses / width, "k-", lw=1.5, label="true")
            for r in with_density:
                if r.h == h and r.kind.startswith("msgnht"):
                    ax.plot(centers, r.density.masses / width, lw=1,
                            color=_style(r.kind).get("color"), label=r.kind)
            ax.set_title(f"h = {h:g}")
            ax.set_xlabel("theta")
            ax.legend(fontsize=7)
        axes[0][0].set_ylabel("density")
        paths.append(_save(fig, out_dir, "densities.png"))
    return paths


def order_figures(result, out_dir) -> list:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for kind, sw in result.sweeps.items():
        ok = np.isfinite(sw.bias_values)
        ax.loglog(sw.h_values[ok], sw.bias_values[ok], label=f"{kind} (slope {sw.fitted_slope:.2f})",
                  **_style(kind))
        if np.isfinite(sw.fitted_slope) and sw.fit_mask.any():
            hs = sw.h_values[sw.fit_mask]
            ref = sw.bias_values[sw.fit_mask][-1] * (hs / hs[-1]) ** sw.fitted_slope
            ax.loglog(hs, ref, "--", lw=0.8, color=_style(kind).get("color"))
    ax.set_xlabel("stepsize h")
    ax.set_ylabel("|bias|")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    return [_save(fig, out_dir, "order.png")]


def logreg_figures(result, out_dir) -> list:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for kind, cell in sorted(result.best.items()):
        ax.plot(cell.curve_iterations, cell.curve_test_error, label=f"{kind} (h={cell.h:g}, D={cell.D:g})",
                color=_style(kind).get("color"))
    ax.set_xlabel("iteration")
    ax.set_ylabel("test error")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    return [_save(fig, out_dir, "learning_curve.png")]


def mlp_figures(result, out_dir) -> list:
    h_bases = sorted({run.h_base for run in result.runs})
    fig, axes = plt.subplots(1, len(h_bases), figsize=(5 * len(h_bases), 3.2), squeeze=False)
    for ax, h_base in zip(axes[0], h_bases):
        for run in result.runs:
            if run.h_base != h_base:
                continue
            label = run.kind + (" (diverged)" if run.diverged else "")
            ax.plot(run.epochs, run.test_accuracy, label=label, color=_style(run.kind).get("color"))
        ax.set_title(f"base h = {h_base:g}")
        ax.set_xlabel("epoch")
        ax.legend(fontsize=7)
    axes[0][0].set_ylabel("test accuracy")
    return [_save(fig, out_dir, "learning_curve.png")]
