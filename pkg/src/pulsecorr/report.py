"""Figures written next to the CSV/JSON outputs.

Figures are drawn on bare :class:`matplotlib.figure.Figure` objects with
the Agg canvas, so no global pyplot state is touched.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .moments import CorrelationSet, fit_harmonics, harmonic_design

# PNG metadata without a version stamp keeps reruns byte-identical
_PNG_META = {"Software": None}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=110, metadata=_PNG_META)
    return path


def _grid(n: int, ncols: int = 3):
    ncols = min(ncols, n)
    nrows = int(np.ceil(n / ncols))
    fig = Figure(figsize=(3.6 * ncols, 2.8 * nrows), layout="constrained")
    axes = fig.subplots(nrows, ncols, squeeze=False).ravel()
    for ax in axes[n:]:
        ax.set_visible(False)
    return fig, axes


def plot_histograms(batches, path, bins="fd") -> Path:
    """Outcome histograms, one panel per setting (Freedman-Diaconis bins by default)."""
    batches = list(batches)
    fig, axes = _grid(len(batches))
    for ax, b in zip(axes, batches):
        s = b.setting
        ax.hist(b.outcomes, bins=bins, density=True, histtype="stepfilled", alpha=0.6, color="C0")
        ax.set_title(f"q={s.q:.3g}, dphi={s.dphi:.3g}", fontsize=9)
        ax.set_xlabel("F")
    return _save(fig, path)


def plot_correlations(corr: CorrelationSet, path) -> Path:
    """Each correlation channel versus ``dphi`` with its harmonic fit."""
    fig, axes = _grid(len(corr.keys))
    fine = np.linspace(0, 2 * np.pi, 200)
    for ax, key in zip(axes, corr.keys):
        y, se = corr.channel(key), corr.channel_se(key)
        ax.errorbar(corr.dphis, y, yerr=se, fmt="o", ms=3, capsize=2, color="k")
        if len(corr.dphis) >= 5:
            ax.plot(fine, harmonic_design(fine) @ fit_harmonics(corr.dphis, y), color="C3", lw=1)
        ax.set_title(f"<F1^{key[0]} F2^{key[1]}> ({corr.status})", fontsize=9)
        ax.set_xlabel("dphi")
    return _save(fig, path)


def plot_sweep(etas, rows: list[dict], reference: dict, path, names=("n1", "n2", "coherence.im", "n1n2")) -> Path:
    """Reconstructed quantities versus detection efficiency, with exact values dashed."""
    names = [n for n in names if all(n in r["values"] for r in rows)]
    fig, axes = _grid(len(names), ncols=2)
    etas = np.asarray(etas)
    for ax, name in zip(axes, names):
        v = np.array([r["values"][name] for r in rows])
        e = np.array([r["errors"][name] for r in rows])
        ax.errorbar(etas, v, yerr=e, fmt="o-", ms=4, capsize=2)
        if name in reference:
            ax.axhline(reference[name], ls="--", color="0.4")
        ax.set_title(name, fontsize=9)
        ax.set_xlabel("eta")
    return _save(fig, path)
