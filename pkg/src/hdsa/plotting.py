"""Static figures of a sweep: theory as lines, simulations as markers."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["PANELS", "plot_sweep"]

# (file stem, simulated column, theory column, y label, show error bars)
PANELS = (
    ("fig_w", "sim_w", "th_w", r"$\hat w_n$", True),
    ("fig_v", "sim_v", "th_v", r"$\hat v_n$", True),
    ("fig_cindex", "sim_cindex", "th_cindex", "test c-index", False),
    ("fig_ribs", "sim_ribs", "th_ribs", r"$R_{IBS}$", True),
)

plt.rcParams.update(
    {
        "font.size": 11,
        "axes.spines.top": False,
        "axes.spines.right": False,
        "legend.frameon": False,
        "svg.hashsalt": "hdsa",
    }
)


def _panel(rows, sim, th, ylabel, errorbars):
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    zetas = sorted({r.zeta for r in rows})
    colors = plt.cm.viridis(np.linspace(0.1, 0.85, len(zetas)))
    for zeta, color in zip(zetas, colors):
        sub = sorted((r for r in rows if r.zeta == zeta), key=lambda r: r.eta)
        eta = np.array([r.eta for r in sub])
        ax.plot(eta, [getattr(r, th) for r in sub], "-", color=color, lw=1.6, label=rf"$\zeta={zeta:g}$")
        mean = np.array([getattr(r, sim + "_mean") for r in sub])
        if errorbars:
            std = np.array([getattr(r, sim + "_std") for r in sub])
            ax.errorbar(eta, mean, yerr=std, fmt="o", ms=3.5, color=color, capsize=2, lw=0.8)
        else:
            ax.plot(eta, mean, "o", ms=3.5, color=color)
    ax.set_xscale("log")
    ax.set_xlabel(r"$\eta$")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=9)
    fig.tight_layout()
    return fig


def plot_sweep(rows: Sequence, out_dir, fmt: str = "svg") -> list:
    """Write one figure per panel into ``out_dir``; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for stem, sim, th, ylabel, errorbars in PANELS:
        fig = _panel(rows, sim, th, ylabel, errorbars)
        path = out_dir / f"{stem}.{fmt}"
        try:
            fig.savefig(path, metadata={"Date": None} if fmt == "svg" else None)
        except OSError as exc:
            raise OSError(f"cannot write figure {path}: {exc.strerror or exc}") from exc
        finally:
            plt.close(fig)
        paths.append(path)
    return paths
