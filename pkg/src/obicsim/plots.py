"""Figures written next to the CSV/JSON outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .traces import TraceSet

# fixed metadata keeps PNG bytes stable between runs
_PNG_META = {"Software": None}

plt.rcParams.update(
    {
        "figure.figsize": (6.0, 3.8),
        "font.size": 9,
        "axes.labelsize": 9,
        "legend.fontsize": 8,
        "axes.grid": True,
        "grid.alpha": 0.3,
    }
)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_traces(sets: Mapping[str, TraceSet], path: str | Path, windows: Mapping[str, tuple] | None = None) -> Path:
    """Current versus sample index, one colour per labelled trace set."""
    fig, ax = plt.subplots()
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for c, (label, ts) in zip(colors, sets.items()):
        for k, tr in enumerate(ts.traces):
            ax.plot(
                np.arange(len(tr.currents)), tr.currents, "o-", ms=3, lw=1, color=c,
                alpha=0.8, label=label if k == 0 else None,
            )
        if windows and windows.get(label):
            s, e = windows[label]
            ax.axvspan(s - 0.5, e + 0.5, color="tab:red", alpha=0.08)
    ax.set_xlabel("sample index")
    ax.set_ylabel("current (µA)")
    ax.legend()
    return _save(fig, Path(path))


def plot_scan(rows: Sequence[tuple[float, float, str, float]], path: str | Path) -> Path:
    """Heatmap of total current over the spot grid, one panel per pattern."""
    patterns = list(dict.fromkeys(r[2] for r in rows))
    xs = sorted({r[0] for r in rows})
    ys = sorted({r[1] for r in rows})
    fig, axes = plt.subplots(1, len(patterns), figsize=(3.2 * len(patterns), 3.6), squeeze=False)
    vmax = max((r[3] for r in rows), default=1.0) or 1.0
    for k, (ax, pat) in enumerate(zip(axes[0], patterns)):
        z = np.zeros((len(ys), len(xs)))
        for x, y, p, v in rows:
            if p == pat:
                z[ys.index(y), xs.index(x)] = v
        im = ax.imshow(
            z, origin="lower", aspect="equal", vmin=0, vmax=vmax, cmap="inferno",
            extent=(xs[0], xs[-1], ys[0], ys[-1]) if len(xs) > 1 and len(ys) > 1 else None,
        )
        ax.set_title(f"pattern '{pat}'")
        ax.set_xlabel("x (µm)")
        if k == 0:
            ax.set_ylabel("y (µm)")
        ax.grid(False)
    fig.colorbar(im, ax=axes[0].tolist(), label="total (µA)", shrink=0.8)
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)
    return Path(path)


def plot_power_response(
    curves: Mapping[str, tuple[np.ndarray, np.ndarray]],
    path: str | Path,
    anchors: Sequence[tuple[float, str, float]] = (),
) -> Path:
    """Modelled total current against laser power on a log axis, with anchors."""
    fig, ax = plt.subplots()
    for label, (p, i) in curves.items():
        ax.semilogy(p, np.maximum(i, 1e-6), label=f"model '{label}'")
    for p, pat, obs in anchors:
        ax.semilogy([p], [obs], "kx")
    ax.set_xlabel("laser power (%)")
    ax.set_ylabel("total current (µA)")
    ax.legend()
    return _save(fig, Path(path))
