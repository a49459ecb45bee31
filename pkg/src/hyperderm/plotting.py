"""Static matplotlib figures written next to the CSV and SVG outputs."""

from __future__ import annotations

import io
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import AggregateResult  # noqa: E402
from .cube import Montage  # noqa: E402


def _png(fig) -> bytes:
    buf = io.BytesIO()
    # no software/date stamp, so identical figures give identical bytes
    fig.savefig(buf, format="png", dpi=120, metadata={"Software": None})
    plt.close(fig)
    return buf.getvalue()


def spectra_figure_bytes(center: Sequence[AggregateResult], spread: Sequence[AggregateResult] | None = None,
                         title: str = "") -> bytes:
    """One line per group, shaded +/- one ``spread`` value where given."""
    fig, ax = plt.subplots(figsize=(7, 4.2))
    by_group = {r.group: r for r in (spread or [])}
    for res in center:
        lam = res.wavelengths
        line, = ax.plot(lam, res.values, label=f"{res.group} (n={res.n})")
        if res.group in by_group:
            s = by_group[res.group].values
            ax.fill_between(lam, res.values - s, res.values + s, color=line.get_color(), alpha=0.2, lw=0)
    ax.set_xlim(450, 950)
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("reflectance")
    if title:
        ax.set_title(title)
    ax.legend(fontsize="small", loc="best")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _png(fig)


def montage_figure_bytes(montage: Montage) -> bytes:
    n = len(montage.labels_nm)
    rows, cols = montage.grid
    fig, axes = plt.subplots(rows, cols, figsize=(2.0 * cols, 2.0 * rows), squeeze=False)
    for i, ax in enumerate(axes.ravel()):
        ax.axis("off")
        if i < n:
            ax.imshow(montage.tile(i), cmap="gray", vmin=0, vmax=255)
            ax.set_title(f"{montage.labels_nm[i]:g} nm", fontsize=9)
    fig.tight_layout()
    return _png(fig)
